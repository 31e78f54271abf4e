// Copyright 2026 The incnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "incnet/harness.hpp"
#include "incnet/wire.hpp"

namespace h = incnet::harness;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 20260101;

struct Outcome {
  bool ok = true;
  std::ostringstream why;
  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      why << " [failed: " << what << "]";
    }
  }
};

struct Checked {
  h::Report report;
  h::VerifyResult verdict;
};

Checked run_checked(const std::string& name, const json& cfg) {
  Checked c;
  c.report = h::run_scenario(name, cfg, kSeed);
  c.verdict = h::verify(c.report, h::run_scenario(name, cfg, kSeed, true));
  return c;
}

std::string first_failure(const h::VerifyResult& v) {
  for (const auto& l : v.lines) {
    if (l.rfind("FAIL", 0) == 0) return l;
  }
  return "";
}

const h::Row* find(const h::Report& r, const std::string& variant) {
  for (const auto& row : r.rows) {
    if (row.variant == variant) return &row;
  }
  return nullptr;
}

double extra(const h::Row* r, const std::string& k) {
  if (!r) return 0;
  auto it = r->extra.find(k);
  return it == r->extra.end() ? 0 : it->second;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- criteria -------------------------------------------------------------

void idempotence(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t traces = 0, bad = 0, dups = 0;
  for (std::uint32_t w : {4u, 16u, 256u}) {
    const auto r = h::idempotence_trial(kSeed + w, w, 400, 0.5);
    traces += r.traces;
    bad += r.mismatches;
    dups += r.duplicates;
    o.check(r.mismatches == 0, "w_max " + std::to_string(w) + ": " + r.first_failure);
  }
  const double secs = seconds_since(t0);
  o.why << traces << " traces, " << dups << " duplicates seen by the switch, " << bad
        << " mismatches, " << secs << " s";
  o.check(traces >= 1000, "at least 1000 traces");
  o.check(secs < 60, "under 60 s");
}

void equivalence(Outcome& o, h::Report* monitor) {
  for (const std::string name :
       {"syncagtr", "asyncagtr-wordcount", "keyvalue-monitor", "agreement-vote"}) {
    const auto c = run_checked(name, json::object());
    std::size_t rows = 0;
    for (const auto& r : c.report.rows) rows += r.loss == 0 || r.loss == 0.001 || r.loss == 0.01;
    o.why << name << " " << rows << "/3 loss rates" << (c.verdict.ok ? " ok; " : " FAIL; ");
    o.check(c.verdict.ok, first_failure(c.verdict));
    o.check(rows == 3, name + " covers loss {0, 0.001, 0.01}");
    if (name == "keyvalue-monitor") *monitor = c.report;
  }
}

void overflow(Outcome& o) {
  const json cfg = {{"ratios", {0.0, 0.00001, 0.001, 0.01}}};
  const auto c = run_checked("overflow-sweep", cfg);
  o.check(c.verdict.ok, first_failure(c.verdict));
  double prev = -1;
  for (const auto& r : c.report.rows) {
    o.why << r.variant << " goodput " << r.goodput_bps / 1e9 << " Gb/s, fallback "
          << r.fallback_items << "; ";
    o.check(prev < 0 || r.goodput_bps <= prev, "goodput non-increasing at " + r.variant);
    prev = r.goodput_bps;
  }
}

void clear_policies(Outcome& o) {
  const auto c = run_checked("clear-compare", json::object());
  o.check(c.verdict.ok, first_failure(c.verdict));
  const auto* copy = find(c.report, "copy");
  const auto* shadow = find(c.report, "shadow");
  const auto* lazy = find(c.report, "lazy");
  if (!copy || !shadow || !lazy) {
    o.check(false, "three rows");
    return;
  }
  for (const auto* r : {copy, shadow, lazy}) {
    o.why << r->variant << " lat " << r->lat_mean_us << " us, cells " << r->cells << ", goodput "
          << r->goodput_bps / 1e9 << " Gb/s; ";
  }
  o.check(copy->lat_mean_us > shadow->lat_mean_us && copy->lat_mean_us > lazy->lat_mean_us,
          "copy has the highest latency");
  o.check(shadow->cells == 2 * copy->cells, "shadow uses twice the cells of copy");
  o.check(lazy->goodput_bps >= 0.95 * copy->goodput_bps, "lazy goodput within 5% of copy or above");
  o.check(lazy->lat_mean_us <= 1.1 * shadow->lat_mean_us, "lazy latency within 10% of shadow or below");
}

void congestion(Outcome& o) {
  const json cfg = {{"variants", {"cc-on", "cc-off"}}};
  const auto r = h::run_scenario("concurrency-mix", cfg, kSeed);
  const auto* on = find(r, "cc-on");
  const auto* off = find(r, "cc-off");
  if (!on || !off) {
    o.check(false, "both rows");
    return;
  }
  const double reduction = off->loss_ratio > 0 ? 1 - on->loss_ratio / off->loss_ratio : 0;
  const double conv = extra(on, "conv_ms");
  o.why << "loss ratio on " << on->loss_ratio << " off " << off->loss_ratio << " (reduction "
        << reduction * 100 << "%), Jain " << on->jain << ", converged after " << conv << " ms";
  o.check(off->loss_ratio > 0, "losses without control");
  o.check(reduction >= 0.4, "loss reduced by at least 40%");
  o.check(conv >= 0 && conv <= 500, "Jain >= 0.9 within 500 ms");
}

void cache(Outcome& o) {
  const auto c = run_checked("cache-compare", json::object());
  o.check(c.verdict.ok, first_failure(c.verdict));
  const auto* lru = find(c.report, "lru");
  if (!lru) {
    o.check(false, "lru row");
    return;
  }
  for (const auto& r : c.report.rows) {
    o.why << r.variant << " CHR " << r.chr << " goodput " << r.goodput_bps / 1e9 << " Gb/s; ";
    if (&r != lru) o.check(lru->chr > r.chr, "LRU CHR above " + r.variant);
  }
  const double rho = extra(lru, "spearman_chr_goodput");
  o.why << "spearman " << rho;
  o.check(rho > 0, "CHR and goodput positively correlated");
}

void cntfwd(Outcome& o) {
  const auto lock = h::lock_race_trial(kSeed, 1000, 4);
  const auto vote = h::vote_trial(kSeed, 1000, 4, 3);
  o.why << "lock races " << lock.keys << " (" << lock.duplicates << " duplicates), bad " << lock.bad
        << "; ballots " << vote.keys << " (" << vote.duplicates << " duplicates), bad " << vote.bad;
  o.check(lock.keys == 1000 && lock.bad == 0, "one winner per lock race");
  o.check(vote.keys == 1000 && vote.bad == 0, "one forward per ballot");
  o.check(lock.duplicates > 0 && vote.duplicates > 0, "duplicates exercised");
  const auto rt = h::run_scenario("lock", json::object(), kSeed);
  const double viol = rt.rows.empty() ? 1 : extra(&rt.rows[0], "violations");
  o.why << "; end-to-end lock races with two holders: " << viol;
  o.check(viol == 0, "end-to-end lock exclusion");
}

void sub_rtt(Outcome& o, const h::Report& monitor) {
  const auto* r = find(monitor, "loss=0");
  const double ratio = extra(r, "hit_rtt_ratio");
  o.why << "hit " << extra(r, "hit_lat_us") << " us, server round trip " << extra(r, "rtt_us")
        << " us, ratio " << ratio;
  o.check(r && extra(r, "cached_flows") > 0, "cached flows");
  o.check(ratio > 0 && ratio < 0.6, "ratio below 0.6");
}

void isolation(Outcome& o) {
  const json cfg = {{"variants", {"solo-kv", "solo-vote", "mix-4", "mix-20"}}};
  const auto r = h::run_scenario("concurrency-mix", cfg, kSeed);
  const auto* kv = find(r, "solo-kv");
  const auto* vote = find(r, "solo-vote");
  const auto* m4 = find(r, "mix-4");
  const auto* m20 = find(r, "mix-20");
  if (!kv || !vote || !m4 || !m20) {
    o.check(false, "four rows");
    return;
  }
  for (const std::string t : {"S", "A"}) {
    const double a = extra(m4, "goodput_" + t), b = extra(m20, "goodput_" + t);
    const double change = a > 0 ? std::abs(b / a - 1) : 1;
    o.why << t << " " << a / 1e9 << " -> " << b / 1e9 << " Gb/s (" << change * 100 << "%); ";
    o.check(a > 0 && change < 0.1, "type " + t + " goodput within 10%");
  }
  for (const auto& [t, solo] : {std::pair{std::string("K"), kv}, std::pair{std::string("V"), vote}}) {
    const double base = extra(solo, "lat_" + t + "_us");
    for (const auto* m : {m4, m20}) {
      const double inflation = base > 0 ? extra(m, "lat_" + t + "_us") / base - 1 : 1;
      o.why << t << "@" << m->variant << " +" << inflation * 100 << "%; ";
      o.check(base > 0 && inflation <= 0.25, t + " latency inflation at " + m->variant);
    }
  }
}

void codec(Outcome& o) {
  using namespace incnet::wire;
  std::mt19937_64 rng(kSeed);
  std::uint64_t bad = 0;
  for (int n = 0; n < 100000; ++n) {
    const bool elide = rng() % 3 == 0;
    Packet p;
    p.gaid = static_cast<std::uint32_t>(rng());
    p.seq = static_cast<std::uint32_t>(rng());
    p.srrt = static_cast<std::uint16_t>(rng());
    p.flip = rng() & 1;
    p.flags = static_cast<std::uint16_t>(rng() & kAllFlags);
    p.op_type = static_cast<std::uint8_t>(rng());
    p.bitmap = static_cast<std::uint32_t>(rng());
    p.counter_index = static_cast<std::uint32_t>(rng());
    p.counter_threshold = static_cast<std::uint32_t>(rng());
    for (int i = 0; i < kSlots; ++i) {
      p.slots[i].key = elide ? p.counter_index + static_cast<std::uint32_t>(i) : static_cast<std::uint32_t>(rng());
      p.slots[i].value = static_cast<std::int32_t>(rng());
    }
    p.payload.resize(rng() % 64);
    for (auto& b : p.payload) b = static_cast<std::uint8_t>(rng());
    const Bytes b = encode_packet(p, elide);
    bool elided = !elide;
    const Packet q = decode_packet(b, &elided);
    if (!(q == p) || elided != elide || b.size() != encoded_size(p, elide)) ++bad;
  }
  Packet empty;
  const std::size_t kv = encode_packet(empty, false).size();
  o.why << "100000 round trips, " << bad << " mismatches; kv packet " << kv << " bytes";
  o.check(bad == 0, "no mismatches");
  o.check(kv >= 192 && kv <= 320, "kv size in [192, 320]");
}

}  // namespace

int main() {
  int failed = 0;
  h::Report monitor;
  auto run = [&](int n, const char* title, const std::function<void(Outcome&)>& fn) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    if (!o.ok) ++failed;
    std::printf("criterion %2d %-28s %s (%.1f s): %s\n", n, title, o.ok ? "PASS" : "FAIL",
                seconds_since(t0), o.why.str().c_str());
    std::fflush(stdout);
  };
  run(1, "idempotent retransmission", idempotence);
  run(2, "result equivalence", [&](Outcome& o) { equivalence(o, &monitor); });
  run(3, "overflow handling", overflow);
  run(4, "clear policies", clear_policies);
  run(5, "congestion control", congestion);
  run(6, "cache policies", cache);
  run(7, "counting forward", cntfwd);
  run(8, "cache-hit latency", [&](Outcome& o) { sub_rtt(o, monitor); });
  run(9, "multi-app isolation", isolation);
  run(10, "wire codec", codec);
  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
