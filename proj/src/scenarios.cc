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

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <set>

#include "incnet/errors.hpp"
#include "incnet/harness.hpp"
#include "incnet/rpc.hpp"

#ifndef INCNET_DEFAULT_SERVICES
#define INCNET_DEFAULT_SERVICES "configs/services"
#endif

namespace incnet::harness {

namespace {

using json = nlohmann::json;
using rpc::CallResult;

// ---- configuration --------------------------------------------------------

const std::map<std::string, json>& defaults() {
  static const std::map<std::string, json> d = {
      {"syncagtr",
       {{"elements", 100000}, {"rounds", 1}, {"clients", 2}, {"losses", {0.0, 0.001, 0.01}},
        {"clear", "copy"}, {"gbps", 100.0}, {"delay_us", 2.0}, {"w_max", 256}}},
      {"asyncagtr-wordcount",
       {{"keys", 10000}, {"zipf", 1.0}, {"clients", 3}, {"calls", 60}, {"words", 512},
        {"parallel", 4}, {"cache_cells", 4096}, {"policy", "lru"}, {"losses", {0.0, 0.001, 0.01}},
        {"gbps", 100.0}, {"delay_us", 2.0}}},
      {"keyvalue-monitor",
       {{"flows", 5000}, {"zipf", 1.0}, {"clients", 2}, {"calls", 40}, {"keys_per_call", 256},
        {"parallel", 2}, {"cache_cells", 4096}, {"hit_queries", 200}, {"keys_per_query", 16},
        {"rtt_probes", 200}, {"losses", {0.0, 0.001, 0.01}}, {"gbps", 100.0}, {"delay_us", 2.0}}},
      {"agreement-vote",
       {{"voters", 4}, {"ballots", 1000}, {"parallel", 16}, {"losses", {0.0, 0.001, 0.01}},
        {"switch_ballots", 1000}, {"gbps", 100.0}, {"delay_us", 2.0}}},
      {"lock",
       {{"races", 1000}, {"contenders", 4}, {"spacing_us", 200.0}, {"hold_us", 20.0},
        {"switch_races", 1000}, {"gbps", 100.0}, {"delay_us", 2.0}}},
      {"concurrency-mix",
       {{"variants", {"cc-on", "cc-off", "solo-kv", "solo-vote", "mix-4", "mix-20"}},
        {"cc_elements", 2048}, {"cc_join_ms", 20.0}, {"cc_run_ms", 300.0}, {"cc_bucket_ms", 10.0},
        {"core_gbps", 1.0}, {"core_queue", 64}, {"edge_gbps", 10.0}, {"delay_us", 2.0},
        {"mix_run_ms", 20.0}, {"mix_warmup_ms", 2.0}, {"mix_elements", 8192}, {"mix_parallel", 2}, {"mix_words", 256},
        {"mix_keys", 2000}, {"small_think_us", 50.0}, {"ecn_hold_us", 5.0}}},
      {"cache-compare",
       {{"keys", 10000}, {"zipf", 1.0}, {"cache_fraction", 0.1}, {"clients", 3}, {"calls", 60},
        {"words", 512}, {"parallel", 4}, {"policies", {"lru", "fcfs", "hash", "pon"}},
        {"window_ms", 2.0}, {"pon_threshold", 5}, {"gbps", 100.0}, {"delay_us", 2.0}}},
      {"loss-sweep",
       {{"elements", 20000}, {"rounds", 5}, {"clients", 2}, {"losses", {0.0, 0.001, 0.01}},
        {"clear", "copy"}, {"gbps", 100.0}, {"delay_us", 2.0}, {"w_max", 256}}},
      {"overflow-sweep",
       {{"elements", 20000}, {"rounds", 5}, {"clients", 2},
        {"ratios", {0.0, 0.00001, 0.001, 0.01}}, {"clear", "copy"}, {"gbps", 100.0},
        {"delay_us", 2.0}, {"w_max", 256}}},
      {"clear-compare",
       {{"elements", 3200}, {"rounds", 100}, {"clients", 2},
        {"policies", {"copy", "shadow", "lazy"}}, {"gbps", 100.0}, {"delay_us", 2.0},
        {"w_max", 256}}},
  };
  return d;
}

std::string services_dir(const json& cfg) {
  if (cfg.contains("services")) return cfg["services"].get<std::string>();
  if (const char* e = std::getenv("INCNET_SERVICES")) return e;
  return INCNET_DEFAULT_SERVICES;
}

rpc::ServiceDef load_service(const json& cfg, const std::string& name) {
  return rpc::ServiceDef::load(services_dir(cfg) + "/" + name, name + ".schema");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::mt19937_64 rng_for(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

net::LinkSpec edge(const json& cfg) {
  net::LinkSpec l;
  l.gbps = cfg.value("gbps", 100.0);
  l.delay_us = cfg.value("delay_us", 2.0);
  return l;
}

// ---- simulation world -----------------------------------------------------

struct World {
  net::Simulator sim;
  net::Network net;
  rpc::Runtime rt;
  World(const net::TopologySpec& spec, std::uint64_t seed, rpc::RuntimeConfig cfg = {})
      : net(sim, spec, seed), rt(net, cfg) {}
  int host(const std::string& n) const { return net.node(n); }
};

std::string h(int i) { return "h" + std::to_string(i); }

// Issues calls from one client, keeping `parallel` in flight, until next()
// has nothing more.
struct Loop : std::enable_shared_from_this<Loop> {
  World* w = nullptr;
  int client = -1;
  std::string svc, method;
  std::function<std::optional<Message>(int)> next;
  std::function<void(int, const CallResult&)> done;
  int issued = 0;

  void issue() {
    auto m = next(issued);
    if (!m) return;
    const int k = issued++;
    auto self = shared_from_this();
    w->rt.call(client, svc, method, std::move(*m), [self, k](const CallResult& r) {
      self->done(k, r);
      self->issue();
    });
  }
};

void closed_loop(World& w, int client, const std::string& svc, const std::string& method,
                 std::function<std::optional<Message>(int)> next,
                 std::function<void(int, const CallResult&)> done, int parallel = 1) {
  auto l = std::make_shared<Loop>();
  l->w = &w;
  l->client = client;
  l->svc = svc;
  l->method = method;
  l->next = std::move(next);
  l->done = std::move(done);
  for (int i = 0; i < parallel; ++i) l->issue();
}

struct Lat {
  std::vector<double> us;
  void add(const CallResult& r) { us.push_back(static_cast<double>(r.end - r.start) / 1000.0); }
};

void fill_common(Row& row, World& w, const std::vector<std::string>& services, const Lat& lat,
                 std::int64_t sim_ns) {
  row.sim_ns = sim_ns;
  row.goodput_bps = sim_ns > 0 ? static_cast<double>(row.app_bytes) * 8e9 / static_cast<double>(sim_ns) : 0;
  row.lat_p50_us = percentile(lat.us, 50);
  row.lat_p99_us = percentile(lat.us, 99);
  row.lat_mean_us = mean(lat.us);
  std::uint64_t items = 0, fb_items = 0;
  for (const auto& s : services) {
    const auto& st = w.rt.stats(s);
    items += st.items;
    fb_items += st.fallback_items;
    row.fallback_packets += st.fallback_packets;
    row.fallback_items += st.fallback_items;
    row.evictions += st.evictions;
    row.decisions += st.decisions;
    row.cells += w.rt.reserved_cells(s);
  }
  row.chr = items ? 1.0 - static_cast<double>(fb_items) / static_cast<double>(items) : 0;
  const auto t = w.net.totals();
  row.frames_sent = t.sent;
  row.frames_dropped = t.queue_drops + t.loss_drops;
  row.loss_ratio = t.sent ? static_cast<double>(row.frames_dropped) / static_cast<double>(t.sent) : 0;
}

void mark_livelock(Row& row) {
  row.extra["livelock"] = 1;
  row.extra["violations"] += 1;
}

// ---- gradient workloads ---------------------------------------------------

constexpr int kPrecision = 8;      // of the training filter
constexpr double kOverflowValue = 15.0;  // fits alone, the sum of two does not

struct SyncSpec {
  int clients = 2;
  std::size_t elements = 0;
  int rounds = 1;
  double ovf = 0;
};

FPArray grad(std::uint64_t seed, int round, int client, const SyncSpec& s) {
  auto rng = rng_for({seed, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client), 1});
  auto pick = rng_for({seed, static_cast<std::uint64_t>(round), 0xF00});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  FPArray g(s.elements);
  for (auto& x : g) {
    x = u(rng);
    if (s.ovf > 0 && p(pick) < s.ovf) x = kOverflowValue;
  }
  return g;
}

std::string elem_key(int round, std::size_t i) {
  return std::to_string(round) + "/" + std::to_string(i);
}

Values sync_oracle(std::uint64_t seed, const SyncSpec& s) {
  Values v;
  for (int r = 0; r < s.rounds; ++r) {
    std::vector<double> sum(s.elements, 0.0);
    for (int c = 0; c < s.clients; ++c) {
      const auto g = grad(seed, r, c, s);
      for (std::size_t i = 0; i < s.elements; ++i) sum[i] += g[i];
    }
    for (std::size_t i = 0; i < s.elements; ++i) v[elem_key(r, i)] = sum[i];
  }
  return v;
}

double sync_tolerance(const SyncSpec& s) {
  return s.clients * 0.5 / std::pow(10.0, kPrecision) * (1 + 1e-9) + 1e-12;
}

// Runs one training service over its own single-switch star.
struct SyncOutcome {
  Lat lat;
  std::uint64_t bytes = 0;
  std::int64_t end_ns = 0;
  bool complete = false;
  std::uint64_t disagreements = 0;
};

SyncOutcome run_sync(World& w, const std::string& svc, const std::vector<int>& clients,
                     std::uint64_t seed, const SyncSpec& s, Values* values) {
  SyncOutcome out;
  int remaining = s.clients * s.rounds;
  std::map<int, FPArray> first;  // round -> client 0 result
  std::map<int, std::vector<FPArray>> others;
  for (int c = 0; c < s.clients; ++c) {
    closed_loop(
        w, clients[c], svc, "Update",
        [&, c](int k) -> std::optional<Message> {
          if (k >= s.rounds) return std::nullopt;
          Message m;
          m.type = "NewGrad";
          m.fields["tensor"] = grad(seed, k, c, s);
          return m;
        },
        [&, c](int k, const CallResult& r) {
          --remaining;
          if (!r.ok) return;
          out.lat.add(r);
          out.bytes += 4 * s.elements;
          out.end_ns = std::max<std::int64_t>(out.end_ns, r.end);
          const auto& t = std::get<FPArray>(r.reply.fields.at("tensor"));
          if (c == 0) {
            first[k] = t;
          } else {
            others[k].push_back(t);
          }
        });
  }
  w.sim.run_while_not([&] { return remaining == 0; }, 120 * net::kSec);
  out.complete = remaining == 0;
  for (const auto& [k, list] : others) {
    for (const auto& t : list) {
      if (!first.count(k) || t != first[k]) ++out.disagreements;
    }
  }
  if (values) {
    for (const auto& [k, t] : first) {
      for (std::size_t i = 0; i < t.size(); ++i) (*values)[elem_key(k, i)] = t[i];
    }
  }
  return out;
}

rpc::ServiceDef training_def(const json& cfg, int clients) {
  auto def = load_service(cfg, "training");
  def.filters.at("Update").cntfwd.threshold = static_cast<std::uint32_t>(clients);
  return def;
}

nf::ClearPolicy clear_from(const std::string& s) {
  auto c = nf::clear_policy_from(s);
  if (!c || *c == nf::ClearPolicy::kNop) throw Error(Errc::kConfigError, "clear policy " + s);
  return *c;
}

// One row of a training workload: loss, overflow ratio and clear policy vary.
Row sync_row(const std::string& scenario, const json& cfg, std::uint64_t seed, bool oracle,
             const std::string& variant, const std::string& workload, double loss, const SyncSpec& s,
             nf::ClearPolicy clear, Report& rep) {
  Row row;
  row.scenario = scenario;
  row.variant = oracle ? (variant.empty() ? "oracle" : "oracle-" + variant) : variant;
  row.workload = workload;
  row.seed = seed;
  row.loss = oracle ? 0 : loss;
  row.tolerance = sync_tolerance(s);
  Values vals;
  if (oracle) {
    vals = sync_oracle(seed, s);
    row.calls = static_cast<std::uint64_t>(s.clients * s.rounds);
    rep.rows.push_back(row);
    rep.values[row_id(row)] = std::move(vals);
    return row;
  }
  World w(net::single_switch(s.clients + 1, edge(cfg)), seed);
  w.net.set_loss_all(loss);
  std::vector<int> clients;
  for (int c = 0; c < s.clients; ++c) clients.push_back(w.host(h(c)));
  rpc::ServiceOptions o;
  o.server = w.host(h(s.clients));
  o.clients = clients;
  o.w_max = cfg.value("w_max", 256u);
  o.clear_override = clear;
  w.rt.register_service(training_def(cfg, s.clients), o);
  auto res = run_sync(w, "Training", clients, seed, s, &vals);
  row.calls = static_cast<std::uint64_t>(s.clients * s.rounds);
  row.app_bytes = res.bytes;
  fill_common(row, w, {"Training"}, res.lat, res.end_ns);
  row.cells = w.rt.data_cells("Training");
  row.extra["violations"] = static_cast<double>(res.disagreements);
  row.extra["reserved_cells"] = w.rt.reserved_cells("Training");
  if (!res.complete) mark_livelock(row);
  rep.rows.push_back(row);
  rep.values[row_id(row)] = std::move(vals);
  return row;
}

SyncSpec sync_spec(const json& cfg, double ovf = 0) {
  SyncSpec s;
  s.clients = cfg.value("clients", 2);
  s.elements = cfg.value("elements", std::size_t{1000});
  s.rounds = cfg.value("rounds", 1);
  s.ovf = ovf;
  return s;
}

Report run_syncagtr(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  const auto s = sync_spec(cfg);
  const auto clear = clear_from(cfg.value("clear", "copy"));
  const std::string wl = "sync-" + std::to_string(s.elements) + "x" + std::to_string(s.rounds);
  if (oracle) {
    sync_row(name, cfg, seed, true, "", wl, 0, s, clear, rep);
    return rep;
  }
  for (double loss : cfg["losses"]) {
    sync_row(name, cfg, seed, false, "loss=" + fmt(loss), wl, loss, s, clear, rep);
  }
  if (name == "loss-sweep" && !rep.rows.empty()) {
    const double base = rep.rows.front().goodput_bps;
    for (auto& r : rep.rows) r.extra["normalized_goodput"] = base > 0 ? r.goodput_bps / base : 0;
  }
  return rep;
}

Report run_overflow(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  const auto clear = clear_from(cfg.value("clear", "copy"));
  for (double ratio : cfg["ratios"]) {
    const auto s = sync_spec(cfg, ratio);
    const std::string v = "overflow=" + fmt(ratio);
    sync_row(name, cfg, seed, oracle, v, v, 0, s, clear, rep);
  }
  return rep;
}

Report run_clear_compare(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  const auto s = sync_spec(cfg);
  const std::string wl = "sync-" + std::to_string(s.elements) + "x" + std::to_string(s.rounds);
  if (oracle) {
    sync_row(name, cfg, seed, true, "", wl, 0, s, nf::ClearPolicy::kCopy, rep);
    return rep;
  }
  for (const std::string p : cfg["policies"]) {
    sync_row(name, cfg, seed, false, p, wl, 0, s, clear_from(p), rep);
  }
  return rep;
}

// ---- word count -----------------------------------------------------------

struct WordSpec {
  std::uint32_t keys = 10000;
  double zipf = 1.0;
  int clients = 3;
  int calls = 60;
  int words = 512;
};

StrIntMap word_batch(std::uint64_t seed, int client, int call, const WordSpec& s, Zipf& z) {
  auto rng = rng_for({seed, static_cast<std::uint64_t>(client), static_cast<std::uint64_t>(call), 2});
  StrIntMap m;
  for (int i = 0; i < s.words; ++i) m["w" + std::to_string(z(rng))] += 1;
  return m;
}

Values word_oracle(std::uint64_t seed, const WordSpec& s) {
  Zipf z(s.keys, s.zipf);
  Values v;
  for (int c = 0; c < s.clients; ++c) {
    for (int k = 0; k < s.calls; ++k) {
      for (const auto& [w, n] : word_batch(seed, c, k, s, z)) v[w] += static_cast<double>(n);
    }
  }
  return v;
}

WordSpec word_spec(const json& cfg) {
  WordSpec s;
  s.keys = cfg.value("keys", 10000u);
  s.zipf = cfg.value("zipf", 1.0);
  s.clients = cfg.value("clients", 3);
  s.calls = cfg.value("calls", 60);
  s.words = cfg.value("words", 512);
  return s;
}

std::uint64_t map_bytes(const StrIntMap& m) {
  std::uint64_t b = 0;
  for (const auto& [k, v] : m) b += 4 + k.size();
  return b;
}

Row word_row(const std::string& scenario, const json& cfg, std::uint64_t seed,
             const std::string& variant, double loss, server::CachePolicy policy,
             std::uint32_t cache_cells, Report& rep) {
  const auto s = word_spec(cfg);
  Row row;
  row.scenario = scenario;
  row.variant = variant;
  row.workload = "words-" + std::to_string(s.keys);
  row.seed = seed;
  row.loss = loss;
  World w(net::single_switch(s.clients + 1, edge(cfg)), seed);
  w.net.set_loss_all(loss);
  rpc::ServiceOptions o;
  o.server = w.host(h(s.clients));
  for (int c = 0; c < s.clients; ++c) o.clients.push_back(w.host(h(c)));
  o.policy = policy;
  o.cache_cells = cache_cells;
  o.pon_threshold = cfg.value("pon_threshold", 5u);
  o.cache_window_ns = static_cast<net::Time>(cfg.value("window_ms", 2.0) * net::kMs);
  w.rt.register_service(load_service(cfg, "mapreduce"), o);

  Zipf z(s.keys, s.zipf);
  Lat lat;
  int remaining = s.clients * s.calls;
  std::int64_t end = 0;
  for (int c = 0; c < s.clients; ++c) {
    closed_loop(
        w, o.clients[c], "MapReduce", "ReduceByKey",
        [&, c](int k) -> std::optional<Message> {
          if (k >= s.calls) return std::nullopt;
          Message m;
          m.type = "ReduceRequest";
          auto batch = word_batch(seed, c, k, s, z);
          row.app_bytes += map_bytes(batch);
          m.fields["kvs"] = std::move(batch);
          return m;
        },
        [&](int, const CallResult& r) {
          --remaining;
          if (!r.ok) return;
          lat.add(r);
          end = std::max<std::int64_t>(end, r.end);
        },
        cfg.value("parallel", 4));
  }
  w.sim.run_while_not([&] { return remaining == 0; }, 120 * net::kSec);
  row.calls = static_cast<std::uint64_t>(s.clients * s.calls);
  fill_common(row, w, {"MapReduce"}, lat, end);
  if (remaining != 0) mark_livelock(row);

  Values vals;
  if (remaining == 0) {
    Message q;
    q.type = "QueryRequest";
    q.fields["msg"] = Opaque{"all"};
    const auto r = w.rt.call_sync(o.clients[0], "MapReduce", "Query", q, 30 * net::kSec);
    if (r.ok) {
      for (const auto& [k, v] : std::get<StrIntMap>(r.reply.fields.at("kvs"))) {
        vals[k] = static_cast<double>(v);
      }
    } else {
      mark_livelock(row);
    }
  }
  rep.rows.push_back(row);
  rep.values[row_id(row)] = std::move(vals);
  return row;
}

server::CachePolicy policy_from(const std::string& s) {
  if (s == "periodic-lru") return server::CachePolicy::kLru;
  auto p = server::cache_policy_from(s);
  if (!p) throw Error(Errc::kConfigError, "cache policy " + s);
  return *p;
}

Report run_wordcount(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  const auto s = word_spec(cfg);
  if (oracle) {
    Row row;
    row.scenario = name;
    row.variant = "oracle";
    row.workload = "words-" + std::to_string(s.keys);
    row.seed = seed;
    row.calls = static_cast<std::uint64_t>(s.clients * s.calls);
    rep.rows.push_back(row);
    rep.values[row_id(row)] = word_oracle(seed, s);
    return rep;
  }
  if (name == "cache-compare") {
    const auto cells = static_cast<std::uint32_t>(std::lround(cfg.value("cache_fraction", 0.1) * s.keys));
    for (const std::string p : cfg["policies"]) word_row(name, cfg, seed, p, 0, policy_from(p), cells, rep);
    std::vector<double> chr, gp;
    for (const auto& r : rep.rows) {
      chr.push_back(r.chr);
      gp.push_back(r.goodput_bps);
    }
    const double rho = spearman(chr, gp);
    for (auto& r : rep.rows) r.extra["spearman_chr_goodput"] = rho;
    return rep;
  }
  const auto policy = policy_from(cfg.value("policy", "lru"));
  for (double loss : cfg["losses"]) {
    word_row(name, cfg, seed, "loss=" + fmt(loss), loss, policy, cfg.value("cache_cells", 4096u), rep);
  }
  return rep;
}

// ---- key-value monitoring -------------------------------------------------

struct MonSpec {
  std::uint32_t flows = 5000;
  double zipf = 1.0;
  int clients = 2;
  int calls = 40;
  int keys = 256;
};

StrIntMap mon_batch(std::uint64_t seed, int client, int call, const MonSpec& s, Zipf& z) {
  auto rng = rng_for({seed, static_cast<std::uint64_t>(client), static_cast<std::uint64_t>(call), 3});
  StrIntMap m;
  for (int i = 0; i < s.keys; ++i) {
    m["f" + std::to_string(z(rng))] += 64 + static_cast<std::int64_t>(rng() % 1437);
  }
  return m;
}

MonSpec mon_spec(const json& cfg) {
  MonSpec s;
  s.flows = cfg.value("flows", 5000u);
  s.zipf = cfg.value("zipf", 1.0);
  s.clients = cfg.value("clients", 2);
  s.calls = cfg.value("calls", 40);
  s.keys = cfg.value("keys_per_call", 256);
  return s;
}

Report run_monitor(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  const auto s = mon_spec(cfg);
  const std::string wl = "flows-" + std::to_string(s.flows);
  if (oracle) {
    Zipf z(s.flows, s.zipf);
    Values v;
    for (int c = 0; c < s.clients; ++c) {
      for (int k = 0; k < s.calls; ++k) {
        for (const auto& [f, n] : mon_batch(seed, c, k, s, z)) v[f] += static_cast<double>(n);
      }
    }
    Row row;
    row.scenario = name;
    row.variant = "oracle";
    row.workload = wl;
    row.seed = seed;
    rep.rows.push_back(row);
    rep.values[row_id(row)] = std::move(v);
    return rep;
  }
  for (double loss : cfg["losses"]) {
    Row row;
    row.scenario = name;
    row.variant = "loss=" + fmt(loss);
    row.workload = wl;
    row.seed = seed;
    row.loss = loss;
    World w(net::single_switch(s.clients + 1, edge(cfg)), seed);
    w.net.set_loss_all(loss);
    rpc::ServiceOptions o;
    o.server = w.host(h(s.clients));
    for (int c = 0; c < s.clients; ++c) o.clients.push_back(w.host(h(c)));
    o.cache_cells = cfg.value("cache_cells", 4096u);
    o.policy = server::CachePolicy::kFcfs;
    w.rt.register_service(load_service(cfg, "monitor"), o);
    w.rt.serve("Monitor", "MonitorCall", [](const Message& req) {
      Message rep;
      rep.type = "MonitorReply";
      if (auto* p = req.field("payload")) rep.fields["payload"] = *p;
      return rep;
    });
    Zipf z(s.flows, s.zipf);
    Lat lat;
    int remaining = s.clients * s.calls;
    std::int64_t end = 0;
    std::set<std::string> seen;
    for (int c = 0; c < s.clients; ++c) {
      closed_loop(
          w, o.clients[c], "Monitor", "MonitorCall",
          [&, c](int k) -> std::optional<Message> {
            if (k >= s.calls) return std::nullopt;
            Message m;
            m.type = "MonitorRequest";
            auto batch = mon_batch(seed, c, k, s, z);
            for (const auto& [f, n] : batch) seen.insert(f);
            row.app_bytes += map_bytes(batch) + 5;
            m.fields["kvs"] = std::move(batch);
            m.fields["payload"] = Opaque{"Hello"};
            return m;
          },
          [&](int, const CallResult& r) {
            --remaining;
            if (!r.ok) return;
            lat.add(r);
            end = std::max<std::int64_t>(end, r.end);
          },
          cfg.value("parallel", 2));
    }
    w.sim.run_while_not([&] { return remaining == 0; }, 120 * net::kSec);
    row.calls = static_cast<std::uint64_t>(s.clients * s.calls);
    fill_common(row, w, {"Monitor"}, lat, end);
    if (remaining != 0) mark_livelock(row);

    Values vals;
    // Totals for every flow through the INC lookup.
    Message q;
    q.type = "QueryRequest";
    StrIntMap keys;
    for (const auto& f : seen) keys[f] = 0;
    q.fields["kvs"] = keys;
    auto r = w.rt.call_sync(o.clients[0], "Monitor", "Query", q, 30 * net::kSec);
    if (r.ok) {
      for (const auto& [k, v] : std::get<StrIntMap>(r.reply.fields.at("kvs"))) vals[k] = static_cast<double>(v);
    } else {
      mark_livelock(row);
    }

    // Hits turn around at the switch; compare with a server round trip.
    const auto* amap = w.rt.address_map("Monitor");
    std::vector<std::string> cached;
    for (const auto& f : seen) {
      if (amap->lookup(client::key_hash(f), f).status == server::AddressMap::Status::kCached) {
        cached.push_back(f);
      }
    }
    Lat hit, rtt;
    const int per = cfg.value("keys_per_query", 16);
    if (!cached.empty()) {
      for (int i = 0; i < cfg.value("hit_queries", 200); ++i) {
        Message hq;
        hq.type = "QueryRequest";
        StrIntMap hk;
        for (int j = 0; j < per; ++j) hk[cached[(static_cast<std::size_t>(i) * per + j) % cached.size()]] = 0;
        hq.fields["kvs"] = hk;
        auto x = w.rt.call_sync(o.clients[i % s.clients], "Monitor", "Query", hq, net::kSec);
        if (x.ok) hit.add(x);
      }
    }
    for (int i = 0; i < cfg.value("rtt_probes", 200); ++i) {
      Message p;
      p.type = "MonitorRequest";
      p.fields["payload"] = Opaque{"ping"};
      auto x = w.rt.call_sync(o.clients[i % s.clients], "Monitor", "MonitorCall", p, net::kSec);
      if (x.ok) rtt.add(x);
    }
    row.extra["cached_flows"] = static_cast<double>(cached.size());
    row.extra["hit_lat_us"] = mean(hit.us);
    row.extra["rtt_us"] = mean(rtt.us);
    row.extra["hit_rtt_ratio"] = mean(rtt.us) > 0 ? mean(hit.us) / mean(rtt.us) : 0;
    rep.rows.push_back(row);
    rep.values[row_id(row)] = std::move(vals);
  }
  return rep;
}

// ---- voting ---------------------------------------------------------------

std::int64_t proposal(std::uint64_t seed, std::uint64_t ballot) {
  auto rng = rng_for({seed, ballot, 4});
  return static_cast<std::int64_t>(rng() % 1000000);
}

std::string ballot_key(std::uint64_t b) { return "b" + std::to_string(b); }

Report run_vote(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  const int voters = cfg.value("voters", 4);
  const int ballots = cfg.value("ballots", 1000);
  const std::string wl = "ballots-" + std::to_string(ballots);
  if (oracle) {
    Row row;
    row.scenario = name;
    row.variant = "oracle";
    row.workload = wl;
    row.seed = seed;
    row.decisions = static_cast<std::uint64_t>(ballots);
    Values v;
    for (int b = 0; b < ballots; ++b) v[ballot_key(b)] = static_cast<double>(proposal(seed, b));
    rep.rows.push_back(row);
    rep.values[row_id(row)] = std::move(v);
    return rep;
  }
  const auto trial = vote_trial(seed, cfg.value("switch_ballots", 1000u), voters, 3);
  for (double loss : cfg["losses"]) {
    Row row;
    row.scenario = name;
    row.variant = "loss=" + fmt(loss);
    row.workload = wl;
    row.seed = seed;
    row.loss = loss;
    World w(net::single_switch(voters + 1, edge(cfg)), seed);
    w.net.set_loss_all(loss);
    rpc::ServiceOptions o;
    o.server = w.host(h(voters));
    for (int c = 0; c < voters; ++c) o.clients.push_back(w.host(h(c)));
    w.rt.register_service(load_service(cfg, "voting"), o);
    Lat lat;
    int remaining = voters * ballots;
    std::int64_t end = 0;
    std::map<int, std::string> decided;
    std::uint64_t disagree = 0;
    for (int c = 0; c < voters; ++c) {
      closed_loop(
          w, o.clients[c], "Voting", "Vote",
          [&](int k) -> std::optional<Message> {
            if (k >= ballots) return std::nullopt;
            Message m;
            m.type = "VoteRequest";
            m.fields["ballots"] = IntIntMap{{k, proposal(seed, k)}};
            row.app_bytes += 16;
            return m;
          },
          [&](int k, const CallResult& r) {
            --remaining;
            if (!r.ok) return;
            lat.add(r);
            end = std::max<std::int64_t>(end, r.end);
            const auto& d = std::get<Opaque>(r.reply.fields.at("decision")).data;
            auto [it, fresh] = decided.emplace(k, d);
            if (!fresh && it->second != d) ++disagree;
          },
          cfg.value("parallel", 16));
    }
    w.sim.run_while_not([&] { return remaining == 0; }, 120 * net::kSec);
    row.calls = static_cast<std::uint64_t>(voters * ballots);
    fill_common(row, w, {"Voting"}, lat, end);
    if (remaining != 0) mark_livelock(row);
    Values vals;
    for (const auto& [k, d] : decided) vals[ballot_key(k)] = std::stod(d);
    row.extra["violations"] += static_cast<double>(disagree);
    row.extra["fresh_forwards"] = static_cast<double>(w.rt.fresh_cntfwd_forwards());
    row.extra["switch_ballots"] = static_cast<double>(trial.keys);
    row.extra["switch_ballots_bad"] = static_cast<double>(trial.bad);
    rep.rows.push_back(row);
    rep.values[row_id(row)] = std::move(vals);
  }
  return rep;
}

// ---- lock -----------------------------------------------------------------

Report run_lock(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  const int races = cfg.value("races", 1000);
  const int n = cfg.value("contenders", 4);
  Row row;
  row.scenario = name;
  row.workload = "races-" + std::to_string(races);
  row.seed = seed;
  if (oracle) {
    row.variant = "oracle";
    Values v;
    for (int i = 0; i < races; ++i) v["race" + std::to_string(i)] = 1;
    rep.rows.push_back(row);
    rep.values[row_id(row)] = std::move(v);
    return rep;
  }
  row.variant = "contenders=" + std::to_string(n);
  World w(net::single_switch(n + 1, edge(cfg)), seed);
  rpc::ServiceOptions o;
  o.server = w.host(h(n));
  for (int c = 0; c < n; ++c) o.clients.push_back(w.host(h(c)));
  o.cache_cells = static_cast<std::uint32_t>(races) + 64;
  w.rt.register_service(load_service(cfg, "lock"), o);
  auto rng = rng_for({seed, 5});
  const auto spacing = static_cast<net::Time>(cfg.value("spacing_us", 200.0) * net::kUs);
  const auto hold = static_cast<net::Time>(cfg.value("hold_us", 20.0) * net::kUs);
  std::vector<int> holders(races, 0), max_holders(races, 0), grants(races, 0);
  Lat lat;
  int remaining = races * n;
  std::int64_t end = 0;
  for (int i = 0; i < races; ++i) {
    const std::string key = "L" + std::to_string(i);
    for (int c = 0; c < n; ++c) {
      const net::Time t = spacing * i + static_cast<net::Time>(rng() % 1000);
      w.sim.at(t, [&, i, c, key] {
        Message m;
        m.type = "LockRequest";
        m.fields["kvs"] = StrIntMap{{key, 1}};
        row.app_bytes += 4 + key.size();
        w.rt.call(o.clients[c], "Lock", "GetLock", m, [&, i, c, key](const CallResult& r) {
          if (!r.ok) return;
          lat.add(r);
          ++grants[i];
          max_holders[i] = std::max(max_holders[i], ++holders[i]);
          w.sim.after(hold, [&, i, c, key] {
            --holders[i];
            Message rel;
            rel.type = "ReleaseRequest";
            rel.fields["kvs"] = StrIntMap{{key, 1}};
            w.rt.call(o.clients[c], "Lock", "Release", rel, [&](const CallResult& x) {
              if (x.ok) --remaining;
              end = std::max<std::int64_t>(end, x.end);
            });
          });
        });
      });
    }
  }
  w.sim.run_while_not([&] { return remaining == 0; }, 600 * net::kSec);
  row.calls = static_cast<std::uint64_t>(races * n);
  fill_common(row, w, {"Lock"}, lat, end);
  if (remaining != 0) mark_livelock(row);
  Values vals;
  std::uint64_t multi = 0, starved = 0;
  for (int i = 0; i < races; ++i) {
    vals["race" + std::to_string(i)] = max_holders[i];
    if (max_holders[i] > 1) ++multi;
    if (grants[i] != n) ++starved;
  }
  const auto trial = lock_race_trial(seed, cfg.value("switch_races", 1000u), n);
  row.extra["violations"] += static_cast<double>(multi);
  row.extra["starved_races"] = static_cast<double>(starved);
  row.extra["switch_races"] = static_cast<double>(trial.keys);
  row.extra["switch_races_bad"] = static_cast<double>(trial.bad);
  rep.rows.push_back(row);
  rep.values[row_id(row)] = std::move(vals);
  return rep;
}

// ---- concurrency ----------------------------------------------------------

// Two training apps share the dumbbell core; the second joins later.
Row run_cc(const json& cfg, std::uint64_t seed, bool cc_on) {
  Row row;
  row.scenario = "concurrency-mix";
  row.variant = cc_on ? "cc-on" : "cc-off";
  row.workload = "mix";
  row.seed = seed;
  net::LinkSpec e;
  e.gbps = cfg.value("edge_gbps", 10.0);
  e.delay_us = cfg.value("delay_us", 2.0);
  net::LinkSpec core = e;
  core.gbps = cfg.value("core_gbps", 1.0);
  core.queue_pkts = cfg.value("core_queue", 64u);
  World w(net::dumbbell(4, 4, e, core), seed);
  w.rt.switch_state().ecn_hold_ns = static_cast<std::int64_t>(cfg.value("ecn_hold_us", 5.0) * net::kUs);
  const auto elements = cfg.value("cc_elements", std::size_t{2048});
  const auto join = static_cast<net::Time>(cfg.value("cc_join_ms", 20.0) * net::kMs);
  const auto stop = join + static_cast<net::Time>(cfg.value("cc_run_ms", 300.0) * net::kMs);
  const auto bucket = static_cast<net::Time>(cfg.value("cc_bucket_ms", 10.0) * net::kMs);
  const std::vector<std::string> names = {"Training-A", "Training-B"};
  std::vector<std::vector<double>> bytes(2, std::vector<double>(static_cast<std::size_t>(stop / bucket) + 1, 0));
  Lat lat;
  for (int a = 0; a < 2; ++a) {
    rpc::ServiceOptions o;
    o.name = names[a];
    o.server = w.host(h(4 + a));
    o.clients = {w.host(h(2 * a)), w.host(h(2 * a + 1))};
    o.cc.enabled = cc_on;
    w.rt.register_service(training_def(cfg, 2), o);
    SyncSpec s;
    s.elements = elements;
    for (int c = 0; c < 2; ++c) {
      const int client = o.clients[c];
      w.sim.at(a == 0 ? 0 : join, [&, a, c, client, s] {
        closed_loop(
            w, client, names[a], "Update",
            [&, a, c, s](int k) -> std::optional<Message> {
              if (w.sim.now() >= stop) return std::nullopt;
              Message m;
              m.type = "NewGrad";
              m.fields["tensor"] = grad(seed + static_cast<std::uint64_t>(a), k, c, s);
              return m;
            },
            [&, a, elements](int, const CallResult& r) {
              if (!r.ok) return;
              lat.add(r);
              const auto b = static_cast<std::size_t>(r.end / bucket);
              if (b < bytes[a].size()) bytes[a][b] += 4.0 * static_cast<double>(elements);
              row.app_bytes += 4 * elements;
            });
      });
    }
  }
  w.sim.run_until(stop);
  fill_common(row, w, names, lat, stop);
  // Fairness per bucket once both apps run.
  const auto first = static_cast<std::size_t>(join / bucket);
  const auto last = static_cast<std::size_t>(stop / bucket);
  std::vector<double> jains;
  for (std::size_t b = first; b < last; ++b) jains.push_back(jain_index({bytes[0][b], bytes[1][b]}));
  std::size_t conv = jains.size();
  for (std::size_t k = jains.size(); k-- > 0;) {
    if (jains[k] < 0.9) break;
    conv = k;
  }
  row.jain = jains.empty() ? 0 : mean(std::vector<double>(jains.begin() + static_cast<long>(jains.size() / 2), jains.end()));
  row.extra["conv_ms"] = conv == jains.size() ? -1 : static_cast<double>((first + conv + 1) * bucket - join) / net::kMs;
  return row;
}

struct MixOut {
  std::map<char, double> bytes;  // by type, completed within the window
  std::map<char, Lat> lat;
};

// Four app types on one twelve-host switch; instances of a type share
// their hosts. count[t] instances of type t.
MixOut run_mix(const json& cfg, std::uint64_t seed, const std::map<char, int>& count, Row& row) {
  net::LinkSpec e;
  e.gbps = cfg.value("edge_gbps", 10.0);
  e.delay_us = cfg.value("delay_us", 2.0);
  World w(net::single_switch(12, e), seed);
  w.rt.switch_state().ecn_hold_ns = static_cast<std::int64_t>(cfg.value("ecn_hold_us", 5.0) * net::kUs);
  const auto warm = static_cast<net::Time>(cfg.value("mix_warmup_ms", 2.0) * net::kMs);
  const auto stop = static_cast<net::Time>(cfg.value("mix_run_ms", 20.0) * net::kMs);
  const auto think = static_cast<net::Time>(cfg.value("small_think_us", 50.0) * net::kUs);
  MixOut out;
  std::vector<std::string> names;
  auto in_window = [&](const CallResult& r) { return r.end >= warm && r.end < stop; };
  auto hosts = [&](std::initializer_list<int> ids) {
    std::vector<int> v;
    for (int i : ids) v.push_back(w.host(h(i)));
    return v;
  };

  for (int k = 0; k < count.at('S'); ++k) {
    rpc::ServiceOptions o;
    o.name = "Training#" + std::to_string(k);
    o.server = w.host(h(2));
    o.clients = hosts({0, 1});
    w.rt.register_service(training_def(cfg, 2), o);
    names.push_back(o.name);
    SyncSpec s;
    s.elements = cfg.value("mix_elements", std::size_t{2048});
    for (int c = 0; c < 2; ++c) {
      closed_loop(
          w, o.clients[c], o.name, "Update",
          [&, c, k, s](int i) -> std::optional<Message> {
            if (w.sim.now() >= stop) return std::nullopt;
            Message m;
            m.type = "NewGrad";
            m.fields["tensor"] = grad(seed + static_cast<std::uint64_t>(k), i, c, s);
            return m;
          },
          [&, s](int, const CallResult& r) {
            if (r.ok && in_window(r)) out.bytes['S'] += 4.0 * static_cast<double>(s.elements);
          },
          cfg.value("mix_parallel", 2));
    }
  }
  for (int k = 0; k < count.at('A'); ++k) {
    rpc::ServiceOptions o;
    o.name = "MapReduce#" + std::to_string(k);
    o.server = w.host(h(5));
    o.clients = hosts({3, 4});
    w.rt.register_service(load_service(cfg, "mapreduce"), o);
    names.push_back(o.name);
    WordSpec s;
    s.keys = cfg.value("mix_keys", 10000u);
    s.words = cfg.value("mix_words", 256);
    auto z = std::make_shared<Zipf>(s.keys, s.zipf);
    for (int c = 0; c < 2; ++c) {
      auto sizes = std::make_shared<std::map<int, double>>();
      closed_loop(
          w, o.clients[c], o.name, "ReduceByKey",
          [&, c, k, s, z, sizes](int i) -> std::optional<Message> {
            if (w.sim.now() >= stop) return std::nullopt;
            Message m;
            m.type = "ReduceRequest";
            auto batch = word_batch(seed + static_cast<std::uint64_t>(k), c, i, s, *z);
            (*sizes)[i] = static_cast<double>(map_bytes(batch));
            m.fields["kvs"] = std::move(batch);
            return m;
          },
          [&, sizes](int i, const CallResult& r) {
            if (r.ok && in_window(r)) out.bytes['A'] += (*sizes)[i];
            sizes->erase(i);
          },
          4);
    }
  }
  for (int k = 0; k < count.at('K'); ++k) {
    rpc::ServiceOptions o;
    o.name = "Monitor#" + std::to_string(k);
    o.server = w.host(h(7));
    o.clients = hosts({6});
    w.rt.register_service(load_service(cfg, "monitor"), o);
    names.push_back(o.name);
    auto l = std::make_shared<std::function<void(int)>>();
    *l = [&, k, o, l](int i) {
      if (w.sim.now() >= stop) return;
      Message m;
      m.type = "MonitorRequest";
      m.fields["kvs"] = StrIntMap{{"f" + std::to_string(k) + "-" + std::to_string(i % 64), 1}};
      w.rt.call(o.clients[0], o.name, "MonitorCall", m, [&, i, l](const CallResult& r) {
        if (r.ok && in_window(r)) out.lat['K'].add(r);
        w.sim.after(think, [l, i] { (*l)(i + 1); });
      });
    };
    (*l)(0);
  }
  for (int k = 0; k < count.at('V'); ++k) {
    rpc::ServiceOptions o;
    o.name = "Voting#" + std::to_string(k);
    o.server = w.host(h(11));
    o.clients = hosts({8, 9, 10});
    w.rt.register_service(load_service(cfg, "voting"), o);
    names.push_back(o.name);
    for (int c = 0; c < 3; ++c) {
      auto l = std::make_shared<std::function<void(int)>>();
      *l = [&, c, o, l](int b) {
        if (w.sim.now() >= stop) return;
        Message m;
        m.type = "VoteRequest";
        m.fields["ballots"] = IntIntMap{{b, b}};
        w.rt.call(o.clients[c], o.name, "Vote", m, [&, b, l](const CallResult& r) {
          if (r.ok && in_window(r)) out.lat['V'].add(r);
          w.sim.after(think, [l, b] { (*l)(b + 1); });
        });
      };
      (*l)(0);
    }
  }
  w.sim.run_until(stop);
  Lat all;
  for (const auto& [t, l] : out.lat) all.us.insert(all.us.end(), l.us.begin(), l.us.end());
  for (const auto& [t, b] : out.bytes) row.app_bytes += static_cast<std::uint64_t>(b);
  fill_common(row, w, names, all, stop - warm);
  return out;
}

// "S2A1K0V3": instance counts per type.
bool parse_mix(const std::string& v, std::map<char, int>& count) {
  std::size_t i = 0;
  std::map<char, int> c{{'S', 0}, {'A', 0}, {'K', 0}, {'V', 0}};
  while (i < v.size()) {
    const char t = v[i++];
    if (!c.count(t) || i >= v.size() || !std::isdigit(static_cast<unsigned char>(v[i]))) return false;
    int n = 0;
    while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) n = n * 10 + (v[i++] - '0');
    c[t] = n;
  }
  count = c;
  return !v.empty();
}

Report run_concurrency(const std::string& name, const json& cfg, std::uint64_t seed, bool oracle) {
  Report rep;
  if (oracle) {
    Row row;
    row.scenario = name;
    row.variant = "oracle";
    row.workload = "mix";
    row.seed = seed;
    rep.rows.push_back(row);
    return rep;
  }
  const double window_s =
      (cfg.value("mix_run_ms", 20.0) - cfg.value("mix_warmup_ms", 2.0)) / 1000.0;
  for (const std::string v : cfg["variants"]) {
    if (v == "cc-on" || v == "cc-off") {
      rep.rows.push_back(run_cc(cfg, seed, v == "cc-on"));
      continue;
    }
    std::map<char, int> count{{'S', 0}, {'A', 0}, {'K', 0}, {'V', 0}};
    if (v == "solo-kv") {
      count['K'] = 1;
    } else if (v == "solo-vote") {
      count['V'] = 1;
    } else if (v == "mix-4") {
      count = {{'S', 1}, {'A', 1}, {'K', 1}, {'V', 1}};
    } else if (v == "mix-20") {
      count = {{'S', 5}, {'A', 5}, {'K', 5}, {'V', 5}};
    } else if (!parse_mix(v, count)) {
      throw Error(Errc::kConfigError, "concurrency-mix variant " + v);
    }
    Row row;
    row.scenario = name;
    row.variant = v;
    row.workload = "mix";
    row.seed = seed;
    const auto out = run_mix(cfg, seed, count, row);
    for (const auto& [t, b] : out.bytes) row.extra[std::string("goodput_") + t] = b * 8 / window_s;
    for (const auto& [t, l] : out.lat) row.extra[std::string("lat_") + t + "_us"] = mean(l.us);
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace

const std::vector<std::string>& scenarios() {
  static const std::vector<std::string> names = {
      "syncagtr",       "asyncagtr-wordcount", "keyvalue-monitor", "agreement-vote", "lock",
      "concurrency-mix", "cache-compare",      "loss-sweep",       "overflow-sweep", "clear-compare",
  };
  return names;
}

nlohmann::json scenario_config(const std::string& name, const nlohmann::json& config) {
  auto it = defaults().find(name);
  if (it == defaults().end()) throw Error(Errc::kUnknownScenario, name);
  json merged = it->second;
  if (config.is_null()) return merged;
  if (!config.is_object()) throw Error(Errc::kConfigError, "config must be an object");
  for (const auto& [k, v] : config.items()) {
    if (k == "services" || k == "scenario") {
      merged[k] = v;
      continue;
    }
    if (!merged.contains(k)) throw Error(Errc::kConfigError, name + ": unknown key " + k);
    merged[k] = v;
  }
  return merged;
}

Report run_scenario(const std::string& name, const nlohmann::json& config, std::uint64_t seed,
                    bool oracle) {
  const json cfg = scenario_config(name, config);
  try {
    if (name == "syncagtr" || name == "loss-sweep") return run_syncagtr(name, cfg, seed, oracle);
    if (name == "overflow-sweep") return run_overflow(name, cfg, seed, oracle);
    if (name == "clear-compare") return run_clear_compare(name, cfg, seed, oracle);
    if (name == "asyncagtr-wordcount" || name == "cache-compare") {
      return run_wordcount(name, cfg, seed, oracle);
    }
    if (name == "keyvalue-monitor") return run_monitor(name, cfg, seed, oracle);
    if (name == "agreement-vote") return run_vote(name, cfg, seed, oracle);
    if (name == "lock") return run_lock(name, cfg, seed, oracle);
    if (name == "concurrency-mix") return run_concurrency(name, cfg, seed, oracle);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, name + ": " + e.what());
  }
  throw Error(Errc::kUnknownScenario, name);
}

}  // namespace incnet::harness
