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

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>

#include "incnet/client_agent.hpp"
#include "incnet/harness.hpp"
#include "incnet/switch.hpp"

namespace incnet::harness {

namespace {

constexpr std::uint32_t kGaid = 7;
constexpr std::uint32_t kBaseRow = 100;
constexpr std::uint32_t kRows = 64;
constexpr int kServer = 90;

sw::AppEntry entry(const nf::NetFilter& f, std::vector<int> group) {
  sw::AppEntry e;
  e.base_row = kBaseRow;
  e.reserved_rows = kRows;
  e.cfg = nf::pipeline_config(f);
  e.server_node = kServer;
  e.group_nodes = std::move(group);
  return e;
}

void clear_rows(sw::SwitchState& st) {
  for (int s = 0; s < sw::kSegments; ++s) {
    for (std::uint32_t r = kBaseRow; r < kBaseRow + kRows; ++r) st.cell(s, r) = 0;
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct TraceFlow {
  std::uint16_t srrt = 0;
  int node = 0;
  std::uint32_t total = 0;
  std::uint32_t next = 0;
  std::vector<char> acked;
  std::vector<char> sent;
  std::vector<wire::Packet> pkts;
  std::deque<wire::Packet> to_switch;
  std::deque<std::uint32_t> replies;
  std::uint32_t unacked = 0;
};

}  // namespace

TrialResult idempotence_trial(std::uint64_t seed, std::uint32_t w_max, std::uint64_t traces,
                              double max_loss) {
  TrialResult res;
  std::mt19937_64 rng(seed);
  sw::SwitchState st;
  nf::NetFilter f;
  f.add_to = "Req.kvs";
  st.admission[kGaid] = entry(f, {});

  for (std::uint64_t t = 0; t < traces; ++t) {
    clear_rows(st);
    const double loss = uniform(rng, 0, max_loss);
    const double dup = uniform(rng, 0, 0.5);
    const int nflows = 1 + static_cast<int>(rng() % 3);
    std::vector<TraceFlow> flows(nflows);
    // Expected registers: every packet applied exactly once.
    std::unordered_map<std::uint32_t, std::int64_t> want;
    for (int i = 0; i < nflows; ++i) {
      auto& fl = flows[i];
      fl.srrt = *sw::allocate_srrt(st, w_max);
      fl.node = i + 1;
      fl.total = w_max / 2 + static_cast<std::uint32_t>(rng() % (2 * w_max)) + 4;
      fl.acked.assign(fl.total, 0);
      fl.sent.assign(fl.total, 0);
      fl.unacked = fl.total;
      for (std::uint32_t s = 0; s < fl.total; ++s) {
        wire::Packet p;
        p.gaid = kGaid;
        p.srrt = fl.srrt;
        p.seq = s;
        p.flip = client::flip_for(s, w_max);
        const int n = 1 + static_cast<int>(rng() % wire::kSlots);
        for (int k = 0; k < n; ++k) {
          const int slot = static_cast<int>(rng() % wire::kSlots);
          p.enable(slot);
          p.slots[slot].key = kBaseRow + static_cast<std::uint32_t>(rng() % kRows);
          p.slots[slot].value = static_cast<std::int32_t>(rng() % 2001) - 1000;
        }
        for (int k = 0; k < wire::kSlots; ++k) {
          if (p.enabled(k)) want[sw::flat(k, p.slots[k].key)] += p.slots[k].value;
        }
        fl.pkts.push_back(p);
      }
    }

    auto push = [&](TraceFlow& fl, const wire::Packet& p) {
      if (uniform(rng, 0, 1) < loss) return;
      fl.to_switch.push_back(p);
      if (uniform(rng, 0, 1) < dup) fl.to_switch.push_back(p);
    };
    std::uint64_t guard = 0;
    auto remaining = [&] {
      return std::any_of(flows.begin(), flows.end(), [](const TraceFlow& x) { return x.unacked > 0; });
    };
    while (remaining() && ++guard < 50'000'000) {
      auto& fl = flows[rng() % flows.size()];
      if (fl.unacked == 0) continue;
      // Weighted: new 3, retransmit 1, switch 3, reply 3.
      const auto roll = rng() % 10;
      const int action = roll < 3 ? 0 : roll < 4 ? 1 : roll < 7 ? 2 : 3;
      switch (action) {
        case 0: {  // new seq, when its bitmap index is free
          const std::uint32_t s = fl.next;
          if (s >= fl.total || (s >= w_max && !fl.acked[s - w_max])) break;
          fl.sent[s] = 1;
          ++fl.next;
          ++res.packets;
          push(fl, fl.pkts[s]);
          break;
        }
        case 1: {  // retransmit the oldest unacked seq, like a timer would
          if (fl.to_switch.size() >= w_max) break;
          for (std::uint32_t s = 0; s < fl.next; ++s) {
            if (!fl.acked[s]) {
              ++res.packets;
              push(fl, fl.pkts[s]);
              break;
            }
          }
          break;
        }
        case 2: {  // switch takes the head of the channel
          if (fl.to_switch.empty()) break;
          wire::Packet p = std::move(fl.to_switch.front());
          fl.to_switch.pop_front();
          const auto r = sw::process_packet(p, st, fl.node, 0, 0);
          if (!r.fresh) ++res.duplicates;
          for (const auto& e : r.out) {
            if (uniform(rng, 0, 1) >= loss) fl.replies.push_back(e.pkt.seq);
          }
          break;
        }
        case 3: {  // a reply reaches the client
          if (fl.replies.empty()) break;
          const std::uint32_t s = fl.replies.front();
          fl.replies.pop_front();
          if (s < fl.total && !fl.acked[s]) {
            fl.acked[s] = 1;
            --fl.unacked;
          }
          break;
        }
      }
    }
    // Anything still queued toward the switch arrives too.
    for (auto& fl : flows) {
      while (!fl.to_switch.empty()) {
        sw::process_packet(fl.to_switch.front(), st, fl.node, 0, 0);
        fl.to_switch.pop_front();
      }
    }
    std::uint64_t bad = 0;
    for (int s = 0; s < sw::kSegments; ++s) {
      for (std::uint32_t r = kBaseRow; r < kBaseRow + kRows; ++r) {
        const auto it = want.find(sw::flat(s, r));
        const std::int64_t w = it == want.end() ? 0 : it->second;
        if (st.cell(s, r) != w) {
          if (bad++ == 0 && res.first_failure.empty()) {
            res.first_failure = "trace " + std::to_string(t) + " cell (" + std::to_string(s) + "," +
                                std::to_string(r) + "): " + std::to_string(st.cell(s, r)) +
                                " want " + std::to_string(w);
          }
        }
      }
    }
    if (remaining()) {
      ++bad;
      if (res.first_failure.empty()) res.first_failure = "trace " + std::to_string(t) + " stalled";
    }
    if (bad) ++res.mismatches;
    ++res.traces;
    for (auto& fl : flows) sw::release_srrt(st, fl.srrt);
  }
  return res;
}

namespace {

struct Copy {
  int who;
  wire::Packet pkt;
};

// Each contender's packet arrives one to three times, interleaved at random.
std::vector<Copy> with_duplicates(std::vector<Copy> pkts, std::mt19937_64& rng,
                                  std::uint64_t* dups) {
  std::vector<Copy> out;
  for (auto& c : pkts) {
    const int n = 1 + static_cast<int>(rng() % 3);
    *dups += static_cast<std::uint64_t>(n - 1);
    for (int k = 0; k < n; ++k) out.push_back(c);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

CntFwdTrial lock_race_trial(std::uint64_t seed, std::uint64_t races, int contenders) {
  CntFwdTrial res;
  std::mt19937_64 rng(seed);
  sw::SwitchState st;
  nf::NetFilter f;
  f.cntfwd.threshold = 1;
  f.cntfwd.to = nf::Target::kSrc;
  f.cntfwd.key_mode = nf::KeyMode::kField;
  f.cntfwd.key_path = "LockRequest.kvs";
  st.admission[kGaid] = entry(f, {});
  std::vector<std::uint16_t> srrt(contenders);
  std::vector<std::uint32_t> seq(contenders, 0);
  for (auto& s : srrt) s = *sw::allocate_srrt(st, 64);

  for (std::uint64_t race = 0; race < races; ++race) {
    const int seg = static_cast<int>(race % sw::kSegments);
    const std::uint32_t row = kBaseRow + static_cast<std::uint32_t>((race / sw::kSegments) % kRows);
    st.cell(seg, row) = 0;  // released by the previous holder
    std::vector<Copy> pkts;
    for (int c = 0; c < contenders; ++c) {
      wire::Packet p;
      p.gaid = kGaid;
      p.srrt = srrt[c];
      p.seq = seq[c]++;
      p.flip = client::flip_for(p.seq, 64);
      p.enable(seg);
      p.slots[seg] = {row, 0};
      p.set(wire::kIsCnf);
      p.counter_index = sw::flat(seg, row);
      p.counter_threshold = 1;
      pkts.push_back({c + 1, p});
    }
    std::set<int> winners;
    for (auto& c : with_duplicates(std::move(pkts), rng, &res.duplicates)) {
      const auto r = sw::process_packet(c.pkt, st, c.who, 0, 0);
      if (r.kind == sw::ProcessResult::kEmit) winners.insert(c.who);
    }
    ++res.keys;
    if (winners.size() != 1) ++res.bad;
  }
  return res;
}

CntFwdTrial vote_trial(std::uint64_t seed, std::uint64_t ballots, int voters, int quorum) {
  CntFwdTrial res;
  std::mt19937_64 rng(seed);
  sw::SwitchState st;
  nf::NetFilter f;
  f.cntfwd.threshold = static_cast<std::uint32_t>(quorum);
  f.cntfwd.to = nf::Target::kServer;
  f.cntfwd.key_mode = nf::KeyMode::kField;
  f.cntfwd.key_path = "VoteRequest.ballots";
  st.admission[kGaid] = entry(f, {});
  std::vector<std::uint16_t> srrt(voters);
  std::vector<std::uint32_t> seq(voters, 0);
  for (auto& s : srrt) s = *sw::allocate_srrt(st, 64);
  const std::uint32_t ring = kRows * sw::kSegments;

  for (std::uint64_t b = 0; b < ballots; ++b) {
    const std::uint32_t pos = static_cast<std::uint32_t>(b % ring);
    const std::uint32_t cell = sw::flat(static_cast<int>(pos % sw::kSegments), kBaseRow + pos / sw::kSegments);
    // Counters are never reset: each reuse of a cell raises the bar by
    // one full round of voters.
    const auto threshold = static_cast<std::uint32_t>(quorum) +
                           static_cast<std::uint32_t>(voters) * static_cast<std::uint32_t>(b / ring);
    std::vector<Copy> pkts;
    for (int v = 0; v < voters; ++v) {
      wire::Packet p;
      p.gaid = kGaid;
      p.srrt = srrt[v];
      p.seq = seq[v]++;
      p.flip = client::flip_for(p.seq, 64);
      p.enable(0);
      p.slots[0] = {static_cast<std::uint32_t>(b), static_cast<std::int32_t>(b % 1000)};
      p.set(wire::kIsCnf);
      p.counter_index = cell;
      p.counter_threshold = threshold;
      pkts.push_back({v + 1, p});
    }
    int fresh_forwards = 0;
    for (auto& c : with_duplicates(std::move(pkts), rng, &res.duplicates)) {
      const auto r = sw::process_packet(c.pkt, st, c.who, 0, 0);
      if (r.kind == sw::ProcessResult::kEmit && r.fresh) ++fresh_forwards;
    }
    ++res.keys;
    if (fresh_forwards != 1) ++res.bad;
  }
  return res;
}

}  // namespace incnet::harness
