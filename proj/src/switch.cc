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

#include "incnet/switch.hpp"

#include <algorithm>
#include <limits>

namespace incnet::sw {
namespace {

using wire::Packet;

constexpr std::int32_t kMax = std::numeric_limits<std::int32_t>::max();
constexpr std::int32_t kMin = std::numeric_limits<std::int32_t>::min();

// Records the cells one pass touches; a second touch of the same cell is a
// violation of the once-per-trip register access rule.
class TouchLog {
 public:
  explicit TouchLog(SwitchStats& stats) : stats_(stats) {}
  void touch(std::uint32_t cell) {
    for (int i = 0; i < n_; ++i) {
      if (cells_[i] == cell) {
        ++stats_.touch_violations;
        return;
      }
    }
    if (n_ < static_cast<int>(cells_.size())) cells_[n_++] = cell;
  }

 private:
  SwitchStats& stats_;
  std::array<std::uint32_t, wire::kSlots + 2> cells_{};
  int n_ = 0;
};

bool valid_slot_key(const AppEntry& app, int slot, std::uint32_t key) {
  if (key >= kCellsPerSegment || !app.owns_row(key)) return false;
  return !(app.ecn_cell && *app.ecn_cell == flat(slot, key));
}

std::uint32_t now_stamp(std::int64_t now_ns) {
  return static_cast<std::uint32_t>(now_ns / 1000) | 1u;
}

}  // namespace

SwitchState::SwitchState() : registers(kTotalCells, 0) {}

std::optional<std::uint16_t> allocate_srrt(SwitchState& st, std::uint32_t w_max,
                                           bool server_stream) {
  if (st.retrans_bitmaps.size() >= st.max_srrt_slots || w_max == 0) return std::nullopt;
  for (std::uint32_t s = 0; s < st.max_srrt_slots && s <= 0xFFFF; ++s) {
    const auto id = static_cast<std::uint16_t>(s);
    if (!st.retrans_bitmaps.contains(id)) {
      st.retrans_bitmaps[id] = {w_max, std::vector<std::uint8_t>(w_max, 1), server_stream};
      return id;
    }
  }
  return std::nullopt;
}

void release_srrt(SwitchState& st, std::uint16_t srrt) { st.retrans_bitmaps.erase(srrt); }

Admission admit(const Packet& p, SwitchState& st, std::int64_t now_ns) {
  auto it = st.admission.find(p.gaid);
  if (it == st.admission.end() || !it->second.registered) return Admission::kForwardPlain;
  it->second.last_seen_ns = now_ns;
  return Admission::kIncProcess;
}

std::optional<Freshness> check_retransmission(const Packet& p, SwitchState& st) {
  auto it = st.retrans_bitmaps.find(p.srrt);
  if (it == st.retrans_bitmaps.end()) return std::nullopt;
  auto& bm = it->second;
  std::uint8_t& bit = bm.bits[p.seq % bm.w_max];
  const std::uint8_t flip = p.flip ? 1 : 0;
  if ((bit & kFlipMask) == flip) return Freshness::kDuplicate;
  bit = flip;
  return Freshness::kFresh;
}

std::int32_t sat_add(std::int32_t a, std::int64_t b, bool* overflow) {
  const std::int64_t s = static_cast<std::int64_t>(a) + b;
  if (s > kMax) {
    *overflow = true;
    return kMax;
  }
  if (s < kMin) {
    *overflow = true;
    return kMin;
  }
  return static_cast<std::int32_t>(s);
}

bool exec_stream_modify(nf::ModifyOp op, std::int32_t para,
                        std::array<wire::Slot, wire::kSlots>& slots, std::uint32_t bitmap) {
  using nf::ModifyOp;
  bool of = false;
  const unsigned sh = static_cast<unsigned>(para) & 31u;
  for (int i = 0; i < wire::kSlots; ++i) {
    if (!((bitmap >> i) & 1u)) continue;
    std::int32_t& v = slots[i].value;
    const auto u = static_cast<std::uint32_t>(v);
    switch (op) {
      case ModifyOp::kNop: break;
      case ModifyOp::kMax: v = std::max(v, para); break;
      case ModifyOp::kMin: v = std::min(v, para); break;
      case ModifyOp::kAdd: v = sat_add(v, para, &of); break;
      case ModifyOp::kAssign: v = para; break;
      case ModifyOp::kShiftL: v = static_cast<std::int32_t>(u << sh); break;
      case ModifyOp::kShiftR: v = v >> sh; break;
      case ModifyOp::kBand: v = v & para; break;
      case ModifyOp::kBor: v = v | para; break;
      case ModifyOp::kBnot: v = ~v; break;
      case ModifyOp::kBxor: v = v ^ para; break;
    }
  }
  return of;
}

static bool is_poison(std::int32_t v) { return v == kMax || v == kMin; }

MapResult exec_map_ops(Packet& p, SwitchState& st, Direction dir, const AppEntry& app,
                       Freshness fresh) {
  MapResult res;
  const auto& cfg = app.cfg;
  const bool to_server = dir == Direction::kToServer;
  const bool add = to_server && cfg.to_server.add_to && fresh == Freshness::kFresh;
  const bool get = to_server ? cfg.to_server.get : cfg.from_server.get;
  const bool clear = !to_server && cfg.from_server.clear && p.has(wire::kIsClr) &&
                     fresh == Freshness::kFresh;
  if (!add && !get && !clear) return res;

  for (int i = 0; i < wire::kSlots; ++i) {
    if (p.enabled(i) && !valid_slot_key(app, i, p.slots[i].key)) {
      ++st.stats.misaddressed;
      res.misaddressed = true;
      return res;
    }
  }

  const bool epoch = cfg.clear_mode != nf::ClearPolicy::kNop;
  std::array<std::int32_t, wire::kSlots> sums{};
  if (add) {
    for (int i = 0; i < wire::kSlots; ++i) {
      if (!p.enabled(i)) continue;
      const std::int32_t reg = st.cell(i, p.slots[i].key);
      bool of = false;
      sums[i] = is_poison(reg) && epoch ? reg : sat_add(reg, p.slots[i].value, &of);
      if (of || (epoch && is_poison(sums[i]))) res.overflow = true;
    }
    if (res.overflow) {
      ++st.stats.overflows;
      p.set(wire::kIsOf);
      // Without a clear policy the register is the only copy of the
      // accumulator, so the whole packet is left for the server.
      if (!epoch) return res;
    }
  }

  TouchLog log(st.stats);
  for (int i = 0; i < wire::kSlots; ++i) {
    if (!p.enabled(i)) continue;
    wire::Slot& s = p.slots[i];
    log.touch(flat(i, s.key));
    std::int32_t& reg = st.cell(i, s.key);
    if (add) reg = sums[i];
    if (get) s.value = reg;
    if (clear) reg = 0;
  }
  return res;
}

CntFwdDecision exec_cntfwd(const Packet& p, SwitchState& st, Freshness fresh) {
  if (p.counter_index >= kTotalCells) return CntFwdDecision::kForward;
  std::int32_t& cnt = st.registers[p.counter_index];
  if (fresh == Freshness::kFresh && cnt < kMax) ++cnt;
  return static_cast<std::uint32_t>(cnt) == p.counter_threshold ? CntFwdDecision::kForward
                                                                  : CntFwdDecision::kDrop;
}

ProcessResult process_packet(Packet p, SwitchState& st, int src_node, std::int64_t now_ns,
                             std::uint32_t ingress_qlen) {
  ProcessResult r;
  if (admit(p, st, now_ns) == Admission::kForwardPlain) {
    ++st.stats.plain_packets;
    r.kind = ProcessResult::kForwardPlain;
    return r;
  }
  AppEntry& app = st.admission.at(p.gaid);
  const auto& cfg = app.cfg;
  ++st.stats.inc_packets;

  const bool congested = ingress_qlen > st.ecn_threshold;
  if (congested) {
    p.set(wire::kEcn);
    ++st.stats.ecn_marks;
  }

  if (p.has(wire::kIsSA)) {
    // Clearing replies run on the server's own sequence stream; a resent
    // one that already passed here must not read or clear again.
    Freshness f = Freshness::kFresh;
    if (auto bm = st.retrans_bitmaps.find(p.srrt);
        p.has(wire::kIsClr) && bm != st.retrans_bitmaps.end() && bm->second.server_stream) {
      f = check_retransmission(p, st).value_or(Freshness::kFresh);
    }
    r.fresh = f == Freshness::kFresh;
    if (!p.has(wire::kIsCross) && r.fresh) {
      exec_map_ops(p, st, Direction::kFromServer, app, f);
    }
    r.kind = ProcessResult::kEmit;
    if (p.has(wire::kIsMcast)) {
      for (int n : app.group_nodes) r.out.push_back({n, p});
    } else {
      r.out.push_back({kNoNode, std::move(p)});
    }
    return r;
  }

  auto bm = st.retrans_bitmaps.find(p.srrt);
  if (bm == st.retrans_bitmaps.end()) {
    ++st.stats.plain_packets;
    r.kind = ProcessResult::kForwardPlain;
    return r;
  }
  // The bitmap cell is read here and written once, after the map stage,
  // together with the outcome of this packet.
  std::uint8_t& bit = bm->second.bits[p.seq % bm->second.w_max];
  const std::uint8_t flip = p.flip ? 1 : 0;
  const Freshness fresh =
      (bit & kFlipMask) == flip ? Freshness::kDuplicate : Freshness::kFresh;
  r.fresh = fresh == Freshness::kFresh;
  if (!r.fresh) ++st.stats.duplicates;

  auto to_server = [&](Packet&& q) {
    r.kind = ProcessResult::kEmit;
    r.out.push_back({app.server_node, std::move(q)});
    return r;
  };

  if (p.has(wire::kIsOf) || p.has(wire::kIsCross)) {
    bit = static_cast<std::uint8_t>(flip | kDelegatedMask);
    return to_server(std::move(p));
  }
  if (!r.fresh && (bit & kDelegatedMask)) {
    p.set(wire::kIsOf);
    return to_server(std::move(p));
  }

  if (app.ecn_cell) {
    std::int32_t& ecn = st.registers[*app.ecn_cell];
    if (congested) {
      ecn = static_cast<std::int32_t>(now_stamp(now_ns));
    } else if (ecn != 0) {
      const std::uint32_t age = now_stamp(now_ns) - static_cast<std::uint32_t>(ecn);
      if (static_cast<std::int64_t>(age) * 1000 < st.ecn_hold_ns) {
        p.set(wire::kEcn);
      } else {
        ecn = 0;
      }
    }
  }

  const auto original = p.slots;
  bool modify_of = false;
  if (cfg.to_server.modify) {
    modify_of = exec_stream_modify(cfg.modify_op, cfg.modify_para, p.slots, p.bitmap);
    if (modify_of) {
      p.set(wire::kIsOf);
      ++st.stats.overflows;
    }
  }
  const bool epoch = cfg.clear_mode != nf::ClearPolicy::kNop;
  if (modify_of && !epoch && r.fresh) {
    p.slots = original;
    bit = static_cast<std::uint8_t>(flip | kDelegatedMask);
    return to_server(std::move(p));
  }

  bool forward = true;
  if (p.has(wire::kIsCnf) && cfg.cntfwd_enabled) {
    forward = exec_cntfwd(p, st, fresh) == CntFwdDecision::kForward;
  }

  const MapResult mr = exec_map_ops(p, st, Direction::kToServer, app, fresh);
  if (mr.misaddressed || (mr.overflow && !epoch)) {
    p.slots = original;
    p.set(mr.misaddressed ? wire::kIsCross : wire::kIsOf);
    bit = static_cast<std::uint8_t>(flip | kDelegatedMask);
    return to_server(std::move(p));
  }
  bit = flip;

  if (!forward) {
    ++st.stats.cntfwd_drops;
    r.kind = ProcessResult::kDrop;
    return r;
  }
  if (p.has(wire::kIsCnf) && cfg.cntfwd_enabled) ++st.stats.cntfwd_forwards;

  r.kind = ProcessResult::kEmit;
  if (cfg.via_server || cfg.target == nf::Target::kServer) return to_server(std::move(p));

  if (cfg.to_server.clear && r.fresh) {
    // Shadow policy: a second pass clears the partner copy that the next
    // epoch will accumulate into.
    r.recirculated = true;
    ++st.stats.recirculations;
    TouchLog log(st.stats);
    for (int i = 0; i < wire::kSlots; ++i) {
      if (!p.enabled(i)) continue;
      const std::uint32_t key = p.slots[i].key;
      const std::uint32_t partner =
          key < app.base_row + app.shadow_stride ? key + app.shadow_stride : key - app.shadow_stride;
      if (!valid_slot_key(app, i, partner)) continue;
      log.touch(flat(i, partner));
      st.cell(i, partner) = 0;
    }
  }

  switch (cfg.target) {
    case nf::Target::kSrc:
      r.out.push_back({src_node, std::move(p)});
      break;
    case nf::Target::kAll:
      p.set(wire::kIsMcast);
      for (int n : app.group_nodes) r.out.push_back({n, p});
      break;
    case nf::Target::kList:
      for (int n : app.list_nodes) r.out.push_back({n, p});
      break;
    case nf::Target::kServer:
      r.out.push_back({app.server_node, std::move(p)});
      break;
  }
  return r;
}

}  // namespace incnet::sw
