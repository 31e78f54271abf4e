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

#include "incnet/client_agent.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "incnet/errors.hpp"
#include "incnet/server_agent.hpp"

namespace incnet::client {
namespace {

constexpr std::int32_t kMax = std::numeric_limits<std::int32_t>::max();
constexpr std::int32_t kMin = std::numeric_limits<std::int32_t>::min();

std::uint32_t rotl32(std::uint32_t x, int r) { return (x << r) | (x >> (32 - r)); }

std::int32_t saturate(std::int64_t v) {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, kMin, kMax));
}

bool fits32(std::int64_t v) { return v > kMin && v < kMax; }

}  // namespace

Quantizer::Quantizer(int p) : precision(p), scale(std::pow(10.0, p)) {}

std::int64_t quantize_wide(double x, const Quantizer& q) {
  return static_cast<std::int64_t>(std::llround(x * q.scale));
}

std::optional<std::int32_t> quantize(double x, const Quantizer& q) {
  const double scaled = x * q.scale;
  if (!std::isfinite(scaled) || std::fabs(scaled) > 4.0e18) return std::nullopt;
  const std::int64_t v = std::llround(scaled);
  if (v > kMax || v < kMin) return std::nullopt;
  return static_cast<std::int32_t>(v);
}

double dequantize(std::int64_t v, const Quantizer& q) {
  return static_cast<double>(v) / q.scale;
}

std::uint32_t key_hash(std::string_view key, std::uint32_t seed) {
  const auto* data = reinterpret_cast<const std::uint8_t*>(key.data());
  const std::size_t len = key.size();
  const std::size_t nblocks = len / 4;
  std::uint32_t h = seed;
  constexpr std::uint32_t c1 = 0xcc9e2d51u;
  constexpr std::uint32_t c2 = 0x1b873593u;
  for (std::size_t i = 0; i < nblocks; ++i) {
    std::uint32_t k = static_cast<std::uint32_t>(data[4 * i]) |
                      static_cast<std::uint32_t>(data[4 * i + 1]) << 8 |
                      static_cast<std::uint32_t>(data[4 * i + 2]) << 16 |
                      static_cast<std::uint32_t>(data[4 * i + 3]) << 24;
    k *= c1;
    k = rotl32(k, 15);
    k *= c2;
    h ^= k;
    h = rotl32(h, 13);
    h = h * 5 + 0xe6546b64u;
  }
  const std::uint8_t* tail = data + nblocks * 4;
  std::uint32_t k1 = 0;
  switch (len & 3) {
    case 3: k1 ^= static_cast<std::uint32_t>(tail[2]) << 16; [[fallthrough]];
    case 2: k1 ^= static_cast<std::uint32_t>(tail[1]) << 8; [[fallthrough]];
    case 1:
      k1 ^= tail[0];
      k1 *= c1;
      k1 = rotl32(k1, 15);
      k1 *= c2;
      h ^= k1;
  }
  h ^= static_cast<std::uint32_t>(len);
  h ^= h >> 16;
  h *= 0x85ebca6bu;
  h ^= h >> 13;
  h *= 0xc2b2ae35u;
  h ^= h >> 16;
  return h;
}

FlowState::FlowState(std::optional<std::uint16_t> srrt, std::uint32_t w_max, CcParams cc)
    : srrt_(srrt),
      w_max_(w_max),
      cc_(cc),
      cw_(cc.enabled ? std::clamp<std::uint32_t>(cc.initial_cw, 1, w_max) : w_max),
      index_seq_(w_max, -1),
      rto_(std::max(cc.initial_rto_ns, cc.rto_floor_ns)) {}

bool FlowState::can_send() const {
  if (unacked_.size() >= cw_) return false;
  const std::int64_t prev = index_seq_[next_seq_ % w_max_];
  return prev < 0 || !unacked_.contains(static_cast<std::uint32_t>(prev));
}

std::uint32_t FlowState::stamp(wire::Packet& p, std::int64_t now_ns) {
  const std::uint32_t seq = next_seq_++;
  p.seq = seq;
  p.flip = flip_for(seq, w_max_);
  p.srrt = srrt_.value_or(0);
  index_seq_[seq % w_max_] = seq;
  unacked_[seq] = now_ns;
  return seq;
}

void FlowState::resent(std::uint32_t seq, std::int64_t now_ns) {
  if (unacked_.contains(seq)) retransmitted_[seq] = true;
  (void)now_ns;
}

bool FlowState::on_ack(std::uint32_t seq, std::int64_t now_ns, bool ecn) {
  auto it = unacked_.find(seq);
  if (it == unacked_.end()) return false;
  // Karn: only samples from packets sent once update the RTT estimate.
  if (!retransmitted_.erase(seq)) {
    const double sample = static_cast<double>(now_ns - it->second);
    srtt_ns_ = srtt_ns_ < 0 ? sample : 0.875 * srtt_ns_ + 0.125 * sample;
    rto_ = std::max<std::int64_t>(cc_.rto_floor_ns, static_cast<std::int64_t>(2 * srtt_ns_));
  }
  unacked_.erase(it);
  if (!cc_.enabled) return true;

  if (ecn) on_ecn(seq);
  if (seq >= round_end_) {
    if (!round_ecn_) cw_ = std::min(cw_ + 1, w_max_);
    round_ecn_ = false;
    round_end_ = next_seq_;
  }
  return true;
}

void FlowState::on_ecn(std::uint32_t seq) {
  if (!cc_.enabled) return;
  round_ecn_ = true;
  if (decreased_once_ && seq < decrease_guard_) return;
  cw_ = std::max<std::uint32_t>(1, cw_ / 2);
  decreased_once_ = true;
  decrease_guard_ = next_seq_;
}

std::vector<FlowState> establish_connections(sw::SwitchState* st, int n, std::uint32_t w_max,
                                             CcParams cc) {
  std::vector<FlowState> flows;
  for (int i = 0; i < n; ++i) {
    std::optional<std::uint16_t> s;
    if (st) s = sw::allocate_srrt(*st, w_max);
    flows.emplace_back(s, w_max, cc);
  }
  return flows;
}

std::uint32_t chunk_counter_cell(const StreamParams& sp, std::uint32_t chunk) {
  const std::uint32_t pos = chunk % sp.counter_ring;
  return sw::flat(static_cast<int>(pos % sw::kSegments), sp.counter_base_row + pos / sw::kSegments);
}

std::uint32_t chunk_threshold(const StreamParams& sp, std::uint32_t per_use, std::uint32_t chunk) {
  return per_use * (chunk / sp.counter_ring + 1);
}

namespace {

const IEDTValue& bound_field(const Message& msg, const std::string& path) {
  const auto dot = path.find('.');
  const std::string field = dot == std::string::npos ? path : path.substr(dot + 1);
  const IEDTValue* v = msg.field(field);
  if (!v || std::holds_alternative<Opaque>(*v)) {
    throw Error(Errc::kUnboundField, "message " + msg.type + " has no IEDT field " + field);
  }
  return *v;
}

StreamPacket new_packet(const StreamParams& sp) {
  StreamPacket sp_out;
  sp_out.pkt.gaid = sp.gaid;
  sp_out.item.assign(wire::kSlots, -1);
  sp_out.meta.kind = Meta::kData;
  sp_out.meta.client = sp.client;
  sp_out.meta.method = sp.method;
  sp_out.meta.tag = sp.tag;
  return sp_out;
}

void pack_array(Stream& s, const std::vector<std::int64_t>& vals, const std::vector<bool>& of,
                const nf::NetFilter& nf, const StreamParams& sp) {
  const bool cnt = nf.cntfwd.enabled() && sp.inc;
  const std::size_t chunks = (vals.size() + wire::kSlots - 1) / wire::kSlots;
  for (std::size_t c = 0; c < chunks; ++c) {
    StreamPacket out = new_packet(sp);
    const std::uint32_t g = sp.first_chunk + static_cast<std::uint32_t>(c);
    out.chunk = g;
    out.meta.tag = g;
    const std::uint32_t pos = sp.ring_rows ? g % sp.ring_rows : 0;
    bool any_of = false;
    std::vector<std::int64_t> wide;
    for (int i = 0; i < wire::kSlots; ++i) {
      const std::size_t idx = c * wire::kSlots + static_cast<std::size_t>(i);
      if (idx >= vals.size()) break;
      out.pkt.enable(i);
      out.item[i] = static_cast<int>(idx);
      out.pkt.slots[i].value = saturate(vals[idx]);
      wide.push_back(vals[idx]);
      if (of[idx]) any_of = true;
      out.pkt.slots[i].key = cnt ? sp.ring_base_row + pos : sp.ring_base_row + pos + i;
    }
    if (!sp.inc) {
      out.pkt.set(wire::kIsCross);
      out.meta.wide = std::move(wide);
    } else if (cnt) {
      out.pkt.set(wire::kIsCnf);
      out.pkt.counter_index = chunk_counter_cell(sp, g);
      out.pkt.counter_threshold = chunk_threshold(sp, nf.cntfwd.threshold, g);
      if (any_of) out.meta.wide = std::move(wide);
    } else {
      out.pkt.counter_index = sp.ring_base_row + pos;
      out.elide = true;
      if (any_of) {
        // The accumulator cannot take this chunk; send it to the server.
        out.pkt.set(wire::kIsOf);
        out.pkt.set(wire::kIsCross);
        out.meta.wide = std::move(wide);
        out.elide = false;
      }
    }
    s.packets.push_back(std::move(out));
    s.cached_items += sp.inc ? static_cast<std::uint64_t>(std::popcount(s.packets.back().pkt.bitmap)) : 0;
  }
}

void pack_map(Stream& s, const std::vector<std::pair<std::string, std::int64_t>>& kv,
              const server::AddressMap* amap, const StreamParams& sp) {
  std::vector<StreamPacket> cached;
  std::vector<StreamPacket> cross;
  auto cross_packet = [&]() -> StreamPacket& {
    if (cross.empty() || std::popcount(cross.back().pkt.bitmap) == wire::kSlots) {
      cross.push_back(new_packet(sp));
      cross.back().pkt.set(wire::kIsCross);
    }
    return cross.back();
  };
  for (std::size_t idx = 0; idx < kv.size(); ++idx) {
    const auto& [name, value] = kv[idx];
    s.items.push_back({name, value});
    const std::uint32_t laddr = key_hash(name);
    server::AddressMap::Lookup look;
    if (amap && sp.inc) look = amap->lookup(laddr, name);
    using St = server::AddressMap::Status;
    if (look.status == St::kCollided) {
      StreamPacket& p = cross_packet();
      p.meta.extra.emplace_back(name, value);
      p.extra_item.push_back(static_cast<int>(idx));
      continue;
    }
    if (look.status == St::kCached && fits32(value)) {
      const int seg = look.cell.segment;
      auto it = std::find_if(cached.begin(), cached.end(),
                             [&](const StreamPacket& p) { return !p.pkt.enabled(seg); });
      if (it == cached.end()) {
        cached.push_back(new_packet(sp));
        it = cached.end() - 1;
      }
      it->pkt.enable(seg);
      it->pkt.slots[seg] = {look.cell.row, static_cast<std::int32_t>(value)};
      it->item[seg] = static_cast<int>(idx);
      ++s.cached_items;
      continue;
    }
    StreamPacket& p = cross_packet();
    const int slot = std::popcount(p.pkt.bitmap);
    p.pkt.enable(slot);
    p.pkt.slots[slot] = {laddr, saturate(value)};
    p.item[slot] = static_cast<int>(idx);
    if (p.meta.names.size() < static_cast<std::size_t>(slot)) p.meta.names.resize(slot);
    p.meta.names.push_back(name);
    if (!fits32(value)) p.pkt.set(wire::kIsOf);
  }
  // Exact values ride along whenever a slot had to be saturated.
  for (auto& p : cross) {
    if (!p.pkt.has(wire::kIsOf)) continue;
    for (int i = 0; i < wire::kSlots && p.item[i] >= 0; ++i) {
      p.meta.wide.push_back(s.items[static_cast<std::size_t>(p.item[i])].value);
    }
  }
  for (auto& p : cached) s.packets.push_back(std::move(p));
  for (auto& p : cross) s.packets.push_back(std::move(p));
}

}  // namespace

Stream build_stream(const Message& msg, const nf::NetFilter& nf, const server::AddressMap* amap,
                    const StreamParams& sp) {
  const std::string& path = !nf.add_to.empty() ? nf.add_to : nf.get;
  if (path.empty()) throw Error(Errc::kUnboundField, "filter binds no map field");
  const IEDTValue& v = bound_field(msg, path);
  const bool values = !nf.add_to.empty();
  Stream s;
  const Quantizer q(nf.precision);
  if (const auto* fp = std::get_if<FPArray>(&v)) {
    std::vector<std::int64_t> vals;
    std::vector<bool> of;
    for (std::size_t i = 0; i < fp->size(); ++i) {
      const auto x = quantize((*fp)[i], q);
      vals.push_back(x ? *x : quantize_wide((*fp)[i], q));
      of.push_back(!x);
      s.items.push_back({std::to_string(i), vals.back()});
    }
    pack_array(s, vals, of, nf, sp);
  } else if (const auto* ia = std::get_if<IntArray>(&v)) {
    std::vector<bool> of;
    for (std::size_t i = 0; i < ia->size(); ++i) {
      of.push_back(!fits32((*ia)[i]));
      s.items.push_back({std::to_string(i), (*ia)[i]});
    }
    pack_array(s, *ia, of, nf, sp);
  } else if (const auto* sm = std::get_if<StrIntMap>(&v)) {
    std::vector<std::pair<std::string, std::int64_t>> kv;
    for (const auto& [k, x] : *sm) kv.emplace_back(k, values ? x : 0);
    pack_map(s, kv, amap, sp);
  } else if (const auto* im = std::get_if<IntIntMap>(&v)) {
    std::vector<std::pair<std::string, std::int64_t>> kv;
    for (const auto& [k, x] : *im) kv.emplace_back(std::to_string(k), values ? x : 0);
    pack_map(s, kv, amap, sp);
  }
  for (auto& p : s.packets) {
    p.pkt.payload = encode_meta(p.meta);
  }
  return s;
}

}  // namespace incnet::client
