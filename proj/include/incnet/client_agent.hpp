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

// Sender-side building blocks: fixed-point quantization, key hashing,
// packetization of IEDT fields and the per-flow window with AIMD control.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "incnet/iedt.hpp"
#include "incnet/netfilter.hpp"
#include "incnet/switch.hpp"
#include "incnet/wire.hpp"

namespace incnet::server {
class AddressMap;
}

namespace incnet::client {

struct Quantizer {
  int precision = 0;
  double scale = 1.0;
  explicit Quantizer(int p = 0);
};

// Round half away from zero. nullopt when the result does not fit in a
// signed 32-bit integer.
std::optional<std::int32_t> quantize(double x, const Quantizer& q);
// Same, without the 32-bit range check (used for the software path).
std::int64_t quantize_wide(double x, const Quantizer& q);
double dequantize(std::int64_t v, const Quantizer& q);

inline bool flip_for(std::uint32_t seq, std::uint32_t w_max) {
  return ((seq / w_max) % 2) != 0;
}

// MurmurHash3 x86_32 with a fixed seed; maps key names to the 32-bit
// logical address space.
inline constexpr std::uint32_t kKeySeed = 0x5bd1e995u;
std::uint32_t key_hash(std::string_view key, std::uint32_t seed = kKeySeed);

struct CcParams {
  bool enabled = true;         // AIMD on ECN; off keeps cw at w_max
  std::uint32_t initial_cw = 16;
  std::int64_t rto_floor_ns = 4'000'000;
  std::int64_t initial_rto_ns = 4'000'000;
};

class FlowState {
 public:
  FlowState(std::optional<std::uint16_t> srrt, std::uint32_t w_max, CcParams cc);

  std::optional<std::uint16_t> srrt() const { return srrt_; }
  bool inc() const { return srrt_.has_value(); }
  std::uint32_t w_max() const { return w_max_; }
  std::uint32_t cw() const { return cw_; }
  std::uint32_t next_seq() const { return next_seq_; }
  std::int64_t rto() const { return rto_; }
  std::size_t in_flight() const { return unacked_.size(); }
  const std::map<std::uint32_t, std::int64_t>& unacked() const { return unacked_; }

  // A new seq may be sent when the window has room and the previous
  // occupant of its bitmap index has been acked.
  bool can_send() const;
  // Assigns seq/flip/srrt on p and records it in flight.
  std::uint32_t stamp(wire::Packet& p, std::int64_t now_ns);
  // Records a retransmission time for an in-flight seq.
  void resent(std::uint32_t seq, std::int64_t now_ns);

  // Returns false when seq was not in flight.
  bool on_ack(std::uint32_t seq, std::int64_t now_ns, bool ecn);
  void on_ecn(std::uint32_t seq);
  void set_cw(std::uint32_t cw) { cw_ = cw; }

 private:
  std::optional<std::uint16_t> srrt_;
  std::uint32_t w_max_;
  CcParams cc_;
  std::uint32_t cw_;
  std::uint32_t next_seq_ = 0;
  std::map<std::uint32_t, std::int64_t> unacked_;   // seq -> first send time
  std::map<std::uint32_t, bool> retransmitted_;
  std::vector<std::int64_t> index_seq_;  // seq occupying each bitmap index
  double srtt_ns_ = -1;
  std::int64_t rto_;
  // Per-RTT bookkeeping: a round ends when a seq >= round_end_ is acked.
  std::uint32_t round_end_ = 0;
  bool round_ecn_ = false;
  std::uint32_t decrease_guard_ = 0;
  bool decreased_once_ = false;
};

// Allocates n retransmission slots; slots the switch cannot provide are
// returned as no-INC flows.
std::vector<FlowState> establish_connections(sw::SwitchState* st, int n, std::uint32_t w_max,
                                             CcParams cc = {});

struct StreamParams {
  std::uint32_t gaid = 0;
  std::uint16_t client = 0;
  std::uint8_t method = 0;
  std::uint32_t tag = 0;
  // Arrays: chunk c of the message uses ring position
  // (first_chunk + c) mod ring_rows starting at ring_base_row.
  std::uint32_t ring_base_row = 0;
  std::uint32_t ring_rows = 0;
  std::uint32_t first_chunk = 0;
  // Per-chunk counters when CntFwd is enabled.
  std::uint32_t counter_base_row = 0;
  std::uint32_t counter_ring = 0;
  std::uint32_t clients = 0;  // cumulative threshold step
  bool inc = true;            // false: everything goes to the server
};

struct StreamPacket {
  wire::Packet pkt;
  Meta meta;
  bool elide = false;
  std::uint32_t chunk = 0;       // global chunk index for arrays
  std::vector<int> item;         // per slot: index into the stream's items, -1 unused
  std::vector<int> extra_item;   // item indexes carried in meta.extra
};

struct StreamItem {
  std::string name;       // map key, or decimal element index for arrays
  std::int64_t value = 0;
};

struct Stream {
  std::vector<StreamItem> items;
  std::vector<StreamPacket> packets;
  std::uint64_t cached_items = 0;  // items addressed to switch memory
};

// Packs the field bound by nf (addTo, else get) into packets. Throws
// Error{kUnboundField} when the message lacks the bound field or it is not
// an IEDT.
Stream build_stream(const Message& msg, const nf::NetFilter& nf,
                    const server::AddressMap* amap, const StreamParams& sp);

// Flat register index of a per-chunk counter.
std::uint32_t chunk_counter_cell(const StreamParams& sp, std::uint32_t chunk);
std::uint32_t chunk_threshold(const StreamParams& sp, std::uint32_t per_use,
                              std::uint32_t chunk);

}  // namespace incnet::client
