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

// Behavioral model of one INC switch: admission, flip-bit retransmission
// filtering, the RIP pipeline over register memory, ECN marking and the
// forwarding decision.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "incnet/netfilter.hpp"
#include "incnet/wire.hpp"

namespace incnet::sw {

inline constexpr int kSegments = 32;
inline constexpr std::uint32_t kCellsPerSegment = 40960;
inline constexpr std::uint32_t kTotalCells = kSegments * kCellsPerSegment;
inline constexpr std::uint32_t kEcnLogicalKey = 0xFFFFFFFFu;
inline constexpr int kNoNode = -1;

// Each retransmission bitmap entry holds the flip bit and, in bit 1, whether
// the packet at that index was handed to the server instead of being applied.
inline constexpr std::uint8_t kFlipMask = 1;
inline constexpr std::uint8_t kDelegatedMask = 2;

// Flat cell index: segment * kCellsPerSegment + offset.
inline std::uint32_t flat(int segment, std::uint32_t offset) {
  return static_cast<std::uint32_t>(segment) * kCellsPerSegment + offset;
}

struct AppEntry {
  bool registered = true;
  std::uint32_t base_row = 0;     // first reserved offset in every segment
  std::uint32_t reserved_rows = 0;
  std::int64_t last_seen_ns = -1;
  nf::SwitchProgramConfig cfg;
  int server_node = kNoNode;
  std::vector<int> group_nodes;  // clients, target of ALL
  std::vector<int> list_nodes;   // explicit CntFwd endpoint list
  std::optional<std::uint32_t> ecn_cell;  // flat index
  std::uint32_t shadow_stride = 0;        // rows between the two shadow copies

  bool owns_row(std::uint32_t row) const {
    return row >= base_row && row < base_row + reserved_rows;
  }
};

enum class Admission { kIncProcess, kForwardPlain };
enum class Freshness { kFresh, kDuplicate };
enum class Direction { kToServer, kFromServer };

struct Emit {
  int node = kNoNode;  // kNoNode: continue toward the frame's destination
  wire::Packet pkt;
};

struct ProcessResult {
  enum Kind { kForwardPlain, kDrop, kEmit } kind = kForwardPlain;
  std::vector<Emit> out;
  bool fresh = false;
  bool recirculated = false;
};

struct SwitchStats {
  std::uint64_t inc_packets = 0;
  std::uint64_t plain_packets = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t cntfwd_drops = 0;
  std::uint64_t cntfwd_forwards = 0;
  std::uint64_t overflows = 0;
  std::uint64_t malformed = 0;
  std::uint64_t ecn_marks = 0;
  std::uint64_t recirculations = 0;
  std::uint64_t misaddressed = 0;
  std::uint64_t touch_violations = 0;
};

struct SwitchState {
  SwitchState();

  std::vector<std::int32_t> registers;  // kTotalCells
  struct Bitmap {
    std::uint32_t w_max = 0;
    std::vector<std::uint8_t> bits;
    bool server_stream = false;  // numbers the server's clearing replies
  };
  std::unordered_map<std::uint16_t, Bitmap> retrans_bitmaps;
  std::uint32_t max_srrt_slots = 1024;
  std::unordered_map<std::uint32_t, AppEntry> admission;
  std::uint32_t ecn_threshold = 32;
  // Packets of an app keep the mark this long after its ECN cell was set,
  // about one round trip in the default star.
  std::int64_t ecn_hold_ns = 5'000;
  SwitchStats stats;

  std::int32_t& cell(int segment, std::uint32_t offset) {
    return registers[flat(segment, offset)];
  }
  std::int32_t cell(int segment, std::uint32_t offset) const {
    return registers[flat(segment, offset)];
  }
};

// Connection setup: reserve a bitmap slot initialized to all ones.
std::optional<std::uint16_t> allocate_srrt(SwitchState& st, std::uint32_t w_max,
                                           bool server_stream = false);
void release_srrt(SwitchState& st, std::uint16_t srrt);

Admission admit(const wire::Packet& p, SwitchState& st, std::int64_t now_ns);

// nullopt when p.srrt names no allocated slot.
std::optional<Freshness> check_retransmission(const wire::Packet& p, SwitchState& st);

// Returns true when ADD saturated at least one enabled slot.
bool exec_stream_modify(nf::ModifyOp op, std::int32_t para,
                        std::array<wire::Slot, wire::kSlots>& slots, std::uint32_t bitmap);

// Saturating signed add. Sets *overflow when the exact sum is out of range.
std::int32_t sat_add(std::int32_t a, std::int64_t b, bool* overflow);

struct MapResult {
  bool overflow = false;
  bool misaddressed = false;  // nothing was executed
};

// Map primitives for one pass. A key outside the app's reservation aborts
// the pass. With a clear policy, saturated cells stay at MAX/MIN until
// cleared. Without one, an overflowing addTo writes nothing.
MapResult exec_map_ops(wire::Packet& p, SwitchState& st, Direction dir,
                       const AppEntry& app, Freshness fresh);

enum class CntFwdDecision { kForward, kDrop };
CntFwdDecision exec_cntfwd(const wire::Packet& p, SwitchState& st, Freshness fresh);

// Full pipeline. src_node is the ingress neighbor host the packet came
// from (used by SRC targets); ingress_qlen is the queue length the packet
// saw when it was enqueued toward this switch.
ProcessResult process_packet(wire::Packet p, SwitchState& st, int src_node,
                             std::int64_t now_ns, std::uint32_t ingress_qlen);

}  // namespace incnet::sw
