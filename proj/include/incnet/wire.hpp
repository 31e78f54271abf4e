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

// Packet codec. The byte layout is documented in README.md and is the wire
// protocol of the simulator.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace incnet::wire {

inline constexpr int kSlots = 32;
inline constexpr std::size_t kHeaderBytes = 32;
inline constexpr std::size_t kKvBytes = kHeaderBytes + kSlots * 8;      // 288
inline constexpr std::size_t kElidedBytes = kHeaderBytes + kSlots * 4;  // 160
inline constexpr std::size_t kMaxPayload = 0xFFFF;
inline constexpr std::uint8_t kVersion = 1;

// Flag bits of the 16-bit flags word. Bit 7 carries the flip bit and is
// exposed through Packet::flip instead.
enum Flag : std::uint16_t {
  kIsOf = 1u << 0,
  kIsCnf = 1u << 1,
  kIsClr = 1u << 2,
  kIsCross = 1u << 3,
  kEcn = 1u << 4,
  kIsSA = 1u << 5,
  kIsMcast = 1u << 6,
};
inline constexpr std::uint16_t kFlipBit = 1u << 7;
inline constexpr std::uint16_t kAllFlags =
    kIsOf | kIsCnf | kIsClr | kIsCross | kEcn | kIsSA | kIsMcast;

struct Slot {
  std::uint32_t key = 0;
  std::int32_t value = 0;
  bool operator==(const Slot&) const = default;
};

struct Packet {
  std::uint32_t gaid = 0;
  std::uint32_t seq = 0;
  std::uint16_t srrt = 0;
  bool flip = false;
  std::uint16_t flags = 0;
  std::uint8_t op_type = 0;
  std::uint32_t bitmap = 0;
  std::uint32_t counter_index = 0;
  std::uint32_t counter_threshold = 0;
  std::array<Slot, kSlots> slots{};
  std::vector<std::uint8_t> payload;

  bool has(Flag f) const { return (flags & f) != 0; }
  void set(Flag f, bool on = true) {
    flags = on ? static_cast<std::uint16_t>(flags | f)
               : static_cast<std::uint16_t>(flags & ~f);
  }
  bool enabled(int slot) const { return (bitmap >> slot) & 1u; }
  void enable(int slot, bool on = true) {
    bitmap = on ? (bitmap | (1u << slot)) : (bitmap & ~(1u << slot));
  }
  // True when slot keys are counter_index, counter_index+1, ... (mod 2^32).
  bool keys_contiguous() const;

  bool operator==(const Packet&) const = default;
};

using Bytes = std::vector<std::uint8_t>;

// Throws Error{kElideViolation} when elide_keys is set and the keys are not
// contiguous from counter_index, Error{kMalformedPacket} when the payload
// exceeds kMaxPayload or flags use reserved bits.
Bytes encode_packet(const Packet& p, bool elide_keys);

// Throws Error{kMalformedPacket} for bad magic, version, mode, reserved bits
// or a length that does not match the header.
Packet decode_packet(const std::uint8_t* data, std::size_t len,
                     bool* elided = nullptr);
inline Packet decode_packet(const Bytes& b, bool* elided = nullptr) {
  return decode_packet(b.data(), b.size(), elided);
}

std::size_t encoded_size(const Packet& p, bool elide_keys);

}  // namespace incnet::wire
