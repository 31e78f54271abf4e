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

#include "incnet/wire.hpp"

#include <algorithm>
#include <string>

#include "incnet/errors.hpp"

namespace incnet::wire {
namespace {

constexpr std::uint8_t kMagic0 = 'N';
constexpr std::uint8_t kMagic1 = 'R';
constexpr std::uint8_t kModeKv = 0;
constexpr std::uint8_t kModeElided = 1;

void put16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v);
}

void put32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

std::uint16_t get16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t get32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

[[noreturn]] void malformed(const std::string& why) {
  throw Error(Errc::kMalformedPacket, why);
}

}  // namespace

bool Packet::keys_contiguous() const {
  for (int i = 0; i < kSlots; ++i) {
    if (slots[i].key != counter_index + static_cast<std::uint32_t>(i)) {
      return false;
    }
  }
  return true;
}

std::size_t encoded_size(const Packet& p, bool elide_keys) {
  return (elide_keys ? kElidedBytes : kKvBytes) + p.payload.size();
}

Bytes encode_packet(const Packet& p, bool elide_keys) {
  if (elide_keys && !p.keys_contiguous()) {
    throw Error(Errc::kElideViolation,
                "slot keys are not counter_index + i");
  }
  if (p.payload.size() > kMaxPayload) malformed("payload too large");
  if (p.flags & ~kAllFlags) malformed("reserved flag bits set");

  Bytes out(encoded_size(p, elide_keys));
  std::uint8_t* b = out.data();
  b[0] = kMagic0;
  b[1] = kMagic1;
  b[2] = kVersion;
  b[3] = elide_keys ? kModeElided : kModeKv;
  put32(b + 4, p.gaid);
  put32(b + 8, p.seq);
  put16(b + 12, p.srrt);
  put16(b + 14, static_cast<std::uint16_t>(p.flags | (p.flip ? kFlipBit : 0)));
  b[16] = p.op_type;
  b[17] = 0;
  put32(b + 18, p.bitmap);
  put32(b + 22, p.counter_index);
  put32(b + 26, p.counter_threshold);
  put16(b + 30, static_cast<std::uint16_t>(p.payload.size()));

  std::uint8_t* s = b + kHeaderBytes;
  for (const Slot& slot : p.slots) {
    if (!elide_keys) {
      put32(s, slot.key);
      s += 4;
    }
    put32(s, static_cast<std::uint32_t>(slot.value));
    s += 4;
  }
  std::copy(p.payload.begin(), p.payload.end(), s);
  return out;
}

Packet decode_packet(const std::uint8_t* b, std::size_t len, bool* elided) {
  if (len < kHeaderBytes) malformed("truncated header");
  if (b[0] != kMagic0 || b[1] != kMagic1) malformed("bad magic");
  if (b[2] != kVersion) malformed("bad version");
  if (b[3] != kModeKv && b[3] != kModeElided) malformed("bad mode");
  if (b[17] != 0) malformed("nonzero pad");
  const bool elide = b[3] == kModeElided;
  const std::uint16_t payload_len = get16(b + 30);
  const std::size_t want = (elide ? kElidedBytes : kKvBytes) + payload_len;
  if (len != want) malformed("length mismatch");

  Packet p;
  p.gaid = get32(b + 4);
  p.seq = get32(b + 8);
  p.srrt = get16(b + 12);
  const std::uint16_t flags = get16(b + 14);
  if (flags & ~(kAllFlags | kFlipBit)) malformed("reserved flag bits set");
  p.flip = (flags & kFlipBit) != 0;
  p.flags = static_cast<std::uint16_t>(flags & kAllFlags);
  p.op_type = b[16];
  p.bitmap = get32(b + 18);
  p.counter_index = get32(b + 22);
  p.counter_threshold = get32(b + 26);

  const std::uint8_t* s = b + kHeaderBytes;
  for (int i = 0; i < kSlots; ++i) {
    if (elide) {
      p.slots[i].key = p.counter_index + static_cast<std::uint32_t>(i);
    } else {
      p.slots[i].key = get32(s);
      s += 4;
    }
    p.slots[i].value = static_cast<std::int32_t>(get32(s));
    s += 4;
  }
  p.payload.assign(s, s + payload_len);
  if (elided) *elided = elide;
  return p;
}

}  // namespace incnet::wire
