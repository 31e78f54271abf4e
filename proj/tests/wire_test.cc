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

#include <bit>
#include <random>

#include "doctest.h"
#include "incnet/errors.hpp"
#include "incnet/wire.hpp"

using namespace incnet;
using namespace incnet::wire;

namespace {

Packet random_packet(std::mt19937_64& rng, bool contiguous) {
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
    p.slots[i].key = contiguous ? p.counter_index + i
                                : static_cast<std::uint32_t>(rng());
    p.slots[i].value = static_cast<std::int32_t>(rng());
  }
  p.payload.resize(rng() % 40);
  for (auto& b : p.payload) b = static_cast<std::uint8_t>(rng());
  return p;
}

int bit_distance(const Bytes& a, const Bytes& b) {
  REQUIRE(a.size() == b.size());
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount<unsigned>(a[i] ^ b[i]);
  return d;
}

}  // namespace

TEST_CASE("all-zero packet has the fixed kv length and round-trips") {
  Packet p;
  Bytes b = encode_packet(p, false);
  CHECK(b.size() == 288);
  CHECK(decode_packet(b) == p);
}

TEST_CASE("kv size sits inside the 192..320 envelope") {
  CHECK(kKvBytes >= 192);
  CHECK(kKvBytes <= 320);
}

TEST_CASE("hand-assembled header bytes") {
  Packet p;
  p.gaid = 0x01020304;
  p.seq = 0x0A0B0C0D;
  p.srrt = 0x1122;
  p.flip = true;
  p.set(kIsCnf);
  p.set(kEcn);
  p.op_type = 3;
  p.bitmap = 0x80000001;
  p.counter_index = 7;
  p.counter_threshold = 2;
  p.slots[0] = {0xDEADBEEF, -1};
  p.payload = {0xAB};
  Bytes b = encode_packet(p, false);
  const std::uint8_t head[32] = {'N', 'R', 1, 0,          1,   2,    3,    4,
                                 0x0A, 0x0B, 0x0C, 0x0D,  0x11, 0x22, 0x00, 0x92,
                                 3,   0,    0x80, 0,      0,   1,    0,    0,
                                 0,   7,    0,    0,      0,   2,    0,    1};
  for (int i = 0; i < 32; ++i) CHECK(b[i] == head[i]);
  const std::uint8_t slot0[8] = {0xDE, 0xAD, 0xBE, 0xEF, 0xFF, 0xFF, 0xFF, 0xFF};
  for (int i = 0; i < 8; ++i) CHECK(b[32 + i] == slot0[i]);
  CHECK(b.size() == 289);
  CHECK(b.back() == 0xAB);
}

TEST_CASE("elision shrinks by 32*4 bytes and reconstructs keys") {
  Packet p;
  p.counter_index = 100;
  for (int i = 0; i < kSlots; ++i) p.slots[i] = {100u + i, i * 3 - 7};
  p.bitmap = 0xFFFFFFFF;
  Bytes kv = encode_packet(p, false);
  Bytes el = encode_packet(p, true);
  CHECK(kv.size() - el.size() == 32 * 4);
  bool elided = false;
  Packet q = decode_packet(el, &elided);
  CHECK(elided);
  for (int i = 0; i < kSlots; ++i) CHECK(q.slots[i].key == q.counter_index + i);
  CHECK(q == p);
  CHECK(decode_packet(kv) == decode_packet(el));
}

TEST_CASE("elision with non-contiguous keys is rejected") {
  Packet p;
  p.counter_index = 5;
  for (int i = 0; i < kSlots; ++i) p.slots[i].key = 5 + i;
  p.slots[9].key = 99;
  CHECK_THROWS_AS(encode_packet(p, true), Error);
  try {
    encode_packet(p, true);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kElideViolation);
  }
}

TEST_CASE("malformed inputs") {
  Packet p;
  Bytes b = encode_packet(p, false);
  auto code_of = [](const Bytes& x) {
    try {
      decode_packet(x);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::kConfigError;
  };
  Bytes truncated(b.begin(), b.end() - 1);
  CHECK(code_of(truncated) == Errc::kMalformedPacket);
  CHECK(code_of(Bytes(b.begin(), b.begin() + 10)) == Errc::kMalformedPacket);
  Bytes bad_magic = b;
  bad_magic[0] = 'X';
  CHECK(code_of(bad_magic) == Errc::kMalformedPacket);
  Bytes bad_version = b;
  bad_version[2] = 9;
  CHECK(code_of(bad_version) == Errc::kMalformedPacket);
  Bytes reserved = b;
  reserved[14] = 0x01;
  CHECK(code_of(reserved) == Errc::kMalformedPacket);
  Bytes longer = b;
  longer.push_back(0);
  CHECK(code_of(longer) == Errc::kMalformedPacket);
}

TEST_CASE("round trip over seeded samples") {
  std::mt19937_64 rng(20260101);
  for (int n = 0; n < 10000; ++n) {
    const bool elide = n % 3 == 0;
    Packet p = random_packet(rng, elide);
    Bytes b = encode_packet(p, elide);
    bool elided = !elide;
    Packet q = decode_packet(b, &elided);
    REQUIRE(q == p);
    REQUIRE(elided == elide);
    REQUIRE(encode_packet(q, elided) == b);
  }
}

TEST_CASE("each flag toggles exactly one encoded bit") {
  std::mt19937_64 rng(7);
  const std::uint16_t flags[] = {kIsOf, kIsCnf, kIsClr, kIsCross, kEcn, kIsSA, kIsMcast};
  for (int n = 0; n < 200; ++n) {
    Packet p = random_packet(rng, false);
    Bytes base = encode_packet(p, false);
    for (std::uint16_t f : flags) {
      Packet q = p;
      q.flags ^= f;
      CHECK(bit_distance(base, encode_packet(q, false)) == 1);
    }
    Packet q = p;
    q.flip = !q.flip;
    CHECK(bit_distance(base, encode_packet(q, false)) == 1);
  }
}
