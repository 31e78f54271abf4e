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
#include <memory>
#include <random>
#include <set>
#include <unordered_map>

#include "doctest.h"
#include "incnet/client_agent.hpp"
#include "incnet/errors.hpp"
#include "incnet/server_agent.hpp"

using namespace incnet;
using namespace incnet::client;

TEST_CASE("quantize") {
  CHECK(quantize(1.5, Quantizer(2)) == 150);
  CHECK(quantize(0.0, Quantizer(8)) == 0);
  // 3e8 * 100 = 3e10 > 2^31 - 1 = 2147483647.
  CHECK_FALSE(quantize(3.0e8, Quantizer(2)).has_value());
  CHECK(quantize(21474836.47, Quantizer(2)) == 2147483647);
  CHECK_FALSE(quantize(21474836.48, Quantizer(2)).has_value());
  CHECK(quantize(0.5, Quantizer(0)) == 1);
  CHECK(quantize(-0.5, Quantizer(0)) == -1);
  CHECK(quantize(2.5, Quantizer(0)) == 3);
  CHECK(quantize(-2.5, Quantizer(0)) == -3);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-20.0, 20.0);
  for (int p = 0; p <= 8; ++p) {
    Quantizer q(p);
    for (int i = 0; i < 2000; ++i) {
      const double x = d(rng);
      auto v = quantize(x, q);
      REQUIRE(v);
      const double back = dequantize(*v, q);
      // Half a unit in the last place, plus double rounding slack.
      REQUIRE(std::fabs(back - x) <= 0.5 / q.scale + 1e-9 * std::fabs(x) + 1e-15);
    }
  }
}

TEST_CASE("flip bit") {
  CHECK(flip_for(0, 256) == false);
  CHECK(flip_for(255, 256) == false);
  CHECK(flip_for(256, 256) == true);
  CHECK(flip_for(512, 256) == false);
  CHECK(flip_for(7, 4) == true);
}

TEST_CASE("key hash matches published MurmurHash3 x86_32 vectors") {
  CHECK(key_hash("", 0) == 0u);
  CHECK(key_hash("", 1) == 0x514E28B7u);
  CHECK(key_hash("", 0xffffffffu) == 0x81F16F39u);
  CHECK(key_hash("test", 0x9747b28cu) == 0x704b81dcu);
  CHECK(key_hash("Hello, world!", 0x9747b28cu) == 0x24884CBAu);
  CHECK(key_hash("The quick brown fox jumps over the lazy dog", 0x9747b28cu) == 0x2FA826CDu);
}

TEST_CASE("AIMD") {
  CcParams cc;
  cc.initial_cw = 4;
  FlowState f(std::uint16_t{0}, 256, cc);
  for (int i = 0; i < 4; ++i) {
    wire::Packet p;
    f.stamp(p, 0);
  }
  for (std::uint32_t s = 0; s < 4; ++s) CHECK(f.on_ack(s, 1000, false));
  CHECK(f.cw() == 5);

  cc.initial_cw = 8;
  FlowState g(std::uint16_t{0}, 256, cc);
  for (int i = 0; i < 8; ++i) {
    wire::Packet p;
    g.stamp(p, 0);
  }
  g.on_ack(0, 1000, true);
  CHECK(g.cw() == 4);
  // Further marks from the same round do not decrease again.
  g.on_ack(1, 1000, true);
  g.on_ack(2, 1000, true);
  CHECK(g.cw() == 4);
  CHECK_FALSE(g.on_ack(2, 1000, false));

  cc.enabled = false;
  FlowState off(std::uint16_t{0}, 64, cc);
  CHECK(off.cw() == 64);
  wire::Packet p;
  off.stamp(p, 0);
  off.on_ack(0, 10, true);
  CHECK(off.cw() == 64);
}

TEST_CASE("rto") {
  CcParams cc;
  FlowState f(std::uint16_t{0}, 16, cc);
  wire::Packet p;
  f.stamp(p, 0);
  f.on_ack(0, 100'000, false);
  CHECK(f.rto() == cc.rto_floor_ns);
  f.stamp(p, 0);
  f.on_ack(1, 40'000'000, false);
  // srtt = 0.875 * 100us + 0.125 * 40ms
  CHECK(f.rto() == static_cast<std::int64_t>(2 * (0.875 * 100'000 + 0.125 * 40'000'000)));
}

TEST_CASE("window discipline") {
  CcParams cc;
  cc.initial_cw = 4;
  FlowState f(std::uint16_t{0}, 4, cc);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(f.can_send());
    wire::Packet p;
    f.stamp(p, 0);
    CHECK(p.flip == false);
  }
  CHECK_FALSE(f.can_send());
  f.on_ack(1, 10, false);
  CHECK_FALSE(f.can_send());  // index 0 still held by seq 0
  f.on_ack(0, 10, false);
  REQUIRE(f.can_send());
  wire::Packet p;
  CHECK(f.stamp(p, 0) == 4);
  CHECK(p.flip == true);

  // Retransmissions reuse the stored bytes.
  const wire::Bytes first = wire::encode_packet(p, false);
  CHECK(wire::encode_packet(wire::decode_packet(first), false) == first);
}

TEST_CASE("establish connections") {
  auto st = std::make_unique<sw::SwitchState>();
  auto flows = establish_connections(st.get(), 4, 256);
  REQUIRE(flows.size() == 4);
  std::set<std::uint16_t> ids;
  for (const auto& f : flows) {
    REQUIRE(f.inc());
    ids.insert(*f.srrt());
  }
  CHECK(ids.size() == 4);
  for (const auto& id : ids) CHECK(st->retrans_bitmaps.at(id).bits[0] == 1);

  st->max_srrt_slots = 5;
  auto more = establish_connections(st.get(), 2, 256);
  CHECK(more[0].inc());
  CHECK_FALSE(more[1].inc());
}

namespace {

nf::NetFilter array_filter(bool cnt) {
  nf::NetFilter nf;
  nf.app_name = "A";
  nf.precision = 2;
  nf.add_to = "NewGrad.tensor";
  nf.get = "AgtrGrad.tensor";
  if (cnt) {
    nf.cntfwd.to = nf::Target::kAll;
    nf.cntfwd.threshold = 2;
    nf.cntfwd.key_mode = nf::KeyMode::kClientId;
  }
  return nf;
}

nf::NetFilter map_filter() {
  nf::NetFilter nf;
  nf.app_name = "M";
  nf.add_to = "ReduceRequest.kvs";
  return nf;
}

}  // namespace

TEST_CASE("array stream: elided keys on a circular buffer") {
  Message m{"NewGrad", {{"tensor", FPArray(64, 0.25)}}};
  StreamParams sp;
  sp.gaid = 9;
  sp.ring_base_row = 100;
  sp.ring_rows = 256;
  sp.first_chunk = 255;
  Stream s = build_stream(m, array_filter(false), nullptr, sp);
  REQUIRE(s.packets.size() == 2);
  for (const auto& p : s.packets) {
    CHECK(p.elide);
    CHECK(p.pkt.bitmap == 0xFFFFFFFFu);
    CHECK(p.pkt.keys_contiguous());
    CHECK(p.pkt.slots[0].value == 25);
    CHECK(wire::encode_packet(p.pkt, true).size() == wire::kElidedBytes + p.pkt.payload.size());
  }
  CHECK(s.packets[0].pkt.counter_index == 100 + 255);
  CHECK(s.packets[1].pkt.counter_index == 100);  // wrapped
  CHECK(s.packets[0].chunk == 255);
  CHECK(s.packets[1].chunk == 256);
}

TEST_CASE("array stream with per-chunk counters") {
  Message m{"NewGrad", {{"tensor", FPArray{1.0, 2.0, 3.0e8}}}};
  StreamParams sp;
  sp.ring_base_row = 10;
  sp.ring_rows = 512;
  sp.counter_base_row = 600;
  sp.counter_ring = 1024;
  sp.first_chunk = 1025;
  Stream s = build_stream(m, array_filter(true), nullptr, sp);
  REQUIRE(s.packets.size() == 1);
  const auto& p = s.packets[0];
  CHECK_FALSE(p.elide);
  CHECK(p.pkt.has(wire::kIsCnf));
  CHECK(p.pkt.bitmap == 0b111u);
  CHECK(p.pkt.slots[1].key == 10 + 1025 % 512);
  CHECK(p.pkt.counter_index == sw::flat(1, 600));
  CHECK(p.pkt.counter_threshold == 4);
  CHECK(p.pkt.slots[2].value == std::numeric_limits<std::int32_t>::max());
  Meta meta = decode_meta(p.pkt.payload);
  REQUIRE(meta.wide.size() == 3);
  CHECK(meta.wide[2] == 30'000'000'000LL);
}

TEST_CASE("uncached map keys go to the server") {
  Message m{"ReduceRequest", {{"kvs", StrIntMap{{"a", 1}, {"b", 2}, {"c", 3}}}}};
  server::AddressMap amap(0, 100, server::CachePolicy::kLru);
  Stream s = build_stream(m, map_filter(), &amap, StreamParams{});
  REQUIRE(s.packets.size() == 1);
  CHECK(s.packets[0].pkt.has(wire::kIsCross));
  CHECK_FALSE(s.packets[0].elide);
  CHECK(std::popcount(s.packets[0].pkt.bitmap) == 3);
  CHECK(s.cached_items == 0);
  Meta meta = decode_meta(s.packets[0].pkt.payload);
  CHECK(meta.names == std::vector<std::string>{"a", "b", "c"});
  CHECK(s.packets[0].pkt.slots[1].key == key_hash("b"));
}

TEST_CASE("cached keys sit in the slot of their segment") {
  server::AddressMap amap(50, 100, server::CachePolicy::kFcfs);
  for (const char* k : {"x", "y"}) {
    amap.claim(key_hash(k), k);
    amap.allocate_mapping(key_hash(k));
  }
  Message m{"ReduceRequest", {{"kvs", StrIntMap{{"x", 5}, {"y", 6}, {"z", 7}}}}};
  Stream s = build_stream(m, map_filter(), &amap, StreamParams{});
  REQUIRE(s.packets.size() == 2);
  const auto& c = s.packets[0].pkt;
  CHECK_FALSE(c.has(wire::kIsCross));
  CHECK(c.bitmap == 0b11u);
  CHECK(c.slots[0] == wire::Slot{50, 5});
  CHECK(c.slots[1] == wire::Slot{50, 6});
  CHECK(s.packets[1].pkt.has(wire::kIsCross));
  CHECK(s.cached_items == 2);
}

TEST_CASE("colliding keys travel in the payload") {
  // Birthday search for two short names with the same 32-bit hash.
  std::unordered_map<std::uint32_t, std::string> seen;
  std::string a, b;
  for (std::uint64_t i = 0; a.empty(); ++i) {
    std::string s = "k" + std::to_string(i);
    auto [it, ok] = seen.emplace(key_hash(s), s);
    if (!ok) {
      a = it->second;
      b = s;
    }
  }
  REQUIRE(key_hash(a) == key_hash(b));
  server::AddressMap amap(0, 100, server::CachePolicy::kLru);
  REQUIRE(amap.claim(key_hash(a), a));
  CHECK_FALSE(amap.claim(key_hash(b), b));

  Message m{"ReduceRequest", {{"kvs", StrIntMap{{a, 1}, {b, 2}}}}};
  Stream s = build_stream(m, map_filter(), &amap, StreamParams{});
  REQUIRE(s.packets.size() == 1);
  const auto& p = s.packets[0];
  CHECK(std::popcount(p.pkt.bitmap) == 1);
  CHECK(p.pkt.slots[0].key == key_hash(a));
  Meta meta = decode_meta(p.pkt.payload);
  REQUIRE(meta.extra.size() == 1);
  CHECK(meta.extra[0] == std::pair<std::string, std::int64_t>{b, 2});
}

TEST_CASE("unbound field") {
  Message m{"ReduceRequest", {{"other", StrIntMap{}}}};
  CHECK_THROWS_AS(build_stream(m, map_filter(), nullptr, StreamParams{}), Error);
  try {
    build_stream(m, map_filter(), nullptr, StreamParams{});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kUnboundField);
  }
}

TEST_CASE("metadata codec") {
  Meta m;
  m.kind = Meta::kFallback;
  m.client = 7;
  m.flow = 3;
  m.tag = 123456;
  m.names = {"a", "", "ccc"};
  m.extra = {{"z", -5}};
  m.wide = {1LL << 40, -(1LL << 35)};
  CHECK(decode_meta(encode_meta(m)) == m);
  wire::Bytes bad = encode_meta(m);
  bad.pop_back();
  CHECK_THROWS_AS(decode_meta(bad), Error);
}
