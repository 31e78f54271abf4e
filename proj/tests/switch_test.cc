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

#include <limits>
#include <map>
#include <memory>
#include <random>

#include "doctest.h"
#include "incnet/netfilter.hpp"
#include "incnet/switch.hpp"

using namespace incnet;
using namespace incnet::sw;
using wire::Packet;

namespace {

constexpr std::int32_t kMaxI = std::numeric_limits<std::int32_t>::max();

std::unique_ptr<SwitchState> make_state() { return std::make_unique<SwitchState>(); }

AppEntry& add_app(SwitchState& st, std::uint32_t gaid, const char* nf_text) {
  AppEntry e;
  e.base_row = 0;
  e.reserved_rows = 1000;
  e.cfg = nf::pipeline_config(nf::parse_netfilter(nf_text));
  e.server_node = 100;
  e.group_nodes = {1, 2};
  st.admission[gaid] = e;
  return st.admission[gaid];
}

const char* kAgtr = R"({"AppName":"DT-1","Precision":8,"get":"AgtrGrad.tensor",
  "addTo":"NewGrad.tensor","clear":"copy","modify":"nop",
  "CntFwd":{"to":"ALL","threshold":2,"key":"ClientID"}})";
const char* kReduce = R"({"AppName":"MR-1","addTo":"R.kvs",
  "CntFwd":{"to":"SRC","threshold":0,"key":"NULL"}})";

Packet data_packet(std::uint32_t gaid, std::uint16_t srrt, std::uint32_t seq, bool flip) {
  Packet p;
  p.gaid = gaid;
  p.srrt = srrt;
  p.seq = seq;
  p.flip = flip;
  return p;
}

}  // namespace

TEST_CASE("admission") {
  auto st = make_state();
  add_app(*st, 7, kReduce);
  Packet p = data_packet(999, 0, 0, false);
  p.enable(0);
  p.slots[0] = {5, 3};
  CHECK(admit(p, *st, 10) == Admission::kForwardPlain);
  auto r = process_packet(p, *st, 1, 10, 0);
  CHECK(r.kind == ProcessResult::kForwardPlain);
  CHECK(st->cell(0, 5) == 0);

  p.gaid = 7;
  CHECK(admit(p, *st, 42) == Admission::kIncProcess);
  CHECK(st->admission[7].last_seen_ns == 42);

  Packet of = p;
  of.set(wire::kIsOf);
  auto srrt = allocate_srrt(*st, 256);
  REQUIRE(srrt);
  of.srrt = *srrt;
  r = process_packet(of, *st, 1, 50, 0);
  REQUIRE(r.kind == ProcessResult::kEmit);
  REQUIRE(r.out.size() == 1);
  CHECK(r.out[0].node == 100);
  CHECK(st->cell(0, 5) == 0);
}

TEST_CASE("flip-bit classification") {
  auto st = make_state();
  auto s = allocate_srrt(*st, 256);
  REQUIRE(s);
  Packet p = data_packet(1, *s, 0, false);
  CHECK(check_retransmission(p, *st) == Freshness::kFresh);
  CHECK(st->retrans_bitmaps[*s].bits[0] == 0);
  CHECK(check_retransmission(p, *st) == Freshness::kDuplicate);

  Packet next = data_packet(1, *s, 256, true);
  CHECK(check_retransmission(next, *st) == Freshness::kFresh);
  CHECK(st->retrans_bitmaps[*s].bits[0] == 1);
  CHECK(check_retransmission(next, *st) == Freshness::kDuplicate);

  Packet unknown = data_packet(1, 999, 0, false);
  CHECK_FALSE(check_retransmission(unknown, *st).has_value());
}

TEST_CASE("flip-bit induction over several windows") {
  // Window t = seq / w; every packet of window t must be fresh on first
  // arrival and duplicate on every later arrival.
  auto st = make_state();
  const std::uint32_t w = 256;
  auto s = allocate_srrt(*st, w);
  for (std::uint32_t t = 0; t < 6; ++t) {
    for (std::uint32_t i = 0; i < w; ++i) {
      const std::uint32_t seq = t * w + i;
      Packet p = data_packet(1, *s, seq, (seq / w) % 2);
      REQUIRE(check_retransmission(p, *st) == Freshness::kFresh);
      REQUIRE(check_retransmission(p, *st) == Freshness::kDuplicate);
      REQUIRE(st->retrans_bitmaps[*s].bits[i] == p.flip);
    }
  }
}

TEST_CASE("srrt pool exhaustion") {
  auto st = make_state();
  st->max_srrt_slots = 2;
  CHECK(allocate_srrt(*st, 4));
  auto b = allocate_srrt(*st, 4);
  CHECK(b);
  CHECK_FALSE(allocate_srrt(*st, 4));
  release_srrt(*st, *b);
  CHECK(allocate_srrt(*st, 4));
}

TEST_CASE("stream modify operators") {
  std::array<wire::Slot, wire::kSlots> s{};
  auto run = [&](nf::ModifyOp op, std::int32_t para, std::int32_t v) {
    s[0].value = v;
    exec_stream_modify(op, para, s, 1u);
    return s[0].value;
  };
  CHECK(run(nf::ModifyOp::kMax, 10, 3) == 10);
  CHECK(run(nf::ModifyOp::kMin, 10, 3) == 3);
  CHECK(run(nf::ModifyOp::kAdd, 4, 3) == 7);
  CHECK(run(nf::ModifyOp::kAssign, 9, 3) == 9);
  CHECK(run(nf::ModifyOp::kShiftL, 2, 3) == 12);
  CHECK(run(nf::ModifyOp::kShiftR, 1, -8) == -4);
  CHECK(run(nf::ModifyOp::kBand, 6, 3) == 2);
  CHECK(run(nf::ModifyOp::kBor, 4, 3) == 7);
  CHECK(run(nf::ModifyOp::kBnot, 0, 3) == ~3);
  CHECK(run(nf::ModifyOp::kBxor, 5, 3) == 6);
  CHECK(run(nf::ModifyOp::kNop, 5, 3) == 3);

  s[0].value = kMaxI;
  CHECK(exec_stream_modify(nf::ModifyOp::kAdd, 1, s, 1u));
  CHECK(s[0].value == kMaxI);

  s[1].value = 5;
  exec_stream_modify(nf::ModifyOp::kAssign, 0, s, 1u);
  CHECK(s[1].value == 5);
}

TEST_CASE("map ops") {
  auto st = make_state();
  AppEntry& app = add_app(*st, 7, kAgtr);
  Packet p = data_packet(7, 0, 0, false);
  p.enable(0);
  p.slots[0] = {10, 3};
  st->cell(0, 10) = 5;
  exec_map_ops(p, *st, Direction::kToServer, app, Freshness::kFresh);
  CHECK(st->cell(0, 10) == 8);
  CHECK(p.slots[0].value == 8);

  Packet dup = data_packet(7, 0, 0, false);
  dup.enable(0);
  dup.slots[0] = {10, 3};
  exec_map_ops(dup, *st, Direction::kToServer, app, Freshness::kDuplicate);
  CHECK(st->cell(0, 10) == 8);
  CHECK(dup.slots[0].value == 8);

  Packet reply = data_packet(7, 0, 0, false);
  reply.set(wire::kIsSA);
  reply.set(wire::kIsClr);
  reply.enable(0);
  reply.slots[0] = {10, 0};
  exec_map_ops(reply, *st, Direction::kFromServer, app, Freshness::kFresh);
  CHECK(reply.slots[0].value == 8);
  CHECK(st->cell(0, 10) == 0);

  st->cell(3, 11) = kMaxI - 1;
  Packet big = data_packet(7, 0, 1, false);
  big.enable(3);
  big.slots[3] = {11, 5};
  auto mr = exec_map_ops(big, *st, Direction::kToServer, app, Freshness::kFresh);
  CHECK(mr.overflow);
  CHECK(big.has(wire::kIsOf));
  CHECK(big.slots[3].value == kMaxI);
  CHECK(st->cell(3, 11) == kMaxI);

  // A saturated cell stays saturated until it is cleared.
  Packet neg = data_packet(7, 0, 2, false);
  neg.enable(3);
  neg.slots[3] = {11, -7};
  CHECK(exec_map_ops(neg, *st, Direction::kToServer, app, Freshness::kFresh).overflow);
  CHECK(st->cell(3, 11) == kMaxI);

  Packet bad = data_packet(7, 0, 3, false);
  bad.enable(4);
  bad.enable(5);
  bad.slots[4] = {20, 1};
  bad.slots[5] = {50000, 1};
  CHECK(exec_map_ops(bad, *st, Direction::kToServer, app, Freshness::kFresh).misaddressed);
  CHECK(st->cell(4, 20) == 0);
  CHECK(st->stats.touch_violations == 0);
}

TEST_CASE("accumulator overflow is delegated to the server") {
  auto st = make_state();
  add_app(*st, 3, kReduce);
  auto s = allocate_srrt(*st, 16);
  st->cell(0, 1) = kMaxI - 1;
  Packet p = data_packet(3, *s, 0, false);
  p.enable(0);
  p.enable(1);
  p.slots[0] = {1, 5};
  p.slots[1] = {1, 9};
  auto r = process_packet(p, *st, 1, 0, 0);
  REQUIRE(r.out.size() == 1);
  CHECK(r.out[0].node == 100);
  CHECK(r.out[0].pkt.has(wire::kIsOf));
  CHECK(r.out[0].pkt.slots[0].value == 5);
  CHECK(r.out[0].pkt.slots[1].value == 9);
  CHECK(st->cell(0, 1) == kMaxI - 1);
  CHECK(st->cell(1, 1) == 0);

  // The register changes later, but a retransmission must still go to the
  // server rather than being applied a second time.
  st->cell(0, 1) = 0;
  auto again = process_packet(p, *st, 1, 0, 0);
  REQUIRE(again.out.size() == 1);
  CHECK(again.out[0].node == 100);
  CHECK(st->cell(0, 1) == 0);
  CHECK(st->cell(1, 1) == 0);

  Packet next = data_packet(3, *s, 16, true);
  next.enable(0);
  next.slots[0] = {1, 2};
  auto ok = process_packet(next, *st, 1, 0, 0);
  REQUIRE(ok.out.size() == 1);
  CHECK(ok.out[0].node == 1);
  CHECK(st->cell(0, 1) == 2);
}

TEST_CASE("bypass packets still advance the bitmap") {
  auto st = make_state();
  add_app(*st, 3, kReduce);
  auto s = allocate_srrt(*st, 4);
  Packet p = data_packet(3, *s, 0, false);
  p.set(wire::kIsCross);
  p.enable(0);
  p.slots[0] = {77, 1};
  auto r = process_packet(p, *st, 1, 0, 0);
  REQUIRE(r.out.size() == 1);
  CHECK(r.out[0].node == 100);
  CHECK(st->cell(0, 77) == 0);
  Packet q = data_packet(3, *s, 4, true);
  q.enable(0);
  q.slots[0] = {5, 1};
  process_packet(q, *st, 1, 0, 0);
  CHECK(st->cell(0, 5) == 1);
}

TEST_CASE("reservation isolation") {
  auto st = make_state();
  AppEntry& a = add_app(*st, 1, kReduce);
  a.base_row = 0;
  a.reserved_rows = 10;
  AppEntry& b = add_app(*st, 2, kReduce);
  b.base_row = 10;
  b.reserved_rows = 10;
  st->cell(0, 12) = 77;
  auto s = allocate_srrt(*st, 8);
  Packet p = data_packet(1, *s, 0, false);
  p.enable(0);
  p.slots[0] = {12, 1};
  auto r = process_packet(p, *st, 1, 0, 0);
  CHECK(st->cell(0, 12) == 77);
  REQUIRE(r.out.size() == 1);
  CHECK(r.out[0].node == 100);
  CHECK(r.out[0].pkt.has(wire::kIsCross));
}

TEST_CASE("cntfwd") {
  auto st = make_state();
  Packet p;
  p.counter_index = flat(0, 20);
  p.counter_threshold = 2;
  CHECK(exec_cntfwd(p, *st, Freshness::kFresh) == CntFwdDecision::kDrop);
  CHECK(st->cell(0, 20) == 1);
  CHECK(exec_cntfwd(p, *st, Freshness::kFresh) == CntFwdDecision::kForward);
  CHECK(st->cell(0, 20) == 2);

  Packet ts;
  ts.counter_index = flat(1, 20);
  ts.counter_threshold = 1;
  CHECK(exec_cntfwd(ts, *st, Freshness::kFresh) == CntFwdDecision::kForward);
  CHECK(exec_cntfwd(ts, *st, Freshness::kDuplicate) == CntFwdDecision::kForward);
  CHECK(st->cell(1, 20) == 1);
  CHECK(exec_cntfwd(ts, *st, Freshness::kFresh) == CntFwdDecision::kDrop);
}

TEST_CASE("threshold 0 disables counting") {
  auto st = make_state();
  add_app(*st, 3, kReduce);
  auto s = allocate_srrt(*st, 8);
  Packet p = data_packet(3, *s, 0, false);
  p.set(wire::kIsCnf);
  p.counter_index = flat(0, 30);
  p.counter_threshold = 0;
  auto r = process_packet(p, *st, 1, 0, 0);
  CHECK(r.kind == ProcessResult::kEmit);
  CHECK(st->cell(0, 30) == 0);
}

TEST_CASE("sync aggregation round trip") {
  auto st = make_state();
  add_app(*st, 7, kAgtr);
  auto s1 = allocate_srrt(*st, 256);
  auto s2 = allocate_srrt(*st, 256);
  auto push = [&](std::uint16_t srrt, int client, std::int32_t a, std::int32_t b) {
    Packet p = data_packet(7, srrt, 0, false);
    p.set(wire::kIsCnf);
    p.counter_index = flat(31, 500);
    p.counter_threshold = 2;
    p.enable(0);
    p.enable(1);
    p.slots[0] = {40, a};
    p.slots[1] = {40, b};
    return process_packet(p, *st, client, 0, 0);
  };
  auto r1 = push(*s1, 1, 1, 2);
  CHECK(r1.kind == ProcessResult::kDrop);
  auto r2 = push(*s2, 2, 3, 4);
  REQUIRE(r2.kind == ProcessResult::kEmit);
  REQUIRE(r2.out.size() == 1);
  CHECK(r2.out[0].node == 100);
  CHECK(r2.out[0].pkt.slots[0].value == 4);
  CHECK(r2.out[0].pkt.slots[1].value == 6);

  Packet reply = r2.out[0].pkt;
  reply.set(wire::kIsSA);
  reply.set(wire::kIsClr);
  reply.set(wire::kIsMcast);
  auto r3 = process_packet(reply, *st, 100, 0, 0);
  REQUIRE(r3.out.size() == 2);
  CHECK(r3.out[0].node == 1);
  CHECK(r3.out[1].node == 2);
  for (const auto& e : r3.out) {
    CHECK(e.pkt.slots[0].value == 4);
    CHECK(e.pkt.slots[1].value == 6);
  }
  CHECK(st->cell(0, 40) == 0);
  CHECK(st->cell(1, 40) == 0);
}

TEST_CASE("ecn marking and ecn cell") {
  auto st = make_state();
  AppEntry& app = add_app(*st, 9, kReduce);
  app.ecn_cell = flat(31, 999);
  st->ecn_hold_ns = 200'000;
  auto s = allocate_srrt(*st, 64);
  Packet p = data_packet(9, *s, 0, false);
  auto r = process_packet(p, *st, 1, 1'000'000, st->ecn_threshold + 1);
  REQUIRE(r.out.size() == 1);
  CHECK(r.out[0].pkt.has(wire::kEcn));
  CHECK(r.out[0].node == 1);
  CHECK(st->registers[*app.ecn_cell] != 0);

  // A retransmission shortly after still carries ECN through the map key.
  auto again = process_packet(p, *st, 1, 1'050'000, 0);
  REQUIRE(again.out.size() == 1);
  CHECK(again.out[0].pkt.has(wire::kEcn));

  Packet later = data_packet(9, *s, 1, false);
  auto r2 = process_packet(later, *st, 1, 50'000'000, 0);
  REQUIRE(r2.out.size() == 1);
  CHECK_FALSE(r2.out[0].pkt.has(wire::kEcn));
}

TEST_CASE("shadow turnaround clears the partner copy") {
  auto st = make_state();
  AppEntry& app = add_app(*st, 4, R"({"AppName":"S","get":"A.t","addTo":"B.t","clear":"shadow",
    "CntFwd":{"to":"ALL","threshold":0,"key":"NULL"}})");
  app.base_row = 0;
  app.reserved_rows = 200;
  app.shadow_stride = 100;
  auto s = allocate_srrt(*st, 8);
  st->cell(0, 105) = 42;
  Packet p = data_packet(4, *s, 0, false);
  p.enable(0);
  p.slots[0] = {5, 7};
  auto r = process_packet(p, *st, 1, 0, 0);
  CHECK(r.recirculated);
  CHECK(st->cell(0, 105) == 0);
  CHECK(st->cell(0, 5) == 7);
  REQUIRE(r.out.size() == 2);
  CHECK(r.out[0].pkt.has(wire::kIsMcast));
}

TEST_CASE("duplicates never change registers") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto st = make_state();
    add_app(*st, 1, kReduce);
    const std::uint32_t w = 4u << (trial % 3);
    auto s = allocate_srrt(*st, w);
    std::map<std::pair<int, std::uint32_t>, std::int64_t> oracle;
    std::vector<Packet> sent;
    for (std::uint32_t seq = 0; seq < 5 * w; ++seq) {
      Packet p = data_packet(1, *s, seq, (seq / w) % 2);
      for (int i = 0; i < wire::kSlots; ++i) {
        if (rng() % 2) {
          p.enable(i);
          p.slots[i] = {static_cast<std::uint32_t>(rng() % 8), static_cast<std::int32_t>(rng() % 100)};
          oracle[{i, p.slots[i].key}] += p.slots[i].value;
        }
      }
      process_packet(p, *st, 1, 0, 0);
      sent.push_back(p);
      // Replay recent packets of the current window.
      for (int k = 0; k < 3; ++k) {
        const std::uint32_t back = rng() % std::min<std::uint32_t>(w, seq + 1);
        process_packet(sent[seq - back], *st, 1, 0, 0);
      }
    }
    for (const auto& [cell, v] : oracle) REQUIRE(st->cell(cell.first, cell.second) == v);
  }
}
