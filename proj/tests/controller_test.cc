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
#include <random>

#include "doctest.h"
#include "incnet/controller.hpp"
#include "incnet/errors.hpp"

using namespace incnet;
using namespace incnet::ctl;

namespace {

nf::NetFilter filter(const std::string& name) {
  nf::NetFilter f;
  f.app_name = name;
  f.add_to = "Req.data";
  return f;
}

sw::Admission touch(sw::SwitchState& st, std::uint32_t gaid, std::int64_t now) {
  wire::Packet p;
  p.gaid = gaid;
  return sw::admit(p, st, now);
}

}  // namespace

TEST_CASE("register_app grants FCFS rows") {
  sw::SwitchState st;
  Controller c({&st});
  const auto a = c.register_app(filter("a"), 1000);
  CHECK(a.inc());
  CHECK(a.base_row == 0);
  CHECK(a.rows == 32);  // ceil(1000 / 32)
  const auto b = c.register_app(filter("b"), 64);
  CHECK(b.base_row == 32);
  CHECK(b.rows == 2);
  CHECK(touch(st, a.gaids.at("a"), 0) == sw::Admission::kIncProcess);

  const auto big = c.register_app(filter("big"), sw::kTotalCells);
  CHECK_FALSE(big.inc());
  CHECK(big.gaids.size() == 1);
  CHECK(touch(st, big.gaids.at("big"), 0) == sw::Admission::kForwardPlain);

  try {
    c.register_app(filter("a"), 10);
    FAIL("expected DuplicateAppName");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kDuplicateAppName);
  }
}

TEST_CASE("registration leaves other apps' registers alone") {
  sw::SwitchState st;
  Controller c({&st});
  const auto a = c.register_app(filter("a"), 320);
  st.cell(3, a.base_row + 2) = 77;
  const auto before = st.registers;
  c.register_app(filter("b"), 320);
  c.register_app(filter("c"), 320);
  CHECK(st.registers == before);
  c.deregister_app("b");
  CHECK(st.registers == before);
}

TEST_CASE("reservations never overlap") {
  std::mt19937_64 rng(3);
  sw::SwitchState st;
  Controller c({&st}, 1'000'000'000, 4096);
  std::vector<std::string> live;
  for (int i = 0; i < 2000; ++i) {
    if (!live.empty() && rng() % 3 == 0) {
      const std::size_t k = rng() % live.size();
      c.deregister_app(live[k]);
      live.erase(live.begin() + static_cast<long>(k));
    } else {
      const std::string name = "app" + std::to_string(i);
      c.register_app(filter(name), static_cast<std::uint32_t>(rng() % 20000));
      live.push_back(name);
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> spans;
    std::uint32_t total = 0;
    for (const auto& n : live) {
      const auto* r = c.find(n);
      if (r->rows == 0) continue;
      spans.push_back({r->base_row, r->base_row + r->rows});
      total += r->rows;
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t k = 1; k < spans.size(); ++k) REQUIRE(spans[k - 1].second <= spans[k].first);
    REQUIRE(total <= 4096);
    REQUIRE(total == c.granted_rows());
  }
}

TEST_CASE("level-1 timeout") {
  sw::SwitchState st;
  Controller c({&st}, 1'000'000'000);
  const auto a = c.register_app(filter("a"), 64);
  const auto b = c.register_app(filter("b"), 64);
  const std::uint32_t ga = a.gaids.at("a"), gb = b.gaids.at("b");

  // Both active.
  touch(st, ga, 500'000'000);
  touch(st, gb, 500'000'000);
  CHECK(c.poll_timestamps(1'000'000'000).empty());

  // a keeps running, b idles for 2 s.
  touch(st, ga, 2'400'000'000);
  st.cell(5, b.base_row + 1) = 9;
  auto n = c.poll_timestamps(2'500'000'000);
  REQUIRE(n.size() == 1);
  CHECK(n[0].gaid == gb);
  CHECK(n[0].drained.at(sw::flat(5, b.base_row + 1)) == 9);
  CHECK(st.cell(5, b.base_row + 1) == 0);
  // Reported once only.
  CHECK(c.poll_timestamps(2'750'000'000).empty());
  CHECK(touch(st, gb, 2'800'000'000) == sw::Admission::kForwardPlain);

  // Now a idles too.
  n = c.poll_timestamps(4'000'000'000);
  REQUIRE(n.size() == 1);
  CHECK(n[0].gaid == ga);
  CHECK(c.granted_rows() == 0);
}

TEST_CASE("two idle apps are both reclaimed") {
  sw::SwitchState st;
  Controller c({&st}, 1'000'000'000);
  c.register_app(filter("a"), 64);
  c.register_app(filter("b"), 64);
  CHECK(c.granted_rows() == 4);
  const auto n = c.poll_timestamps(2'000'000'000);
  CHECK(n.size() == 2);
  CHECK(c.granted_rows() == 0);
  CHECK(c.free_rows() == sw::kCellsPerSegment);
}
