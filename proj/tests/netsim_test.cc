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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "incnet/errors.hpp"
#include "incnet/netsim.hpp"

using namespace incnet;
using namespace incnet::net;

namespace {

Frame frame(int src, int dst, std::size_t bytes) {
  Frame f;
  f.src = src;
  f.dst = dst;
  f.data.assign(bytes, 0);
  return f;
}

}  // namespace

TEST_CASE("events run in time order, ties in insertion order") {
  Simulator sim;
  std::string order;
  sim.at(20, [&] { order += 'c'; });
  sim.at(10, [&] { order += 'a'; });
  sim.at(10, [&] { order += 'b'; });
  sim.at(10, [&] { sim.after(0, [&] { order += 'd'; }); });
  while (sim.step()) {
  }
  CHECK(order == "abdc");
  CHECK(sim.now() == 20);
}

TEST_CASE("serialization and propagation delay") {
  LinkSpec l;
  l.gbps = 1.0;
  l.delay_us = 2.0;
  Simulator sim;
  Network net(sim, single_switch(2, l), 1);
  Time got = -1;
  net.set_host_handler(2, [&](Frame&&) { got = sim.now(); });
  net.send(frame(1, 2, 1000));
  while (sim.step()) {
  }
  // Independent arithmetic: two hops of (bits / rate + delay) plus the
  // switch pipeline.
  const Time ser = static_cast<Time>((1000 + 46) * 8 / 1.0);
  CHECK(got == 2 * (ser + 2000) + 500);
}

TEST_CASE("tail drop and ECN marking") {
  LinkSpec l;
  l.queue_pkts = 4;
  l.ecn_threshold = 2;
  Simulator sim;
  Network net(sim, single_switch(2, l), 1);
  std::vector<bool> marks;
  net.set_host_handler(2, [&](Frame&& f) { marks.push_back(f.ce); });
  for (int i = 0; i < 10; ++i) net.send(frame(1, 2, 500));
  while (sim.step()) {
  }
  CHECK(net.link_stats(1, 0).queue_drops == 6);
  REQUIRE(marks.size() == 4);
  CHECK(marks == std::vector<bool>{false, false, false, true});
}

TEST_CASE("loss rate matches the configured probability") {
  LinkSpec l;
  l.loss = 0.1;
  l.queue_pkts = 1 << 20;
  Simulator sim;
  Network net(sim, single_switch(2, l), 42);
  net.inject_loss(0, 2, 0.0);
  int got = 0;
  net.set_host_handler(2, [&](Frame&&) { ++got; });
  const int n = 100000;
  for (int i = 0; i < n; ++i) net.send(frame(1, 2, 10));
  while (sim.step()) {
  }
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  CHECK(std::abs((n - got) - n * 0.1) < 4 * sigma);
}

TEST_CASE("dumbbell routing crosses both switches") {
  Simulator sim;
  auto spec = dumbbell(2, 2, LinkSpec{}, LinkSpec{});
  Network net(sim, spec, 1);
  const int h0 = net.node("h0"), h3 = net.node("h3"), h2 = net.node("h2");
  CHECK(net.path_switches(h0, h3) == std::vector<int>{net.node("S1"), net.node("S2")});
  CHECK(net.path_switches(h2, h3) == std::vector<int>{net.node("S2")});
  CHECK(net.inc_switches() == std::vector<int>{net.node("S2")});
}

TEST_CASE("hosts never relay") {
  TopologySpec t;
  t.nodes = {{"a"}, {"b"}, {"c"}};
  t.links = {{"a", "b", {}}, {"b", "c", {}}};
  Simulator sim;
  try {
    Network net(sim, t, 1);
    FAIL("expected DisconnectedTopology");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kDisconnectedTopology);
  }
  TopologySpec empty;
  CHECK_THROWS_AS(Network(sim, empty, 1), Error);
}

TEST_CASE("topology JSON") {
  const auto t = parse_topology(R"({
    "link_defaults": {"gbps": 10, "delay_us": 1},
    "nodes": [{"name": "S", "switch": true, "inc": true}, {"name": "c"}, {"name": "s"}],
    "links": [{"a": "c", "b": "S", "loss": 0.01}, {"a": "s", "b": "S"}],
    "clients": ["c"], "servers": ["s"]})");
  REQUIRE(t.links.size() == 2);
  CHECK(t.links[0].spec.gbps == 10);
  CHECK(t.links[0].spec.loss == 0.01);
  CHECK(t.links[1].spec.delay_us == 1);
  Simulator sim;
  Network net(sim, t, 1);
  CHECK(net.clients() == std::vector<int>{1});
  try {
    parse_topology(R"({"nodes": [], "links": [{"a": "x", "b": "y", "speed": 3}]})");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kConfigError);
  }
}

TEST_CASE("same seed gives identical event logs") {
  auto run = [](std::uint64_t seed) {
    LinkSpec l;
    l.loss = 0.05;
    l.queue_pkts = 8;
    Simulator sim;
    Network net(sim, dumbbell(3, 1, l, l), seed);
    net.enable_log(true);
    for (int i = 0; i < 300; ++i) {
      sim.at(i * 700, [&net, i] { net.send(frame(2 + i % 3, 5, 100 + i)); });
    }
    while (sim.step()) {
    }
    std::ostringstream os;
    net.write_log_csv(os);
    return os.str();
  };
  CHECK(run(7) == run(7));
  CHECK(run(7) != run(8));
}
