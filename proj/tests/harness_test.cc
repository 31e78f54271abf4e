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
#include <filesystem>
#include <functional>

#include "doctest.h"
#include "incnet/errors.hpp"
#include "incnet/harness.hpp"

using namespace incnet;
using namespace incnet::harness;
using nlohmann::json;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::kConfigError;
}

Report tiny_report() {
  Report r;
  Row row;
  row.scenario = "syncagtr";
  row.variant = "loss=0.01";
  row.workload = "w";
  row.seed = 7;
  row.loss = 0.01;
  row.calls = 12;
  row.app_bytes = 1u << 20;
  row.sim_ns = 123456789;
  row.goodput_bps = 1.0 / 3.0;
  row.lat_p50_us = 10.25;
  row.lat_p99_us = 99.5;
  row.lat_mean_us = 12.125;
  row.chr = 0.1;
  row.fallback_packets = 3;
  row.fallback_items = 4;
  row.frames_sent = 1000;
  row.frames_dropped = 9;
  row.loss_ratio = 0.009;
  row.jain = 1;
  row.cells = 16384;
  row.decisions = 2;
  row.tolerance = 1e-6;
  row.extra = {{"violations", 0}, {"rtt_us", 11.5}};
  r.rows.push_back(row);
  r.values[row_id(row)] = {{"0/1", 0.5}, {"0/2", -2.0 / 3.0}};
  return r;
}

}  // namespace

TEST_CASE("percentile uses nearest rank") {
  const std::vector<double> xs = {5, 1, 3, 2, 4};
  CHECK(percentile(xs, 0) == 1);
  CHECK(percentile(xs, 50) == 3);
  CHECK(percentile(xs, 99) == 5);
  CHECK(percentile(xs, 100) == 5);
  CHECK(percentile({}, 50) == 0);
  CHECK(mean(xs) == 3);
}

TEST_CASE("jain index") {
  CHECK(jain_index({1, 1, 1, 1}) == doctest::Approx(1));
  CHECK(jain_index({1, 0, 0, 0}) == doctest::Approx(0.25));
  CHECK(jain_index({1, 2, 3}) == doctest::Approx(36.0 / 42.0));
}

TEST_CASE("spearman with and without ties") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1));
  CHECK(spearman({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5));
  // ranks 1, 2.5, 2.5, 4 against 1..4
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(4.5 / std::sqrt(22.5)));
}

TEST_CASE("zipf frequencies") {
  Zipf z(4, 1.0);
  std::mt19937_64 rng(3);
  std::vector<double> n(4);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) n[z(rng)] += 1;
  const double h = 1 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4;
  for (int k = 0; k < 4; ++k) CHECK(n[k] / draws == doctest::Approx(1.0 / (k + 1) / h).epsilon(0.02));
}

TEST_CASE("report survives a write/read round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "incnet_harness_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "r.csv").string();
  const Report a = tiny_report();
  write_report(a, path);
  const Report b = read_report(path);
  REQUIRE(b.rows.size() == 1);
  const Row &x = a.rows[0], &y = b.rows[0];
  CHECK(csv_line(x) == csv_line(y));
  CHECK(y.goodput_bps == x.goodput_bps);
  CHECK(y.extra == x.extra);
  CHECK(b.values == a.values);
  CHECK(code_of([&] { read_report((dir / "missing.csv").string()); }) == Errc::kConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify flags mismatches and violations") {
  const Report oracle = tiny_report();
  CHECK(verify(oracle, oracle).ok);

  Report off = oracle;
  off.values.begin()->second["0/1"] += 1e-3;
  auto v = verify(off, oracle);
  CHECK_FALSE(v.ok);
  REQUIRE(v.lines.size() == 1);
  CHECK(v.lines[0].find("0/1") != std::string::npos);

  Report within = oracle;
  within.values.begin()->second["0/1"] += 1e-7;
  CHECK(verify(within, oracle).ok);

  Report viol = oracle;
  viol.rows[0].extra["violations"] = 2;
  CHECK_FALSE(verify(viol, oracle).ok);

  Report missing = oracle;
  missing.values.begin()->second.erase("0/2");
  CHECK_FALSE(verify(missing, oracle).ok);

  CHECK_FALSE(verify(Report{}, oracle).ok);
}

TEST_CASE("scenario config errors") {
  CHECK(code_of([] { scenario_config("nope", json::object()); }) == Errc::kUnknownScenario);
  CHECK(code_of([] { scenario_config("syncagtr", {{"bogus", 1}}); }) == Errc::kConfigError);
  const auto cfg = scenario_config("syncagtr", {{"scenario", "syncagtr"}});
  CHECK(cfg.is_object());
  for (const auto& s : scenarios()) CHECK_NOTHROW(scenario_config(s, json::object()));
}

TEST_CASE("small switch trials") {
  const auto t = idempotence_trial(5, 16, 50, 0.3);
  CHECK(t.traces == 50);
  CHECK(t.mismatches == 0);
  CHECK(t.duplicates > 0);
  const auto l = lock_race_trial(5, 100, 3);
  CHECK(l.keys == 100);
  CHECK(l.bad == 0);
  const auto v = vote_trial(5, 100, 3, 2);
  CHECK(v.keys == 100);
  CHECK(v.bad == 0);
}
