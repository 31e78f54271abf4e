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

// Scenario runner, metrics, CSV reports and the oracle comparison used by
// `incnet run` and `incnet verify`.

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace incnet::harness {

inline constexpr int kReportVersion = 1;

// One row per (scenario, variant, seed).
struct Row {
  std::string scenario;
  std::string variant;   // e.g. "loss=0.01", "lru", "copy"
  std::string workload;  // rows with the same workload share an oracle
  std::uint64_t seed = 0;
  double loss = 0;
  std::uint64_t calls = 0;
  std::uint64_t app_bytes = 0;
  std::int64_t sim_ns = 0;
  double goodput_bps = 0;
  double lat_p50_us = 0;
  double lat_p99_us = 0;
  double lat_mean_us = 0;
  double chr = 0;
  std::uint64_t fallback_packets = 0;
  std::uint64_t fallback_items = 0;
  std::uint64_t evictions = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_dropped = 0;
  double loss_ratio = 0;
  double jain = 0;
  std::uint64_t cells = 0;
  std::uint64_t decisions = 0;
  double tolerance = 0;  // per-value tolerance against the oracle
  std::map<std::string, double> extra;
};

// Result values of one row, keyed by element index or map key.
using Values = std::map<std::string, double>;

struct Report {
  std::vector<Row> rows;
  std::map<std::string, Values> values;  // by row_id
};

std::string row_id(const Row& r);
// Report CSV at path; values go to path + ".values.csv".
void write_report(const Report& r, const std::string& path);
Report read_report(const std::string& path);
std::string csv_header();
std::string csv_line(const Row& r);

// Known scenario names.
const std::vector<std::string>& scenarios();

// Merges config over the scenario defaults; throws Error{kUnknownScenario}
// or Error{kConfigError} on an unknown key.
nlohmann::json scenario_config(const std::string& name, const nlohmann::json& config);

// Runs a scenario in the simulator. With oracle set, the workload is
// executed once in software instead, without the network or switch.
Report run_scenario(const std::string& name, const nlohmann::json& config, std::uint64_t seed,
                    bool oracle = false);

struct VerifyResult {
  bool ok = true;
  std::vector<std::string> lines;
};
VerifyResult verify(const Report& report, const Report& oracle);

// ---- metrics --------------------------------------------------------------

double percentile(std::vector<double> xs, double p);  // p in [0, 100]
double mean(const std::vector<double>& xs);
double jain_index(const std::vector<double>& xs);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// ---- workloads ------------------------------------------------------------

// Ranks 0..n-1 with P(k) proportional to 1 / (k+1)^s.
class Zipf {
 public:
  Zipf(std::uint32_t n, double s);
  std::uint32_t operator()(std::mt19937_64& rng) { return static_cast<std::uint32_t>(dist_(rng)); }

 private:
  std::discrete_distribution<std::uint32_t> dist_;
};

// ---- switch-level trials --------------------------------------------------

struct TrialResult {
  std::uint64_t traces = 0;
  std::uint64_t mismatches = 0;
  std::uint64_t packets = 0;
  std::uint64_t duplicates = 0;
  std::string first_failure;
};

// Random send/loss/duplication traces through the switch; the final
// registers must equal an exactly-once sum of every packet.
TrialResult idempotence_trial(std::uint64_t seed, std::uint32_t w_max, std::uint64_t traces,
                              double max_loss);

struct CntFwdTrial {
  std::uint64_t keys = 0;
  std::uint64_t bad = 0;  // keys whose forward count was wrong
  std::uint64_t duplicates = 0;
};
// threshold 1: exactly one client gets through per contended key.
CntFwdTrial lock_race_trial(std::uint64_t seed, std::uint64_t races, int contenders);
// threshold k: exactly one fresh forward per ballot, with duplicates.
CntFwdTrial vote_trial(std::uint64_t seed, std::uint64_t ballots, int voters, int quorum);

}  // namespace incnet::harness
