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

// incnet run <scenario> --config <file> --seed <n> --out <csv> [--oracle]
// incnet verify --report <csv> --oracle <csv>

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "incnet/errors.hpp"
#include "incnet/harness.hpp"

namespace h = incnet::harness;

int main(int argc, char** argv) {
  CLI::App app{"incnet scenario runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario and write a CSV report");
  std::string scenario, config_path, out;
  std::uint64_t seed = 1;
  bool oracle = false;
  run->add_option("scenario", scenario, "scenario name")->required();
  run->add_option("--config", config_path, "JSON config merged over the defaults");
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--out", out, "report CSV path")->required();
  run->add_flag("--oracle", oracle, "compute expected results in software");

  auto* ver = app.add_subcommand("verify", "compare a report with an oracle report");
  std::string report_path, oracle_path;
  ver->add_option("--report", report_path)->required();
  ver->add_option("--oracle", oracle_path)->required();

  auto* list = app.add_subcommand("list", "print scenario names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& s : h::scenarios()) std::cout << s << '\n';
      return 0;
    }
    if (*run) {
      nlohmann::json cfg;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw incnet::Error(incnet::Errc::kConfigError, "cannot read " + config_path);
        try {
          cfg = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw incnet::Error(incnet::Errc::kConfigError, config_path + ": " + e.what());
        }
        // A config file may name its scenario; the command line wins.
        cfg.erase("scenario");
      }
      const auto rep = h::run_scenario(scenario, cfg, seed, oracle);
      h::write_report(rep, out);
      std::cout << h::csv_header() << '\n';
      for (const auto& r : rep.rows) std::cout << h::csv_line(r) << '\n';
      int bad = 0;
      for (const auto& r : rep.rows) {
        auto it = r.extra.find("violations");
        if (it != r.extra.end() && it->second != 0) ++bad;
      }
      return bad ? 1 : 0;
    }
    const auto res = h::verify(h::read_report(report_path), h::read_report(oracle_path));
    for (const auto& l : res.lines) std::cout << l << '\n';
    std::cout << (res.ok ? "PASS" : "FAIL") << '\n';
    return res.ok ? 0 : 1;
  } catch (const incnet::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
