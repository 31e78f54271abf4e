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
#include <cstdio>
#include <fstream>
#include <sstream>

#include "incnet/errors.hpp"
#include "incnet/harness.hpp"

namespace incnet::harness {

namespace {

constexpr const char* kColumns[] = {
    "version",       "scenario",      "variant",          "workload",       "seed",
    "loss",          "calls",         "app_bytes",        "sim_ns",         "goodput_bps",
    "lat_p50_us",    "lat_p99_us",    "lat_mean_us",      "chr",            "fallback_packets",
    "fallback_items", "evictions",    "frames_sent",      "frames_dropped", "loss_ratio",
    "jain",          "cells",         "decisions",        "tolerance",      "extra",
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string extra_text(const std::map<std::string, double>& m) {
  std::string s;
  for (const auto& [k, v] : m) {
    if (!s.empty()) s += ';';
    s += k + "=" + num(v);
  }
  return s;
}

}  // namespace

std::string row_id(const Row& r) {
  return r.scenario + "|" + r.variant + "|" + std::to_string(r.seed);
}

std::string csv_header() {
  std::string s;
  for (const char* c : kColumns) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s;
}

std::string csv_line(const Row& r) {
  std::ostringstream o;
  o << kReportVersion << ',' << r.scenario << ',' << r.variant << ',' << r.workload << ','
    << r.seed << ',' << num(r.loss) << ',' << r.calls << ',' << r.app_bytes << ',' << r.sim_ns
    << ',' << num(r.goodput_bps) << ',' << num(r.lat_p50_us) << ',' << num(r.lat_p99_us) << ','
    << num(r.lat_mean_us) << ',' << num(r.chr) << ',' << r.fallback_packets << ','
    << r.fallback_items << ',' << r.evictions << ',' << r.frames_sent << ',' << r.frames_dropped
    << ',' << num(r.loss_ratio) << ',' << num(r.jain) << ',' << r.cells << ',' << r.decisions
    << ',' << num(r.tolerance) << ',' << extra_text(r.extra);
  return o.str();
}

void write_report(const Report& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kConfigError, "cannot write " + path);
  out << csv_header() << '\n';
  for (const auto& row : r.rows) out << csv_line(row) << '\n';
  std::ofstream vals(path + ".values.csv");
  if (!vals) throw Error(Errc::kConfigError, "cannot write " + path + ".values.csv");
  vals << "row,key,value\n";
  for (const auto& [id, vs] : r.values) {
    for (const auto& [k, v] : vs) vals << id << ',' << k << ',' << num(v) << '\n';
  }
}

Report read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigError, "cannot read " + path);
  Report r;
  std::string line;
  std::getline(in, line);
  if (line != csv_header()) throw Error(Errc::kConfigError, path + ": unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != std::size(kColumns)) throw Error(Errc::kConfigError, path + ": bad row");
    if (std::stoi(f[0]) != kReportVersion) {
      throw Error(Errc::kConfigError, path + ": report version " + f[0]);
    }
    Row row;
    std::size_t i = 1;
    row.scenario = f[i++];
    row.variant = f[i++];
    row.workload = f[i++];
    row.seed = std::stoull(f[i++]);
    row.loss = std::stod(f[i++]);
    row.calls = std::stoull(f[i++]);
    row.app_bytes = std::stoull(f[i++]);
    row.sim_ns = std::stoll(f[i++]);
    row.goodput_bps = std::stod(f[i++]);
    row.lat_p50_us = std::stod(f[i++]);
    row.lat_p99_us = std::stod(f[i++]);
    row.lat_mean_us = std::stod(f[i++]);
    row.chr = std::stod(f[i++]);
    row.fallback_packets = std::stoull(f[i++]);
    row.fallback_items = std::stoull(f[i++]);
    row.evictions = std::stoull(f[i++]);
    row.frames_sent = std::stoull(f[i++]);
    row.frames_dropped = std::stoull(f[i++]);
    row.loss_ratio = std::stod(f[i++]);
    row.jain = std::stod(f[i++]);
    row.cells = std::stoull(f[i++]);
    row.decisions = std::stoull(f[i++]);
    row.tolerance = std::stod(f[i++]);
    for (const auto& kv : split(f[i], ';')) {
      const auto eq = kv.find('=');
      if (eq != std::string::npos) row.extra[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    r.rows.push_back(std::move(row));
  }
  std::ifstream vals(path + ".values.csv");
  if (vals) {
    std::getline(vals, line);
    while (std::getline(vals, line)) {
      // Keys may not contain commas; the row id has none either.
      const auto a = line.find(',');
      const auto b = line.rfind(',');
      if (a == std::string::npos || a == b) continue;
      r.values[line.substr(0, a)][line.substr(a + 1, b - a - 1)] = std::stod(line.substr(b + 1));
    }
  }
  return r;
}

VerifyResult verify(const Report& report, const Report& oracle) {
  VerifyResult res;
  auto fail = [&](const std::string& s) {
    res.ok = false;
    res.lines.push_back("FAIL " + s);
  };
  std::map<std::string, const Row*> by_workload;
  for (const auto& o : oracle.rows) by_workload[o.scenario + "|" + o.workload + "|" + std::to_string(o.seed)] = &o;

  for (const auto& r : report.rows) {
    const std::string id = row_id(r);
    const auto key = r.scenario + "|" + r.workload + "|" + std::to_string(r.seed);
    auto it = by_workload.find(key);
    if (it == by_workload.end()) {
      fail(id + ": no oracle row for workload " + r.workload);
      continue;
    }
    const Row& o = *it->second;
    const auto rv = report.values.find(id);
    const auto ov = oracle.values.find(row_id(o));
    const Values empty;
    const Values& a = rv == report.values.end() ? empty : rv->second;
    const Values& b = ov == oracle.values.end() ? empty : ov->second;
    std::uint64_t bad = 0;
    std::string first;
    for (const auto& [k, v] : b) {
      auto x = a.find(k);
      if (x == a.end() || std::abs(x->second - v) > r.tolerance) {
        if (bad++ == 0) {
          first = k + ": got " + (x == a.end() ? std::string("missing") : num(x->second)) +
                  " want " + num(v);
        }
      }
    }
    for (const auto& [k, v] : a) {
      if (!b.count(k) && bad++ == 0) first = k + ": not in oracle";
    }
    if (o.decisions != 0 && r.decisions != o.decisions) {
      if (bad++ == 0) {
        first = "decisions " + std::to_string(r.decisions) + " want " + std::to_string(o.decisions);
      }
    }
    if (auto v = r.extra.find("violations"); v != r.extra.end() && v->second != 0) {
      if (bad++ == 0) first = num(v->second) + " invariant violations";
    }
    if (bad) {
      fail(id + ": " + std::to_string(bad) + " mismatches; first " + first);
    } else {
      res.lines.push_back("ok   " + id + " (" + std::to_string(b.size()) + " values)");
    }
  }
  if (report.rows.empty()) fail("empty report");
  return res;
}

}  // namespace incnet::harness
