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

#include "incnet/controller.hpp"

#include <algorithm>

#include "incnet/errors.hpp"
#include "json.hpp"

namespace incnet::ctl {

Controller::Controller(std::vector<sw::SwitchState*> switches, std::int64_t level1_ns,
                       std::uint32_t row_budget)
    : switches_(std::move(switches)),
      level1_ns_(level1_ns),
      row_budget_(std::min(row_budget, sw::kCellsPerSegment)) {
  if (row_budget_ > 0) free_[0] = row_budget_;
}

std::optional<std::uint32_t> Controller::reserve(std::uint32_t rows) {
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second < rows) continue;
    const std::uint32_t base = it->first;
    const std::uint32_t left = it->second - rows;
    free_.erase(it);
    if (left > 0) free_[base + rows] = left;
    return base;
  }
  return std::nullopt;
}

void Controller::release(const Registration& r) {
  if (r.rows == 0) return;
  auto [it, ok] = free_.emplace(r.base_row, r.rows);
  (void)ok;
  auto next = std::next(it);
  if (next != free_.end() && it->first + it->second == next->first) {
    it->second += next->second;
    free_.erase(next);
  }
  if (it != free_.begin()) {
    auto prev = std::prev(it);
    if (prev->first + prev->second == it->first) {
      prev->second += it->second;
      free_.erase(it);
    }
  }
}

Registration Controller::register_app(const AppRequest& req) {
  if (apps_.count(req.app_name)) {
    throw Error(Errc::kDuplicateAppName, req.app_name);
  }
  Registration r;
  r.app = req.app_name;
  std::uint32_t rows = rows_for(req.cells);
  if (rows > 0 && req.ecn_cell) ++rows;
  if (rows > 0) {
    if (auto base = reserve(rows)) {
      r.base_row = *base;
      r.rows = rows;
      if (req.ecn_cell) r.ecn_cell = sw::flat(0, r.base_row + rows - 1);
    }
  }
  for (const auto& m : req.methods) {
    const std::uint32_t gaid = next_gaid_++;
    r.gaids[m.method] = gaid;
    gaids_[gaid] = {r.app, req.now_ns, false};
    servers_[gaid] = req.server_node;
    if (!r.inc()) continue;
    sw::AppEntry e;
    e.base_row = r.base_row;
    e.reserved_rows = r.ecn_cell ? r.rows - 1 : r.rows;
    e.cfg = nf::pipeline_config(m.filter);
    e.server_node = req.server_node;
    e.group_nodes = req.group_nodes;
    e.list_nodes = m.list_nodes;
    e.ecn_cell = r.ecn_cell;
    e.shadow_stride = req.shadow_stride;
    // Only this gaid's entry is added; other apps and their registers are
    // untouched.
    for (auto* s : switches_) s->admission[gaid] = e;
  }
  apps_[r.app] = r;
  return r;
}

Registration Controller::register_app(const nf::NetFilter& filter, std::uint32_t cells) {
  AppRequest req;
  req.app_name = filter.app_name;
  req.methods.push_back({filter.app_name, filter, {}});
  req.cells = cells;
  return register_app(req);
}

void Controller::deregister_app(const std::string& app) {
  auto it = apps_.find(app);
  if (it == apps_.end()) return;
  const Registration& r = it->second;
  for (const auto& [method, gaid] : r.gaids) {
    for (auto* s : switches_) s->admission.erase(gaid);
    gaids_.erase(gaid);
    servers_.erase(gaid);
  }
  if (r.active) {
    for (auto* s : switches_) {
      for (std::uint32_t row = r.base_row; row < r.base_row + r.rows; ++row) {
        for (int seg = 0; seg < sw::kSegments; ++seg) s->cell(seg, row) = 0;
      }
    }
    release(r);
  }
  apps_.erase(it);
}

std::int64_t Controller::last_seen(std::uint32_t gaid, std::int64_t fallback) const {
  std::int64_t t = fallback;
  for (const auto* s : switches_) {
    auto it = s->admission.find(gaid);
    if (it != s->admission.end()) t = std::max(t, it->second.last_seen_ns);
  }
  return t;
}

std::vector<Notification> Controller::poll_timestamps(std::int64_t now_ns) {
  std::vector<Notification> out;
  for (auto& [gaid, g] : gaids_) {
    const std::int64_t seen = last_seen(gaid, g.last_seen);
    if (seen > g.last_seen) {
      g.last_seen = seen;
      g.notified = false;
    }
    if (g.notified || now_ns - g.last_seen <= level1_ns_) continue;
    g.notified = true;
    out.push_back({gaid, g.app, servers_[gaid], {}});
  }
  // Reclaim apps whose every method is idle.
  for (auto& n : out) {
    Registration& r = apps_.at(n.app);
    if (!r.active || !r.inc()) continue;
    const bool all_idle = std::all_of(r.gaids.begin(), r.gaids.end(), [&](const auto& kv) {
      return gaids_.at(kv.second).notified;
    });
    if (!all_idle) continue;
    for (auto* s : switches_) {
      for (std::uint32_t row = r.base_row; row < r.base_row + r.rows; ++row) {
        for (int seg = 0; seg < sw::kSegments; ++seg) {
          std::int32_t& c = s->cell(seg, row);
          if (c != 0 && !(r.ecn_cell && *r.ecn_cell == sw::flat(seg, row))) {
            n.drained[sw::flat(seg, row)] += c;
          }
          c = 0;
        }
      }
      for (const auto& [m, gaid] : r.gaids) {
        auto it = s->admission.find(gaid);
        if (it != s->admission.end()) it->second.registered = false;
      }
    }
    release(r);
    r.active = false;
  }
  return out;
}

const Registration* Controller::find(const std::string& app) const {
  auto it = apps_.find(app);
  return it == apps_.end() ? nullptr : &it->second;
}

std::uint32_t Controller::free_rows() const {
  std::uint32_t n = 0;
  for (const auto& [b, len] : free_) n += len;
  return n;
}

std::uint32_t Controller::granted_rows() const { return row_budget_ - free_rows(); }

std::string Controller::dump() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [name, r] : apps_) {
    nlohmann::json a;
    a["app"] = name;
    a["base_row"] = r.base_row;
    a["rows"] = r.rows;
    a["active"] = r.active;
    a["gaids"] = r.gaids;
    if (r.ecn_cell) a["ecn_cell"] = *r.ecn_cell;
    j.push_back(a);
  }
  return j.dump();
}

}  // namespace incnet::ctl
