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

// Application registry. Owns gaid assignment and the static FCFS
// reservation of switch rows; a row spans all 32 segments.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "incnet/netfilter.hpp"
#include "incnet/switch.hpp"

namespace incnet::ctl {

struct MethodBinding {
  std::string method;
  nf::NetFilter filter;
  std::vector<int> list_nodes;  // resolved CntFwd endpoints
};

struct AppRequest {
  std::string app_name;
  std::vector<MethodBinding> methods;
  std::uint32_t cells = 0;  // memory request; rounded up to whole rows
  bool ecn_cell = false;    // one extra row holds the congestion cell
  std::uint32_t shadow_stride = 0;
  int server_node = sw::kNoNode;
  std::vector<int> group_nodes;
  std::int64_t now_ns = 0;
};

struct Registration {
  std::string app;
  std::map<std::string, std::uint32_t> gaids;  // by method
  std::uint32_t base_row = 0;
  std::uint32_t rows = 0;  // 0: no INC, everything falls back
  std::optional<std::uint32_t> ecn_cell;
  bool active = true;
  bool inc() const { return rows > 0; }
};

struct Notification {
  std::uint32_t gaid;
  std::string app;
  int server_node;
  // Register contents of the reclaimed rows, keyed by flat cell index;
  // only nonzero cells. Empty when the app still has an active method.
  std::map<std::uint32_t, std::int32_t> drained;
};

inline std::uint32_t rows_for(std::uint32_t cells) {
  return (cells + sw::kSegments - 1) / sw::kSegments;
}

class Controller {
 public:
  explicit Controller(std::vector<sw::SwitchState*> switches,
                      std::int64_t level1_ns = 1'000'000'000,
                      std::uint32_t row_budget = sw::kCellsPerSegment);

  // Throws Error{kDuplicateAppName}.
  Registration register_app(const AppRequest& req);
  // Single-method convenience form.
  Registration register_app(const nf::NetFilter& nf, std::uint32_t cells);
  void deregister_app(const std::string& app);

  // Level-1 timeout. Every gaid idle longer than level1 is reported once.
  // When all gaids of an app are idle its rows are drained, zeroed and
  // returned to the free pool; the app keeps running through fallback.
  std::vector<Notification> poll_timestamps(std::int64_t now_ns);

  const Registration* find(const std::string& app) const;
  std::uint32_t free_rows() const;
  std::uint32_t granted_rows() const;
  std::int64_t level1_ns() const { return level1_ns_; }
  std::string dump() const;  // JSON registry

 private:
  struct GaidState {
    std::string app;
    std::int64_t last_seen = 0;
    bool notified = false;
  };
  std::optional<std::uint32_t> reserve(std::uint32_t rows);
  void release(const Registration& r);
  std::int64_t last_seen(std::uint32_t gaid, std::int64_t fallback) const;

  std::vector<sw::SwitchState*> switches_;
  std::int64_t level1_ns_;
  std::uint32_t row_budget_;
  std::map<std::uint32_t, std::uint32_t> free_;  // base -> length
  std::map<std::string, Registration> apps_;
  std::map<std::uint32_t, GaidState> gaids_;
  std::map<std::uint32_t, int> servers_;
  std::uint32_t next_gaid_ = 1;
};

}  // namespace incnet::ctl
