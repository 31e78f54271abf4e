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

// RPC facade over the simulated network. A service is a schema plus one
// NetFilter per INC method; its IEDT fields travel as INC packets through
// the switch, everything else over a reliable plain channel.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "incnet/client_agent.hpp"
#include "incnet/controller.hpp"
#include "incnet/errors.hpp"
#include "incnet/iedt.hpp"
#include "incnet/netfilter.hpp"
#include "incnet/netsim.hpp"
#include "incnet/server_agent.hpp"
#include "incnet/switch.hpp"

namespace incnet::rpc {

struct ServiceDef {
  nf::ServiceSchema schema;
  std::map<std::string, nf::NetFilter> filters;  // by method

  // Reads <dir>/<schema_file> and the filter files it names.
  static ServiceDef load(const std::string& dir, const std::string& schema_file);
};

struct ServiceOptions {
  std::string name;  // instance name; defaults to the schema's service
  int server = -1;
  std::vector<int> clients;  // also the multicast group
  std::uint32_t w_max = 256;
  client::CcParams cc;
  server::CachePolicy policy = server::CachePolicy::kLru;
  std::uint32_t cache_cells = 4096;
  std::uint32_t pon_threshold = 5;
  net::Time cache_window_ns = 2 * net::kMs;
  std::uint32_t agg_ring_rows = 512;
  std::uint32_t counter_ring = 1024;
  std::optional<nf::ClearPolicy> clear_override;
  bool ecn_cell = true;
  bool inc = true;  // false: ask for no switch memory
  // Lock waiters start a fresh attempt after this many retransmissions.
  int lock_dup_retries = 0;
  // Voters also hand their ballot to the server after this many.
  int vote_dup_retries = 3;
};

struct RuntimeConfig {
  net::Time server_pkt_ns = 1'000;
  net::Time server_slot_ns = 100;
  net::Time plain_rto_ns = 4 * net::kMs;
  net::Time poll_period_ns = 250 * net::kMs;
  std::int64_t level1_ns = 5 * net::kSec;
  net::Time barrier_poll_ns = 20 * net::kUs;
  net::Time recirculation_ns = 500;
};

struct CallResult {
  bool ok = false;
  Errc error = Errc::kCancelled;
  std::string what;
  Message reply;
  net::Time start = 0;
  net::Time end = 0;
};

using Callback = std::function<void(const CallResult&)>;
using Handler = std::function<Message(const Message&)>;

struct AppStats {
  std::uint64_t calls = 0;
  std::uint64_t items = 0;           // INC-eligible values sent
  std::uint64_t fallback_items = 0;  // values handled in software
  std::uint64_t packets = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t fallback_packets = 0;
  std::uint64_t plain_messages = 0;
  std::uint64_t app_bytes = 0;
  std::uint64_t decisions = 0;
  std::uint64_t evictions = 0;
  double chr() const {
    return items == 0 ? 0.0 : 1.0 - static_cast<double>(fallback_items) / static_cast<double>(items);
  }
};

class Runtime {
 public:
  explicit Runtime(net::Network& net, RuntimeConfig cfg = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // Registers the service with the controller and sets up client flows.
  // Throws Error{kDuplicateAppName} or Error{kConfigError} when a filter
  // fails validation.
  void register_service(const ServiceDef& def, const ServiceOptions& opt);
  void serve(const std::string& service, const std::string& method, Handler h);

  // Throws Error{kServiceUnknown}. cb runs inside the simulation.
  void call(int client, const std::string& service, const std::string& method, Message req,
            Callback cb);
  // Runs the simulation until the call finishes or limit passes.
  CallResult call_sync(int client, const std::string& service, const std::string& method,
                       Message req, net::Time limit = 60 * net::kSec);

  // Process death: pending calls at or served by node fail with Cancelled.
  void kill(int node);

  net::Network& network();
  sw::SwitchState& switch_state();
  int switch_node() const;
  ctl::Controller& controller();
  const AppStats& stats(const std::string& service) const;
  // Every key of the service's INC map with its exact value.
  std::map<std::string, std::int64_t> map_snapshot(const std::string& service) const;
  const server::AddressMap* address_map(const std::string& service) const;
  // Physical switch cells reserved for the service.
  std::uint32_t reserved_cells(const std::string& service) const;
  // Cells holding aggregation data, shadow copies included.
  std::uint32_t data_cells(const std::string& service) const;
  bool inc_enabled(const std::string& service) const;
  std::size_t pending_calls() const;
  // Fresh packets the switch forwarded past a CntFwd threshold.
  std::uint64_t fresh_cntfwd_forwards() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace incnet::rpc
