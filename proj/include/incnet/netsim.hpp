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

// Discrete-event network: integer-nanosecond clock, store-and-forward links
// with serialization delay, tail-drop FIFO queues, seeded loss and ECN
// marking, shortest-path routing.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "incnet/wire.hpp"

namespace incnet::net {

using Time = std::int64_t;  // nanoseconds

inline constexpr Time kUs = 1'000;
inline constexpr Time kMs = 1'000'000;
inline constexpr Time kSec = 1'000'000'000;

class Simulator {
 public:
  Time now() const { return now_; }
  void at(Time t, std::function<void()> fn);
  void after(Time d, std::function<void()> fn) { at(now_ + d, std::move(fn)); }
  // Runs one event; false when the queue is empty.
  bool step();
  void run_until(Time t);
  // Runs until the queue drains or pred() turns true (checked after every
  // event). Returns pred().
  bool run_while_not(const std::function<bool()>& pred, Time limit);
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t executed() const { return executed_; }

 private:
  struct Event {
    Time t;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Time now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
};

struct LinkSpec {
  double delay_us = 2.0;
  double gbps = 100.0;
  std::uint32_t queue_pkts = 512;
  std::uint32_t ecn_threshold = 32;  // mark when the queue exceeds this
  double loss = 0.0;
};

struct NodeSpec {
  std::string name;
  bool is_switch = false;
  bool inc = false;  // runs the INC pipeline
};

struct LinkDecl {
  std::string a, b;
  LinkSpec spec;
};

struct TopologySpec {
  std::vector<NodeSpec> nodes;
  std::vector<LinkDecl> links;  // each declaration is two directed links
  std::vector<std::string> clients;
  std::vector<std::string> servers;
};

// JSON topology file; see README.md. Throws Error{kConfigError} on bad
// fields.
TopologySpec parse_topology(const std::string& json_text);
TopologySpec load_topology(const std::string& path);

// n hosts h0..h{n-1} on one INC switch S0.
TopologySpec single_switch(int hosts, const LinkSpec& edge);
// left hosts on S1, right hosts on S2, S1-S2 joined by core. S2 is the INC
// switch; servers should be placed on the right.
TopologySpec dumbbell(int left, int right, const LinkSpec& edge, const LinkSpec& core);

inline constexpr std::uint32_t kFrameOverhead = 46;  // L2-L4 headers

struct Frame {
  int src = -1;
  int dst = -1;
  bool inc = false;         // INC protocol frame (switches decode it)
  wire::Bytes data;
  std::uint32_t extra_bytes = 0;  // modeled size beyond data
  bool ce = false;                // ECN congestion experienced
  std::uint32_t qlen = 0;         // queue length seen on the last hop
  int prev = -1;                  // last node traversed
  std::uint64_t id = 0;
  std::uint32_t wire_bytes() const {
    return static_cast<std::uint32_t>(data.size()) + extra_bytes + kFrameOverhead;
  }
};

struct LinkStats {
  std::uint64_t sent = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t loss_drops = 0;
  std::uint64_t ce_marks = 0;
  std::uint64_t bytes = 0;
};

struct LogRecord {
  Time t;
  char kind;  // 'S' send, 'Q' queue drop, 'L' loss, 'R' receive
  int from, to;
  std::uint64_t frame;
  std::uint32_t bytes;
};

class Network {
 public:
  using HostHandler = std::function<void(Frame&&)>;
  // Called when a frame reaches a switch whose hook is set; the hook decides
  // what to forward.
  using SwitchHook = std::function<void(Frame&&)>;

  // Throws Error{kDisconnectedTopology} when the spec is empty or some
  // client cannot reach some server.
  Network(Simulator& sim, const TopologySpec& spec, std::uint64_t seed);

  Simulator& sim() { return sim_; }
  int node(const std::string& name) const;
  const std::string& name(int node) const { return nodes_[node].name; }
  bool is_switch(int node) const { return nodes_[node].is_switch; }
  bool is_inc(int node) const { return nodes_[node].inc; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const TopologySpec& spec() const { return spec_; }
  std::vector<int> clients() const;
  std::vector<int> servers() const;
  std::vector<int> inc_switches() const;
  int next_hop(int from, int dst) const { return next_hop_[from][dst]; }
  // Switch nodes on the route between two hosts, in order.
  std::vector<int> path_switches(int from, int to) const;

  void set_host_handler(int node, HostHandler h);
  void set_switch_hook(int node, SwitchHook h);
  void set_switch_delay(Time d) { switch_delay_ = d; }

  // Host transmit. Frames to self are delivered immediately.
  void send(Frame f);
  // Forward from a switch toward f.dst.
  void forward(int at, Frame f);

  void inject_loss(int a, int b, double rate);
  void set_loss_all(double rate);

  const LinkStats& link_stats(int a, int b) const;
  LinkStats totals() const;
  std::uint32_t queue_len(int a, int b) const;

  void enable_log(bool on) { log_on_ = on; }
  const std::vector<LogRecord>& log() const { return log_; }
  void write_log_csv(std::ostream& os) const;

 private:
  struct Link {
    int a, b;
    LinkSpec spec;
    std::deque<Time> tx_done;  // completion times of queued frames
    Time busy_until = 0;
    std::mt19937_64 rng;
    LinkStats stats;
  };
  void transmit(int from, int to, Frame f);
  void arrive(int at, Frame f);
  Link& link(int a, int b);
  const Link& link(int a, int b) const;

  Simulator& sim_;
  TopologySpec spec_;
  std::vector<NodeSpec> nodes_;
  std::map<std::string, int> index_;
  std::vector<Link> links_;
  std::map<std::pair<int, int>, int> link_index_;
  std::vector<std::vector<int>> next_hop_;
  std::vector<HostHandler> hosts_;
  std::vector<SwitchHook> hooks_;
  Time switch_delay_ = 500;
  std::uint64_t next_frame_ = 1;
  bool log_on_ = false;
  std::vector<LogRecord> log_;
};

}  // namespace incnet::net
