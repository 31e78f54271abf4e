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

#include "incnet/netsim.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "incnet/errors.hpp"
#include "json.hpp"

namespace incnet::net {

void Simulator::at(Time t, std::function<void()> fn) {
  if (t < now_) t = now_;
  queue_.push({t, next_seq_++, std::move(fn)});
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; the callable is moved out through a copy
  // of the node that is popped immediately afterwards.
  Event e = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = e.t;
  ++executed_;
  e.fn();
  return true;
}

void Simulator::run_until(Time t) {
  while (!queue_.empty() && queue_.top().t <= t) step();
  if (now_ < t) now_ = t;
}

bool Simulator::run_while_not(const std::function<bool()>& pred, Time limit) {
  while (!pred()) {
    if (queue_.empty() || queue_.top().t > limit) return pred();
    step();
  }
  return true;
}

namespace {

using nlohmann::json;

LinkSpec link_from_json(const json& j, LinkSpec d) {
  for (const auto& [k, v] : j.items()) {
    if (k == "a" || k == "b") continue;
    if (k == "delay_us") {
      d.delay_us = v.get<double>();
    } else if (k == "gbps") {
      d.gbps = v.get<double>();
    } else if (k == "queue") {
      d.queue_pkts = v.get<std::uint32_t>();
    } else if (k == "ecn") {
      d.ecn_threshold = v.get<std::uint32_t>();
    } else if (k == "loss") {
      d.loss = v.get<double>();
    } else {
      throw Error(Errc::kConfigError, "unknown link field " + k);
    }
  }
  if (d.gbps <= 0 || d.delay_us < 0 || d.loss < 0 || d.loss > 1) {
    throw Error(Errc::kConfigError, "link parameters out of range");
  }
  return d;
}

}  // namespace

TopologySpec parse_topology(const std::string& text) {
  TopologySpec t;
  try {
    const json j = json::parse(text);
    LinkSpec defaults;
    if (j.contains("link_defaults")) defaults = link_from_json(j["link_defaults"], defaults);
    for (const auto& n : j.value("nodes", json::array())) {
      NodeSpec s;
      s.name = n.at("name").get<std::string>();
      s.is_switch = n.value("switch", false);
      s.inc = n.value("inc", false);
      t.nodes.push_back(s);
    }
    for (const auto& l : j.value("links", json::array())) {
      t.links.push_back({l.at("a").get<std::string>(), l.at("b").get<std::string>(),
                         link_from_json(l, defaults)});
    }
    t.clients = j.value("clients", std::vector<std::string>{});
    t.servers = j.value("servers", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(Errc::kConfigError, std::string("topology: ") + e.what());
  }
  return t;
}

TopologySpec load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_topology(ss.str());
}

TopologySpec single_switch(int hosts, const LinkSpec& edge) {
  TopologySpec t;
  t.nodes.push_back({"S0", true, true});
  for (int i = 0; i < hosts; ++i) {
    const std::string h = "h" + std::to_string(i);
    t.nodes.push_back({h, false, false});
    t.links.push_back({h, "S0", edge});
  }
  return t;
}

TopologySpec dumbbell(int left, int right, const LinkSpec& edge, const LinkSpec& core) {
  TopologySpec t;
  t.nodes.push_back({"S1", true, false});
  t.nodes.push_back({"S2", true, true});
  t.links.push_back({"S1", "S2", core});
  for (int i = 0; i < left + right; ++i) {
    const std::string h = "h" + std::to_string(i);
    t.nodes.push_back({h, false, false});
    t.links.push_back({h, i < left ? "S1" : "S2", edge});
  }
  return t;
}

Network::Network(Simulator& sim, const TopologySpec& spec, std::uint64_t seed)
    : sim_(sim), spec_(spec), nodes_(spec.nodes) {
  if (nodes_.empty() || spec.links.empty()) {
    throw Error(Errc::kDisconnectedTopology, "empty topology");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].name, static_cast<int>(i)).second) {
      throw Error(Errc::kConfigError, "duplicate node " + nodes_[i].name);
    }
  }
  std::mt19937_64 seeder(seed);
  for (const auto& l : spec.links) {
    const int a = node(l.a);
    const int b = node(l.b);
    for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
      link_index_[{x, y}] = static_cast<int>(links_.size());
      links_.push_back(Link{x, y, l.spec, {}, 0, std::mt19937_64(seeder()), {}});
    }
  }
  const int n = size();
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : links_) adj[l.a].push_back(l.b);
  for (auto& a : adj) std::sort(a.begin(), a.end());
  next_hop_.assign(n, std::vector<int>(n, -1));
  // BFS toward each destination; only switches relay.
  for (int d = 0; d < n; ++d) {
    std::vector<int> dist(n, -1);
    std::deque<int> q{d};
    dist[d] = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      if (u != d && !nodes_[u].is_switch) continue;
      for (int v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push_back(v);
        }
      }
    }
    for (int s = 0; s < n; ++s) {
      if (s == d || dist[s] < 0) continue;
      for (int v : adj[s]) {
        if (dist[v] == dist[s] - 1 && (v == d || nodes_[v].is_switch)) {
          next_hop_[s][d] = v;
          break;
        }
      }
    }
  }
  std::vector<int> hosts;
  for (int i = 0; i < n; ++i) {
    if (!nodes_[i].is_switch) hosts.push_back(i);
  }
  std::vector<int> cs = clients(), ss = servers();
  if (cs.empty()) cs = hosts;
  if (ss.empty()) ss = hosts;
  for (int c : cs) {
    for (int s : ss) {
      if (c != s && next_hop_[c][s] < 0) {
        throw Error(Errc::kDisconnectedTopology, name(c) + " cannot reach " + name(s));
      }
    }
  }
  hosts_.resize(n);
  hooks_.resize(n);
}

int Network::node(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(Errc::kConfigError, "unknown node " + name);
  return it->second;
}

std::vector<int> Network::clients() const {
  std::vector<int> out;
  for (const auto& c : spec_.clients) out.push_back(node(c));
  return out;
}

std::vector<int> Network::servers() const {
  std::vector<int> out;
  for (const auto& s : spec_.servers) out.push_back(node(s));
  return out;
}

std::vector<int> Network::inc_switches() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (nodes_[i].inc) out.push_back(i);
  }
  return out;
}

std::vector<int> Network::path_switches(int from, int to) const {
  std::vector<int> out;
  for (int u = next_hop_[from][to]; u >= 0 && u != to; u = next_hop_[u][to]) out.push_back(u);
  return out;
}

void Network::set_host_handler(int node, HostHandler h) { hosts_[node] = std::move(h); }
void Network::set_switch_hook(int node, SwitchHook h) { hooks_[node] = std::move(h); }

Network::Link& Network::link(int a, int b) { return links_[link_index_.at({a, b})]; }
const Network::Link& Network::link(int a, int b) const {
  return links_[link_index_.at({a, b})];
}

void Network::send(Frame f) {
  if (f.id == 0) f.id = next_frame_++;
  if (f.dst == f.src) {
    const int at = f.dst;
    sim_.after(0, [this, at, f = std::move(f)]() mutable { arrive(at, std::move(f)); });
    return;
  }
  const int hop = next_hop_[f.src][f.dst];
  if (hop < 0) return;
  transmit(f.src, hop, std::move(f));
}

void Network::forward(int at, Frame f) {
  if (f.id == 0) f.id = next_frame_++;
  if (f.dst == at) {
    arrive(at, std::move(f));
    return;
  }
  const int hop = next_hop_[at][f.dst];
  if (hop < 0) return;
  transmit(at, hop, std::move(f));
}

void Network::transmit(int from, int to, Frame f) {
  Link& l = link(from, to);
  const Time now = sim_.now();
  while (!l.tx_done.empty() && l.tx_done.front() <= now) l.tx_done.pop_front();
  const auto qlen = static_cast<std::uint32_t>(l.tx_done.size());
  const std::uint32_t bytes = f.wire_bytes();
  if (log_on_) log_.push_back({now, 'S', from, to, f.id, bytes});
  if (qlen >= l.spec.queue_pkts) {
    ++l.stats.queue_drops;
    if (log_on_) log_.push_back({now, 'Q', from, to, f.id, bytes});
    return;
  }
  ++l.stats.sent;
  l.stats.bytes += bytes;
  if (qlen > l.spec.ecn_threshold) {
    f.ce = true;
    ++l.stats.ce_marks;
  }
  f.qlen = qlen;
  const Time ser = static_cast<Time>(static_cast<double>(bytes) * 8.0 / l.spec.gbps);
  const Time start = std::max(now, l.busy_until);
  l.busy_until = start + ser;
  l.tx_done.push_back(l.busy_until);
  const bool lost = l.spec.loss > 0 &&
                    std::uniform_real_distribution<double>(0.0, 1.0)(l.rng) < l.spec.loss;
  if (lost) {
    ++l.stats.loss_drops;
    if (log_on_) log_.push_back({now, 'L', from, to, f.id, bytes});
    return;
  }
  const Time arrival = l.busy_until + static_cast<Time>(l.spec.delay_us * kUs);
  f.prev = from;
  sim_.at(arrival, [this, to, f = std::move(f)]() mutable { arrive(to, std::move(f)); });
}

void Network::arrive(int at, Frame f) {
  if (log_on_) log_.push_back({sim_.now(), 'R', f.prev, at, f.id, f.wire_bytes()});
  if (!nodes_[at].is_switch) {
    if (hosts_[at]) hosts_[at](std::move(f));
    return;
  }
  sim_.after(switch_delay_, [this, at, f = std::move(f)]() mutable {
    if (hooks_[at]) {
      hooks_[at](std::move(f));
    } else {
      forward(at, std::move(f));
    }
  });
}

void Network::inject_loss(int a, int b, double rate) {
  link(a, b).spec.loss = rate;
  link(b, a).spec.loss = rate;
}

void Network::set_loss_all(double rate) {
  for (auto& l : links_) l.spec.loss = rate;
}

const LinkStats& Network::link_stats(int a, int b) const { return link(a, b).stats; }

LinkStats Network::totals() const {
  LinkStats t;
  for (const auto& l : links_) {
    t.sent += l.stats.sent;
    t.queue_drops += l.stats.queue_drops;
    t.loss_drops += l.stats.loss_drops;
    t.ce_marks += l.stats.ce_marks;
    t.bytes += l.stats.bytes;
  }
  return t;
}

std::uint32_t Network::queue_len(int a, int b) const {
  const Link& l = link(a, b);
  std::uint32_t n = 0;
  for (Time t : l.tx_done) n += t > sim_.now() ? 1 : 0;
  return n;
}

void Network::write_log_csv(std::ostream& os) const {
  os << "time_ns,event,from,to,frame,bytes\n";
  for (const auto& r : log_) {
    os << r.t << ',' << r.kind << ',' << nodes_[r.from].name << ',' << nodes_[r.to].name << ','
       << r.frame << ',' << r.bytes << '\n';
  }
}

}  // namespace incnet::net
