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

#include "incnet/rpc.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <deque>
#include <limits>
#include <set>

namespace incnet::rpc {

namespace {

constexpr std::int32_t kMax = std::numeric_limits<std::int32_t>::max();
constexpr std::int32_t kMin = std::numeric_limits<std::int32_t>::min();

enum class Kind { kAggregate, kAccumulate, kLookup, kTestAndSet, kRelease, kQuorum, kPlain };

std::string field_of(const std::string& path) {
  const auto dot = path.find('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

const nf::FieldDesc* field_desc(const nf::MessageDesc* m, const std::string& name) {
  if (!m) return nullptr;
  for (const auto& f : m->fields) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Kind classify(const nf::NetFilter& f, const nf::ServiceSchema& s) {
  if (!f.add_to.empty()) {
    const auto* fd = s.resolve(f.add_to);
    if (fd && nf::is_array(fd->type) && f.cntfwd.enabled()) return Kind::kAggregate;
    return Kind::kAccumulate;
  }
  if (!f.get.empty()) return Kind::kLookup;
  if (f.cntfwd.enabled()) return f.cntfwd.threshold == 1 ? Kind::kTestAndSet : Kind::kQuorum;
  if (f.clear != nf::ClearPolicy::kNop) return Kind::kRelease;
  return Kind::kPlain;
}

std::int32_t saturate(std::int64_t v) {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, kMin, kMax));
}

// Keys of a map-valued field as strings.
std::vector<std::pair<std::string, std::int64_t>> map_items(const IEDTValue& v) {
  std::vector<std::pair<std::string, std::int64_t>> out;
  if (const auto* sm = std::get_if<StrIntMap>(&v)) {
    for (const auto& [k, x] : *sm) out.emplace_back(k, x);
  } else if (const auto* im = std::get_if<IntIntMap>(&v)) {
    for (const auto& [k, x] : *im) out.emplace_back(std::to_string(k), x);
  }
  return out;
}

bool has_opaque(const Message& m) {
  return std::any_of(m.fields.begin(), m.fields.end(),
                     [](const auto& kv) { return std::holds_alternative<Opaque>(kv.second); });
}

}  // namespace

ServiceDef ServiceDef::load(const std::string& dir, const std::string& schema_file) {
  ServiceDef d;
  d.schema = nf::load_schema(dir + "/" + schema_file);
  for (const auto& m : d.schema.methods) {
    if (!m.filter.empty()) d.filters[m.name] = nf::load_netfilter(dir + "/" + m.filter);
  }
  return d;
}

struct Outgoing {
  std::uint64_t call = 0;
  int method = 0;
  Kind kind = Kind::kPlain;
  client::StreamPacket sp;
  std::vector<std::int64_t> exact;  // original values per slot
  std::vector<std::string> exact_names;
  std::shared_ptr<bool> unit = std::make_shared<bool>(false);
  std::uint32_t seq = 0;
  bool sent = false;
  bool acked = false;
  bool abandoned = false;
  int retries = 0;
  std::uint64_t gen = 0;
  std::uint32_t chunk = 0;
  bool agg_fallback = false;
  std::uint32_t ballot = 0;
  bool delegated = false;
};
using OutPtr = std::shared_ptr<Outgoing>;

struct AggClient {
  std::uint32_t next_chunk = 0;
  std::vector<char> done;
  std::map<std::uint32_t, OutPtr> by_chunk;
  std::set<std::uint32_t> in_fallback;
  std::vector<std::array<std::int64_t, wire::kSlots>> snapshot;  // lazy, per ring row
};

struct ClientState {
  int node = -1;
  std::uint16_t id = 0;
  client::FlowState flow;
  std::deque<OutPtr> queue;
  std::map<std::uint32_t, OutPtr> inflight;
  std::map<int, AggClient> agg;
  std::map<std::uint32_t, std::int64_t> decisions;
  std::map<std::uint32_t, std::vector<OutPtr>> vote_wait;
  bool dead = false;
  ClientState(int n, std::uint16_t i, client::FlowState f) : node(n), id(i), flow(std::move(f)) {}
};

struct MethodState {
  std::string name;
  std::uint8_t index = 0;
  Kind kind = Kind::kPlain;
  nf::NetFilter filter;
  bool has_filter = false;
  std::uint32_t gaid = 0;
  const nf::MessageDesc* req = nullptr;
  const nf::MessageDesc* rep = nullptr;
  Handler handler;
  std::uint32_t ring_base = 0;   // absolute row
  std::uint32_t ring_stride = 0; // chunks between reuses of a counter-free row
  std::uint32_t data_rows = 0;
  std::uint32_t counter_base = 0;

  struct Part {
    std::vector<std::int64_t> values;
    std::uint32_t seq = 0;
  };
  struct Chunk {
    std::map<std::uint16_t, Part> parts;
    std::optional<std::vector<std::int64_t>> result;
  };
  std::map<std::uint32_t, Chunk> fallback;
  std::map<std::uint32_t, std::array<std::int32_t, wire::kSlots>> backups;
  std::optional<std::uint32_t> newest_backup;
  std::optional<std::uint16_t> reply_srrt;  // server stream for clearing replies
  std::uint32_t reply_w = 0;
  struct Ballot {
    std::set<std::uint16_t> voters;
    bool decided = false;
    std::int64_t value = 0;
  };
  std::map<std::uint32_t, Ballot> ballots;
};

struct App {
  std::string name;
  ServiceDef def;
  ServiceOptions opt;
  ctl::Registration reg;
  bool inc = false;
  std::vector<MethodState> methods;
  std::map<std::string, int> by_name;
  std::unique_ptr<server::AddressMap> amap;
  server::ShadowStore store;
  server::DedupFilter dedup;
  std::uint32_t map_base = 0;
  std::uint32_t map_rows = 0;
  std::vector<std::unique_ptr<ClientState>> clients;
  std::map<int, int> client_of_node;
  std::set<std::uint32_t> pending_evict;
  std::set<std::uint32_t> make_software;
  std::vector<std::uint32_t> pending_install;
  bool barrier = false;
  std::map<std::string, std::int64_t> soft_locks;
  AppStats stats;
  bool server_dead = false;
};

struct Call {
  std::uint64_t id = 0;
  int client_node = -1;
  App* app = nullptr;
  int method = 0;
  Message req;
  Callback cb;
  net::Time start = 0;
  int units = 0;
  bool finished = false;
  Message reply;
  std::uint32_t first_chunk = 0;
  std::vector<std::int64_t> agg;
  bool fp = false;
  std::map<std::string, std::int64_t> lookup;
  std::map<std::uint32_t, std::int64_t> decided;
  std::uint64_t item_bytes = 0;
};

struct Runtime::Impl {
  net::Network& net;
  net::Simulator& sim;
  RuntimeConfig cfg;
  int sw_node = -1;
  sw::SwitchState sw;
  std::unique_ptr<ctl::Controller> ctl;
  server::RegisterAccess regs;
  std::map<std::string, std::unique_ptr<App>> apps;
  std::map<std::uint32_t, std::pair<App*, int>> by_gaid;
  std::map<std::uint64_t, std::unique_ptr<Call>> calls;
  std::uint64_t next_call = 1;
  std::map<int, net::Time> cpu_busy;
  std::set<int> dead;
  std::uint64_t fresh_fwd = 0;
  bool poll_armed = false;

  struct PlainPending {
    int from, to;
    std::uint32_t bytes;
    std::function<void()> deliver;
  };
  std::map<std::uint64_t, PlainPending> plain_pending;
  std::set<std::uint64_t> plain_seen;
  std::uint64_t next_plain = 1;

  Impl(net::Network& n, RuntimeConfig c) : net(n), sim(n.sim()), cfg(c) {
    const auto inc = net.inc_switches();
    std::vector<sw::SwitchState*> switches;
    if (!inc.empty()) {
      sw_node = inc.front();
      switches.push_back(&sw);
      for (const auto& l : net.spec().links) {
        if (l.a == net.name(sw_node) || l.b == net.name(sw_node)) {
          sw.ecn_threshold = l.spec.ecn_threshold;
          break;
        }
      }
      net.set_switch_hook(sw_node, [this](net::Frame&& f) { on_switch(std::move(f)); });
    }
    ctl = std::make_unique<ctl::Controller>(switches, cfg.level1_ns);
    regs.read = [this](std::uint32_t i) { return sw.registers[i]; };
    regs.write = [this](std::uint32_t i, std::int32_t v) { sw.registers[i] = v; };
    for (int i = 0; i < net.size(); ++i) {
      if (net.is_switch(i)) continue;
      net.set_host_handler(i, [this, i](net::Frame&& f) { on_host(i, std::move(f)); });
    }
  }

  net::Time now() const { return sim.now(); }

  // ---- switch glue ------------------------------------------------------

  void on_switch(net::Frame&& f) {
    if (!f.inc) {
      net.forward(sw_node, std::move(f));
      return;
    }
    bool elided = false;
    wire::Packet p;
    try {
      p = wire::decode_packet(f.data, &elided);
    } catch (const Error&) {
      ++sw.stats.malformed;
      return;
    }
    const auto before = sw.stats.cntfwd_forwards;
    auto r = sw::process_packet(std::move(p), sw, f.src, now(), f.qlen);
    if (r.fresh && sw.stats.cntfwd_forwards > before) ++fresh_fwd;
    switch (r.kind) {
      case sw::ProcessResult::kForwardPlain:
        net.forward(sw_node, std::move(f));
        return;
      case sw::ProcessResult::kDrop:
        return;
      case sw::ProcessResult::kEmit:
        for (auto& e : r.out) {
          net::Frame g;
          g.src = f.src;
          g.dst = e.node == sw::kNoNode ? f.dst : e.node;
          g.inc = true;
          g.data = wire::encode_packet(e.pkt, elided && e.pkt.keys_contiguous());
          if (r.recirculated) {
            // One more pipeline pass before the packet leaves.
            sim.after(cfg.recirculation_ns, [this, g = std::move(g)]() mutable {
              net.forward(sw_node, std::move(g));
            });
          } else {
            net.forward(sw_node, std::move(g));
          }
        }
        return;
    }
  }

  void send_inc(int from, int to, const wire::Packet& p, bool elide) {
    net::Frame f;
    f.src = from;
    f.dst = to;
    f.inc = true;
    f.data = wire::encode_packet(p, elide);
    net.send(std::move(f));
  }

  // ---- hosts --------------------------------------------------------------

  void on_host(int node, net::Frame&& f) {
    if (dead.count(node)) return;
    if (!f.inc) {
      plain_receive(node, f);
      return;
    }
    wire::Packet p;
    Meta m;
    try {
      p = wire::decode_packet(f.data);
      m = decode_meta(p.payload);
    } catch (const Error&) {
      return;
    }
    auto it = by_gaid.find(p.gaid);
    if (it == by_gaid.end()) return;
    App& a = *it->second.first;
    const int mi = it->second.second;
    if (node == a.opt.server && !p.has(wire::kIsSA)) {
      server_enqueue(a, mi, std::move(p), std::move(m));
    } else {
      client_receive(a, mi, node, p, m, f.ce);
    }
  }

  void on_cpu(int node, net::Time cost, std::function<void()> fn) {
    net::Time& busy = cpu_busy[node];
    busy = std::max(busy, now()) + cost;
    sim.at(busy, [this, node, fn = std::move(fn)] {
      if (!dead.count(node)) fn();
    });
  }

  // ---- plain channel ------------------------------------------------------

  static constexpr std::uint32_t kPlainHeader = 10;

  void send_plain(int from, int to, std::uint32_t bytes, std::function<void()> deliver) {
    const std::uint64_t id = next_plain++;
    plain_pending[id] = {from, to, bytes, std::move(deliver)};
    plain_tx(id);
  }

  static wire::Bytes plain_header(std::uint64_t id, std::uint8_t type) {
    wire::Bytes b{'P', type};
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(id >> (8 * i)));
    return b;
  }

  void plain_tx(std::uint64_t id) {
    auto it = plain_pending.find(id);
    if (it == plain_pending.end()) return;
    const auto& pp = it->second;
    if (dead.count(pp.from) || dead.count(pp.to)) {
      plain_pending.erase(it);
      return;
    }
    net::Frame f;
    f.src = pp.from;
    f.dst = pp.to;
    f.data = plain_header(id, 0);
    f.extra_bytes = pp.bytes;
    net.send(std::move(f));
    sim.after(cfg.plain_rto_ns, [this, id] { plain_tx(id); });
  }

  void plain_receive(int node, const net::Frame& f) {
    if (f.data.size() != kPlainHeader || f.data[0] != 'P') return;
    std::uint64_t id = 0;
    for (int i = 0; i < 8; ++i) id |= static_cast<std::uint64_t>(f.data[2 + i]) << (8 * i);
    if (f.data[1] == 1) {
      plain_pending.erase(id);
      return;
    }
    net::Frame ack;
    ack.src = node;
    ack.dst = f.src;
    ack.data = plain_header(id, 1);
    net.send(std::move(ack));
    if (!plain_seen.insert(id).second) return;
    auto it = plain_pending.find(id);
    if (it == plain_pending.end()) return;
    on_cpu(node, cfg.server_pkt_ns, it->second.deliver);
  }

  // ---- registration -------------------------------------------------------

  void register_service(const ServiceDef& def, const ServiceOptions& opt_in) {
    auto app = std::make_unique<App>();
    App& a = *app;
    a.def = def;
    a.opt = opt_in;
    a.name = opt_in.name.empty() ? def.schema.service : opt_in.name;
    if (apps.count(a.name)) throw Error(Errc::kDuplicateAppName, a.name);
    if (a.opt.server < 0 || net.is_switch(a.opt.server)) {
      throw Error(Errc::kConfigError, "service needs a server host");
    }
    if (sw_node < 0) a.opt.inc = false;

    bool needs_map = false;
    int shadow_aggs = 0;
    const ServiceDef& d = a.def;
    for (const auto& md : d.schema.methods) {
      MethodState ms;
      ms.name = md.name;
      ms.index = static_cast<std::uint8_t>(a.methods.size());
      ms.req = d.schema.message(md.request);
      ms.rep = d.schema.message(md.reply);
      auto fit = d.filters.find(md.name);
      if (fit != d.filters.end()) {
        ms.filter = fit->second;
        ms.has_filter = true;
        const auto v = nf::validate(ms.filter, d.schema,
                                    nf::Deployment{static_cast<int>(a.opt.clients.size())});
        if (!v.empty()) throw Error(Errc::kConfigError, md.name + ": " + v.front().detail);
        ms.kind = classify(ms.filter, d.schema);
        if (ms.kind == Kind::kAggregate) {
          if (a.opt.clear_override) ms.filter.clear = *a.opt.clear_override;
          if (ms.filter.cntfwd.threshold != a.opt.clients.size()) {
            throw Error(Errc::kConfigError, md.name + ": aggregation threshold must equal the group size");
          }
          if (ms.filter.clear == nf::ClearPolicy::kShadow) ++shadow_aggs;
        }
        if (ms.kind == Kind::kQuorum && ms.filter.cntfwd.threshold > a.opt.clients.size()) {
          throw Error(Errc::kConfigError, md.name + ": quorum larger than the group");
        }
        if (ms.kind == Kind::kAccumulate || ms.kind == Kind::kLookup ||
            ms.kind == Kind::kTestAndSet || ms.kind == Kind::kRelease) {
          needs_map = true;
        }
      }
      a.by_name[ms.name] = ms.index;
      a.methods.push_back(std::move(ms));
    }
    if (shadow_aggs > 1) throw Error(Errc::kConfigError, "at most one shadow-cleared method");

    // Row layout relative to the reservation: aggregation rings first (the
    // shadow partner is computed from the reservation base), then the map,
    // then counter rings.
    std::uint32_t rows = 0;
    const std::uint32_t counter_rows = (a.opt.counter_ring + sw::kSegments - 1) / sw::kSegments;
    std::uint32_t stride = 0;
    for (auto& ms : a.methods) {
      if (ms.kind != Kind::kAggregate) continue;
      ms.ring_base = rows;
      ms.ring_stride = a.opt.agg_ring_rows;
      ms.data_rows = a.opt.agg_ring_rows * (ms.filter.clear == nf::ClearPolicy::kShadow ? 2 : 1);
      if (ms.filter.clear == nf::ClearPolicy::kShadow) stride = a.opt.agg_ring_rows;
      rows += ms.data_rows;
    }
    if (needs_map) {
      a.map_base = rows;
      a.map_rows = (a.opt.cache_cells + sw::kSegments - 1) / sw::kSegments;
      rows += a.map_rows;
    }
    for (auto& ms : a.methods) {
      if (ms.kind != Kind::kAggregate && ms.kind != Kind::kQuorum) continue;
      ms.counter_base = rows;
      rows += counter_rows;
    }

    ctl::AppRequest req;
    req.app_name = a.name;
    req.cells = a.opt.inc ? rows * sw::kSegments : 0;
    req.ecn_cell = a.opt.ecn_cell;
    req.shadow_stride = stride;
    req.server_node = a.opt.server;
    req.group_nodes = a.opt.clients;
    req.now_ns = now();
    for (auto& ms : a.methods) {
      if (!ms.has_filter) continue;
      ctl::MethodBinding b{ms.name, ms.filter, {}};
      for (const auto& e : ms.filter.cntfwd.endpoints) b.list_nodes.push_back(net.node(e));
      req.methods.push_back(std::move(b));
    }
    a.reg = ctl->register_app(req);
    a.inc = a.reg.inc();
    for (auto& ms : a.methods) {
      if (!ms.has_filter) continue;
      ms.gaid = a.reg.gaids.at(ms.name);
      by_gaid[ms.gaid] = {&a, ms.index};
      ms.ring_base += a.reg.base_row;
      ms.counter_base += a.reg.base_row;
    }
    a.map_base += a.reg.base_row;

    // Client flows. If the switch cannot give every client a bitmap slot the
    // whole service runs through the server.
    std::vector<client::FlowState> flows;
    if (a.inc) {
      flows = client::establish_connections(&sw, static_cast<int>(a.opt.clients.size()),
                                            a.opt.w_max, a.opt.cc);
      const bool all = std::all_of(flows.begin(), flows.end(),
                                   [](const auto& f) { return f.inc(); });
      if (!all) {
        for (const auto& f : flows) {
          if (f.srrt()) sw::release_srrt(sw, *f.srrt());
        }
        set_no_inc(a);
      }
    }
    if (!a.inc) {
      flows.clear();
      for (std::size_t i = 0; i < a.opt.clients.size(); ++i) {
        flows.emplace_back(std::nullopt, a.opt.w_max, a.opt.cc);
      }
    }
    if (a.inc) {
      for (auto& ms : a.methods) {
        if (ms.kind != Kind::kAggregate || ms.filter.clear != nf::ClearPolicy::kCopy) continue;
        ms.reply_w = 2 * ms.ring_stride;
        ms.reply_srrt = sw::allocate_srrt(sw, ms.reply_w, true);
      }
    }
    for (std::size_t i = 0; i < a.opt.clients.size(); ++i) {
      const int node = a.opt.clients[i];
      if (node == a.opt.server) throw Error(Errc::kConfigError, "server cannot be its own client");
      a.client_of_node[node] = static_cast<int>(i);
      a.clients.push_back(
          std::make_unique<ClientState>(node, static_cast<std::uint16_t>(i), std::move(flows[i])));
    }
    a.amap = std::make_unique<server::AddressMap>(a.inc ? a.map_base : 0,
                                                  a.inc ? a.map_rows * sw::kSegments : 0,
                                                  a.opt.policy, a.opt.pon_threshold);
    App* ap = &a;
    apps[a.name] = std::move(app);
    if (a.inc && needs_map && a.opt.policy == server::CachePolicy::kLru) {
      sim.after(a.opt.cache_window_ns, [this, ap] { cache_window(*ap); });
    }
    if (!poll_armed && sw_node >= 0) {
      poll_armed = true;
      sim.after(cfg.poll_period_ns, [this] { poll(); });
    }
  }

  void set_no_inc(App& a) {
    a.inc = false;
    for (const auto& ms : a.methods) {
      auto it = sw.admission.find(ms.gaid);
      if (ms.has_filter && it != sw.admission.end()) it->second.registered = false;
    }
  }

  // ---- periodic work ------------------------------------------------------

  void poll() {
    for (auto& n : ctl->poll_timestamps(now())) {
      auto it = apps.find(n.app);
      if (it == apps.end()) continue;
      App& a = *it->second;
      if (!a.inc || n.drained.empty()) {
        if (a.inc && !ctl->find(a.name)->active) set_no_inc(a);
        continue;
      }
      for (const auto& [cell, v] : n.drained) {
        const int seg = static_cast<int>(cell / sw::kCellsPerSegment);
        const std::uint32_t row = cell % sw::kCellsPerSegment;
        if (auto owner = a.amap->owner({seg, row})) {
          a.store.add(a.amap->entry(*owner)->name, v);
        }
      }
      a.amap->unmap_all();
      set_no_inc(a);
    }
    sim.after(cfg.poll_period_ns, [this] { poll(); });
  }

  void cache_window(App& a) {
    if (a.inc && !a.barrier && !a.server_dead) {
      auto plan = a.amap->cache_sweep();
      for (auto l : plan.evict) {
        a.amap->hold(l);
        a.pending_evict.insert(l);
      }
      a.pending_install = plan.install;
      if (!plan.evict.empty() || !plan.install.empty()) start_barrier(a);
    }
    sim.after(a.opt.cache_window_ns, [this, &a] { cache_window(a); });
  }

  void start_barrier(App& a) {
    if (a.barrier) return;
    a.barrier = true;
    barrier_tick(a);
  }

  bool references(const Outgoing& o, const std::set<std::uint32_t>& cells) const {
    if (o.sp.pkt.has(wire::kIsCross)) return false;
    for (int i = 0; i < wire::kSlots; ++i) {
      if (o.sp.pkt.enabled(i) && cells.count(sw::flat(i, o.sp.pkt.slots[i].key))) return true;
    }
    return false;
  }

  // Eviction waits until no packet built against the old mapping can still
  // reach the switch.
  void barrier_tick(App& a) {
    std::set<std::uint32_t> cells;
    for (auto l : a.pending_evict) {
      const auto* e = a.amap->entry(l);
      if (e && e->cell) cells.insert(a.amap->cell(*e->cell).flat());
    }
    bool busy = false;
    for (const auto& c : a.clients) {
      for (const auto& [seq, o] : c->inflight) busy = busy || (o->kind != Kind::kAggregate && references(*o, cells));
      for (const auto& o : c->queue) busy = busy || (!o->acked && o->kind != Kind::kAggregate && references(*o, cells));
      if (busy) break;
    }
    if (busy) {
      sim.after(cfg.barrier_poll_ns, [this, &a] { barrier_tick(a); });
      return;
    }
    for (auto l : a.pending_evict) {
      server::drain(*a.amap, a.store, regs, l);
      ++a.stats.evictions;
      if (a.make_software.count(l)) a.amap->mark_software(l);
    }
    for (auto l : a.pending_install) {
      const auto* e = a.amap->entry(l);
      if (e && !e->software) server::install_key(*a.amap, a.store, regs, l);
    }
    a.pending_evict.clear();
    a.make_software.clear();
    a.pending_install.clear();
    a.barrier = false;
  }

  void schedule_software(App& a, std::uint32_t laddr) {
    a.amap->hold(laddr);
    a.pending_evict.insert(laddr);
    a.make_software.insert(laddr);
    start_barrier(a);
  }

  // ---- client side --------------------------------------------------------

  void pump(App& a, ClientState& c) {
    while (!c.queue.empty() && !c.dead) {
      OutPtr o = c.queue.front();
      if (o->acked) {
        c.queue.pop_front();
        continue;
      }
      if (!c.flow.can_send()) break;
      if (o->kind == Kind::kAggregate && !o->agg_fallback && a.inc) {
        const auto& ms = a.methods[o->method];
        const auto& ag = c.agg[o->method];
        if (o->chunk >= ms.ring_stride) {
          const std::uint32_t prev = o->chunk - ms.ring_stride;
          if (prev >= ag.done.size() || !ag.done[prev]) break;
        }
      }
      c.queue.pop_front();
      transmit(a, c, o);
    }
  }

  void transmit(App& a, ClientState& c, const OutPtr& o) {
    o->seq = c.flow.stamp(o->sp.pkt, now());
    o->sent = true;
    c.inflight[o->seq] = o;
    ++a.stats.packets;
    send_inc(c.node, a.opt.server, o->sp.pkt, o->sp.elide);
    arm(a, c, o);
  }

  void arm(App& a, ClientState& c, const OutPtr& o) {
    const std::uint64_t gen = ++o->gen;
    App* ap = &a;
    ClientState* cp = &c;
    sim.after(c.flow.rto(), [this, ap, cp, o, gen] { on_timeout(*ap, *cp, o, gen); });
  }

  void on_timeout(App& a, ClientState& c, const OutPtr& o, std::uint64_t gen) {
    if (o->acked || o->abandoned || o->gen != gen || c.dead) return;
    ++o->retries;
    if (o->kind == Kind::kTestAndSet && a.inc && !o->sp.pkt.has(wire::kIsCross) &&
        o->retries > a.opt.lock_dup_retries) {
      // The counter only moves for fresh packets: retry with a new seq.
      o->abandoned = true;
      c.flow.resent(o->seq, now());
      c.flow.on_ack(o->seq, now(), false);
      c.inflight.erase(o->seq);
      auto n = std::make_shared<Outgoing>(*o);
      n->sent = false;
      n->abandoned = false;
      n->retries = 0;
      n->gen = 0;
      c.queue.push_back(n);
      pump(a, c);
      return;
    }
    if (o->kind == Kind::kQuorum && a.inc && !o->delegated && o->retries == a.opt.vote_dup_retries) {
      // Same seq, so no new window slot; the switch hands it to the server.
      o->delegated = true;
      o->sp.pkt.set(wire::kIsCross);
      o->sp.pkt.set(wire::kIsCnf, false);
    }
    c.flow.resent(o->seq, now());
    ++a.stats.retransmissions;
    send_inc(c.node, a.opt.server, o->sp.pkt, o->sp.elide);
    arm(a, c, o);
    pump(a, c);
  }

  void ack(App& a, ClientState& c, std::uint32_t seq, bool ecn) {
    auto it = c.inflight.find(seq);
    if (it == c.inflight.end()) return;
    OutPtr o = it->second;
    c.inflight.erase(it);
    o->acked = true;
    c.flow.on_ack(seq, now(), ecn);
    pump(a, c);
  }

  void unit_done(const Outgoing& o) {
    if (*o.unit) return;
    *o.unit = true;
    auto it = calls.find(o.call);
    if (it == calls.end()) return;
    --it->second->units;
    maybe_finish(*it->second);
  }

  void client_receive(App& a, int mi, int node, wire::Packet& p, const Meta& m, bool ce) {
    auto cit = a.client_of_node.find(node);
    if (cit == a.client_of_node.end()) return;
    ClientState& c = *a.clients[cit->second];
    MethodState& ms = a.methods[mi];
    const bool ecn = ce || p.has(wire::kEcn);
    if (ms.kind == Kind::kAggregate) {
      agg_result(a, ms, c, p, m, ecn);
      return;
    }
    if (m.client != c.id) return;
    auto it = c.inflight.find(p.seq);
    if (it == c.inflight.end()) return;
    OutPtr o = it->second;
    if (ms.kind == Kind::kQuorum) return;  // decided over the plain channel
    if (ms.kind == Kind::kLookup) {
      auto call = calls.find(o->call);
      if (call != calls.end()) {
        for (int i = 0; i < wire::kSlots; ++i) {
          if (!o->sp.pkt.enabled(i) || o->exact_names[i].empty()) continue;
          const bool wide = m.kind == Meta::kFallback && static_cast<std::size_t>(i) < m.wide.size();
          call->second->lookup[o->exact_names[i]] = wide ? m.wide[i] : p.slots[i].value;
        }
        for (const auto& [name, v] : m.extra) call->second->lookup[name] = v;
      }
    }
    ack(a, c, p.seq, ecn);
    unit_done(*o);
  }

  void agg_result(App& a, MethodState& ms, ClientState& c, wire::Packet& p, const Meta& m, bool ecn) {
    const std::uint32_t g = m.tag;
    AggClient& ag = c.agg[ms.index];
    // Copy replies carry the server's sequence number, not ours.
    const bool server_seq = p.has(wire::kIsSA) && m.kind == Meta::kReply;
    if (m.client == c.id && !server_seq) ack(a, c, p.seq, ecn);
    auto bc = ag.by_chunk.find(g);
    if (bc == ag.by_chunk.end()) return;
    OutPtr o = bc->second;
    if (!o->sent) return;
    if (!o->acked) ack(a, c, o->seq, ecn);
    const int n = std::popcount(o->sp.pkt.bitmap);
    const bool lazy = ms.filter.clear == nf::ClearPolicy::kLazy && a.inc;
    const std::uint32_t pos = ms.ring_stride ? g % ms.ring_stride : 0;
    if (lazy && ag.snapshot.size() < ms.ring_stride) ag.snapshot.resize(ms.ring_stride, {});
    std::vector<std::int64_t> vals(static_cast<std::size_t>(n), 0);
    if (m.kind == Meta::kFallback) {
      for (int i = 0; i < n && static_cast<std::size_t>(i) < m.wide.size(); ++i) vals[i] = m.wide[i];
      if (lazy) ag.snapshot[pos] = {};
    } else {
      if (ag.in_fallback.count(g)) return;
      bool poison = p.has(wire::kIsOf);
      for (int i = 0; i < n; ++i) {
        const std::int32_t v = p.slots[i].value;
        if (v == kMax || v == kMin) poison = true;
      }
      if (poison) {
        ag.in_fallback.insert(g);
        auto f = std::make_shared<Outgoing>(*o);
        f->unit = o->unit;
        f->sent = false;
        f->acked = false;
        f->retries = 0;
        f->gen = 0;
        f->agg_fallback = true;
        f->sp.pkt.set(wire::kIsOf);
        f->sp.pkt.set(wire::kIsCross);
        f->sp.pkt.set(wire::kIsCnf, false);
        f->sp.elide = false;
        f->sp.meta.wide = o->exact;
        f->sp.pkt.payload = encode_meta(f->sp.meta);
        c.queue.push_front(f);
        pump(a, c);
        return;
      }
      for (int i = 0; i < n; ++i) {
        const std::int64_t v = p.slots[i].value;
        if (lazy) {
          vals[i] = v - ag.snapshot[pos][i];
          ag.snapshot[pos][i] = v;
        } else {
          vals[i] = v;
        }
      }
    }
    ag.by_chunk.erase(bc);
    ag.in_fallback.erase(g);
    if (ag.done.size() <= g) ag.done.resize(g + 1, 0);
    ag.done[g] = 1;
    auto call = calls.find(o->call);
    if (call != calls.end()) {
      Call& cl = *call->second;
      const std::size_t base = static_cast<std::size_t>(g - cl.first_chunk) * wire::kSlots;
      for (int i = 0; i < n; ++i) {
        if (base + i < cl.agg.size()) cl.agg[base + i] = vals[i];
      }
    }
    unit_done(*o);
    pump(a, c);
  }

  void client_decision(App& a, int idx, std::uint32_t ballot, std::int64_t value) {
    ClientState& c = *a.clients[idx];
    c.decisions[ballot] = value;
    auto it = c.vote_wait.find(ballot);
    if (it == c.vote_wait.end()) return;
    auto waiting = std::move(it->second);
    c.vote_wait.erase(it);
    for (auto& o : waiting) {
      if (o->sent && !o->acked) {
        ack(a, c, o->seq, false);
      } else {
        o->acked = true;
      }
      auto call = calls.find(o->call);
      if (call != calls.end()) call->second->decided[ballot] = value;
      unit_done(*o);
    }
  }

  // ---- calls --------------------------------------------------------------

  std::uint64_t start_call(int client, const std::string& service, const std::string& method,
                           Message req, Callback cb) {
    auto ait = apps.find(service);
    if (ait == apps.end()) throw Error(Errc::kServiceUnknown, service);
    App& a = *ait->second;
    auto mit = a.by_name.find(method);
    if (mit == a.by_name.end()) throw Error(Errc::kServiceUnknown, service + "." + method);
    auto cit = a.client_of_node.find(client);
    if (cit == a.client_of_node.end()) {
      throw Error(Errc::kServiceUnknown, net.name(client) + " is not a client of " + service);
    }
    ClientState& c = *a.clients[cit->second];
    MethodState& ms = a.methods[mit->second];
    auto call = std::make_unique<Call>();
    Call& cl = *call;
    cl.id = next_call++;
    cl.client_node = client;
    cl.app = &a;
    cl.method = ms.index;
    cl.req = std::move(req);
    cl.cb = std::move(cb);
    cl.start = now();
    cl.reply.type = ms.rep ? ms.rep->name : std::string();
    calls[cl.id] = std::move(call);
    ++a.stats.calls;
    const std::uint64_t id = cl.id;
    if (dead.count(client) || a.server_dead) {
      sim.after(0, [this, id] { fail(id, Errc::kCancelled, "process died"); });
      return id;
    }

    std::vector<OutPtr> outs;
    try {
      outs = build(a, ms, c, cl);
    } catch (const Error& e) {
      sim.after(0, [this, id, e] { fail(id, e.code(), e.what()); });
      return id;
    }
    const bool plain = has_opaque(cl.req) || outs.empty();
    std::set<bool*> units;
    for (const auto& o : outs) units.insert(o->unit.get());
    cl.units = static_cast<int>(units.size()) + (plain ? 1 : 0);
    for (const auto& o : outs) {
      if (!*o->unit) c.queue.push_back(o);
    }
    if (plain) {
      ++a.stats.plain_messages;
      App* ap = &a;
      const int mi = ms.index;
      Message r = cl.req;
      send_plain(client, a.opt.server, static_cast<std::uint32_t>(message_bytes(r)),
                 [this, ap, mi, id, r, client] { server_plain(*ap, mi, id, r, client); });
    }
    // Units already satisfied (known decisions) were counted and settled.
    for (const auto& o : outs) {
      if (*o->unit) --cl.units;
    }
    pump(a, c);
    if (cl.units <= 0) sim.after(0, [this, id] {
      auto it = calls.find(id);
      if (it != calls.end()) maybe_finish(*it->second);
    });
    return id;
  }

  client::StreamParams params(const App& a, const MethodState& ms, const ClientState& c,
                              std::uint32_t tag) const {
    client::StreamParams sp;
    sp.gaid = ms.gaid;
    sp.client = c.id;
    sp.method = ms.index;
    sp.tag = tag;
    sp.ring_base_row = ms.ring_base;
    // Shadow chunks alternate halves: g and g + stride sit in partner rows.
    sp.ring_rows = ms.data_rows;
    sp.counter_base_row = ms.counter_base;
    sp.counter_ring = a.opt.counter_ring;
    sp.clients = static_cast<std::uint32_t>(a.opt.clients.size());
    sp.inc = a.inc;
    return sp;
  }

  OutPtr new_out(const Call& cl, const MethodState& ms) {
    auto o = std::make_shared<Outgoing>();
    o->call = cl.id;
    o->method = ms.index;
    o->kind = ms.kind;
    return o;
  }

  std::vector<OutPtr> build(App& a, MethodState& ms, ClientState& c, Call& cl) {
    std::vector<OutPtr> outs;
    switch (ms.kind) {
      case Kind::kPlain:
        return outs;
      case Kind::kAggregate: {
        const std::string fname = field_of(ms.filter.add_to);
        const IEDTValue* v = cl.req.field(fname);
        if (!v || std::holds_alternative<Opaque>(*v)) return outs;
        AggClient& ag = c.agg[ms.index];
        auto sp = params(a, ms, c, 0);
        sp.first_chunk = ag.next_chunk;
        auto stream = client::build_stream(cl.req, ms.filter, nullptr, sp);
        cl.first_chunk = ag.next_chunk;
        cl.agg.assign(stream.items.size(), 0);
        cl.fp = std::holds_alternative<FPArray>(*v);
        cl.item_bytes = 4 * stream.items.size();
        a.stats.items += stream.items.size();
        ag.next_chunk += static_cast<std::uint32_t>(stream.packets.size());
        for (auto& spk : stream.packets) {
          auto o = new_out(cl, ms);
          o->chunk = spk.chunk;
          for (int i = 0; i < wire::kSlots; ++i) {
            if (spk.item[i] >= 0) o->exact.push_back(stream.items[spk.item[i]].value);
          }
          o->sp = std::move(spk);
          ag.by_chunk[o->chunk] = o;
          outs.push_back(o);
        }
        return outs;
      }
      case Kind::kAccumulate:
      case Kind::kLookup: {
        const std::string& path = ms.kind == Kind::kAccumulate ? ms.filter.add_to : ms.filter.get;
        const IEDTValue* v = cl.req.field(field_of(path));
        if (!v || std::holds_alternative<Opaque>(*v)) return outs;
        const auto items = map_items(*v);
        for (const auto& [name, x] : items) a.amap->count_use(client::key_hash(name));
        auto stream = client::build_stream(cl.req, ms.filter, a.amap.get(), params(a, ms, c, 0));
        a.stats.items += stream.items.size();
        for (const auto& it : stream.items) cl.item_bytes += 4 + it.name.size();
        if (ms.kind == Kind::kLookup) {
          for (const auto& it : stream.items) cl.lookup[it.name] = 0;
        }
        for (auto& spk : stream.packets) {
          auto o = new_out(cl, ms);
          for (int i = 0; i < wire::kSlots; ++i) {
            o->exact_names.push_back(spk.item[i] >= 0 ? stream.items[spk.item[i]].name : std::string());
          }
          o->sp = std::move(spk);
          outs.push_back(o);
        }
        return outs;
      }
      case Kind::kTestAndSet:
      case Kind::kRelease: {
        const IEDTValue* v = cl.req.field(field_of(ms.filter.cntfwd.key_path));
        if (!v) return outs;
        for (const auto& [name, x] : map_items(*v)) {
          (void)x;
          const std::uint32_t laddr = client::key_hash(name);
          std::optional<server::Cell> cell;
          if (a.inc) cell = a.amap->allocate_pinned(laddr, name);
          auto o = new_out(cl, ms);
          o->sp.item.assign(wire::kSlots, -1);
          o->sp.pkt.gaid = ms.gaid;
          o->sp.meta.kind = Meta::kData;
          o->sp.meta.method = ms.index;
          o->sp.meta.client = c.id;
          o->exact_names.assign(wire::kSlots, std::string());
          if (cell) {
            o->sp.pkt.enable(cell->segment);
            o->sp.pkt.slots[cell->segment] = {cell->row, 0};
            o->exact_names[cell->segment] = name;
            if (ms.kind == Kind::kTestAndSet) {
              o->sp.pkt.set(wire::kIsCnf);
              o->sp.pkt.counter_index = cell->flat();
              o->sp.pkt.counter_threshold = 1;
            }
          } else {
            o->sp.pkt.enable(0);
            o->sp.pkt.slots[0] = {laddr, 0};
            o->sp.pkt.set(wire::kIsCross);
            o->sp.meta.names = {name};
            o->exact_names[0] = name;
          }
          o->sp.pkt.payload = encode_meta(o->sp.meta);
          cl.item_bytes += 4 + name.size();
          ++a.stats.items;
          outs.push_back(o);
        }
        return outs;
      }
      case Kind::kQuorum: {
        const IEDTValue* v = cl.req.field(field_of(ms.filter.cntfwd.key_path));
        const auto* im = v ? std::get_if<IntIntMap>(v) : nullptr;
        if (!im) return outs;
        const std::uint32_t n = static_cast<std::uint32_t>(a.opt.clients.size());
        for (const auto& [ballot, value] : *im) {
          const auto b = static_cast<std::uint32_t>(ballot);
          auto o = new_out(cl, ms);
          o->ballot = b;
          o->sp.item.assign(wire::kSlots, -1);
          o->sp.pkt.gaid = ms.gaid;
          o->sp.meta.kind = Meta::kData;
          o->sp.meta.method = ms.index;
          o->sp.meta.client = c.id;
          o->sp.meta.tag = b;
          o->sp.pkt.enable(0);
          o->sp.pkt.slots[0] = {b, saturate(value)};
          if (a.inc) {
            const std::uint32_t pos = b % a.opt.counter_ring;
            o->sp.pkt.set(wire::kIsCnf);
            o->sp.pkt.counter_index =
                sw::flat(static_cast<int>(pos % sw::kSegments), ms.counter_base + pos / sw::kSegments);
            o->sp.pkt.counter_threshold = ms.filter.cntfwd.threshold + n * (b / a.opt.counter_ring);
          } else {
            o->sp.pkt.set(wire::kIsCross);
          }
          o->sp.pkt.payload = encode_meta(o->sp.meta);
          cl.item_bytes += 16;
          ++a.stats.items;
          auto known = c.decisions.find(b);
          if (known != c.decisions.end()) {
            *o->unit = true;
            o->acked = true;
            cl.decided[b] = known->second;
          } else {
            c.vote_wait[b].push_back(o);
          }
          outs.push_back(o);
        }
        return outs;
      }
    }
    return outs;
  }

  void maybe_finish(Call& cl) {
    if (cl.finished || cl.units > 0) return;
    cl.finished = true;
    App& a = *cl.app;
    const MethodState& ms = a.methods[cl.method];
    Message rep = cl.reply;
    if (ms.kind == Kind::kAggregate && !ms.filter.get.empty()) {
      const std::string f = field_of(ms.filter.get);
      if (cl.fp) {
        const client::Quantizer q(ms.filter.precision);
        FPArray out;
        for (auto v : cl.agg) out.push_back(client::dequantize(v, q));
        rep.fields[f] = out;
      } else {
        rep.fields[f] = IntArray(cl.agg.begin(), cl.agg.end());
      }
    }
    if (ms.kind == Kind::kLookup && !cl.lookup.empty()) {
      const std::string f = field_of(ms.filter.get);
      const auto* fd = field_desc(ms.rep, f);
      if (fd && fd->type == nf::FieldType::kIntIntMap) {
        IntIntMap m;
        for (const auto& [k, v] : cl.lookup) m[std::stoll(k)] = v;
        rep.fields[f] = m;
      } else {
        rep.fields[f] = StrIntMap(cl.lookup.begin(), cl.lookup.end());
      }
    }
    if (ms.kind == Kind::kQuorum && ms.rep) {
      std::string s;
      for (const auto& [b, v] : cl.decided) {
        if (!s.empty()) s += ",";
        s += cl.decided.size() == 1 ? std::to_string(v) : std::to_string(b) + ":" + std::to_string(v);
      }
      for (const auto& fd : ms.rep->fields) {
        if (fd.type == nf::FieldType::kOpaque && !rep.fields.count(fd.name)) {
          rep.fields[fd.name] = Opaque{s};
          break;
        }
      }
    }
    a.stats.app_bytes += cl.item_bytes;
    CallResult r;
    r.ok = true;
    r.reply = std::move(rep);
    r.start = cl.start;
    r.end = now();
    auto cb = std::move(cl.cb);
    const auto id = cl.id;
    calls.erase(id);
    if (cb) cb(r);
  }

  void fail(std::uint64_t id, Errc code, const std::string& what) {
    auto it = calls.find(id);
    if (it == calls.end() || it->second->finished) return;
    Call& cl = *it->second;
    cl.finished = true;
    CallResult r;
    r.ok = false;
    r.error = code;
    r.what = what;
    r.start = cl.start;
    r.end = now();
    auto cb = std::move(cl.cb);
    calls.erase(it);
    if (cb) cb(r);
  }

  // ---- server side --------------------------------------------------------

  void server_enqueue(App& a, int mi, wire::Packet p, Meta m) {
    const bool soft = p.has(wire::kIsCross) || p.has(wire::kIsOf) || !a.inc;
    net::Time cost = cfg.server_pkt_ns;
    if (soft) {
      cost += cfg.server_slot_ns *
              static_cast<net::Time>(std::popcount(p.bitmap) + m.extra.size());
    }
    App* ap = &a;
    on_cpu(a.opt.server, cost, [this, ap, mi, p = std::move(p), m = std::move(m)]() mutable {
      server_handle(*ap, mi, p, m);
    });
  }

  int client_node(const App& a, std::uint16_t id) const {
    return id < a.opt.clients.size() ? a.opt.clients[id] : -1;
  }

  void reply_to(App& a, std::uint16_t client, wire::Packet q, bool elide = false) {
    const int node = client_node(a, client);
    if (node < 0) return;
    q.set(wire::kIsSA);
    send_inc(a.opt.server, node, q, elide);
  }

  void server_handle(App& a, int mi, wire::Packet& p, Meta& m) {
    MethodState& ms = a.methods[mi];
    switch (ms.kind) {
      case Kind::kAggregate:
        server_aggregate(a, ms, p, m);
        return;
      case Kind::kAccumulate:
      case Kind::kLookup:
        server_map(a, ms, p, m);
        return;
      case Kind::kTestAndSet:
      case Kind::kRelease:
        server_lock(a, ms, p, m);
        return;
      case Kind::kQuorum:
        server_vote(a, ms, p, m);
        return;
      case Kind::kPlain:
        return;
    }
  }

  void send_fallback(App& a, const MethodState& ms, std::uint16_t client, std::uint32_t seq,
                     std::uint32_t g, const std::vector<std::int64_t>& result) {
    wire::Packet q;
    q.gaid = ms.gaid;
    q.seq = seq;
    q.set(wire::kIsCross);
    Meta m;
    m.kind = Meta::kFallback;
    m.method = ms.index;
    m.client = client;
    m.tag = g;
    m.wide = result;
    for (std::size_t i = 0; i < result.size() && i < wire::kSlots; ++i) {
      q.enable(static_cast<int>(i));
      q.slots[i].value = saturate(result[i]);
    }
    q.payload = encode_meta(m);
    reply_to(a, client, std::move(q));
  }

  void stamp_reply(const MethodState& ms, wire::Packet& q, std::uint32_t chunk) {
    if (!ms.reply_srrt) return;
    q.srrt = *ms.reply_srrt;
    q.seq = chunk;
    q.flip = client::flip_for(chunk, ms.reply_w);
  }

  void server_aggregate(App& a, MethodState& ms, wire::Packet& p, Meta& m) {
    const std::uint32_t g = m.tag;
    const int n = std::popcount(p.bitmap);
    if (p.has(wire::kIsCross) || !a.inc) {
      auto& ch = ms.fallback[g];
      if (ch.result) {
        ch.parts[m.client].seq = p.seq;
        send_fallback(a, ms, m.client, p.seq, g, *ch.result);
        return;
      }
      auto& part = ch.parts[m.client];
      if (part.values.empty()) {
        if (!m.wide.empty()) {
          part.values = m.wide;
        } else {
          for (int i = 0; i < n; ++i) part.values.push_back(p.slots[i].value);
        }
        a.stats.fallback_items += part.values.size();
        ++a.stats.fallback_packets;
      }
      part.seq = p.seq;
      if (ch.parts.size() < ms.filter.cntfwd.threshold) return;
      std::vector<std::int64_t> sum;
      for (const auto& [cid, pt] : ch.parts) {
        if (sum.size() < pt.values.size()) sum.resize(pt.values.size(), 0);
        for (std::size_t i = 0; i < pt.values.size(); ++i) sum[i] += pt.values[i];
      }
      ch.result = sum;
      if (a.inc && ms.filter.clear == nf::ClearPolicy::kLazy) {
        const std::uint32_t row = ms.ring_base + g % ms.ring_stride;
        for (int i = 0; i < wire::kSlots; ++i) regs.write(sw::flat(i, row), 0);
      }
      for (const auto& [cid, pt] : ch.parts) send_fallback(a, ms, cid, pt.seq, g, sum);
      return;
    }
    // Copy policy: the threshold packet passes through here on its way out.
    auto b = ms.backups.find(g);
    if (b == ms.backups.end()) {
      // Every client finished chunks a full ring behind the newest one
      // before sending it, so this is a late duplicate.
      if (ms.newest_backup && g + ms.ring_stride <= *ms.newest_backup) return;
      ms.newest_backup = std::max(g, ms.newest_backup.value_or(0));
      std::array<std::int32_t, wire::kSlots> vals{};
      for (int i = 0; i < wire::kSlots; ++i) vals[i] = p.slots[i].value;
      ms.backups[g] = vals;
      if (g >= ms.ring_stride) ms.backups.erase(g - ms.ring_stride);
      wire::Packet q = p;
      q.set(wire::kIsMcast);
      q.set(wire::kIsClr);
      stamp_reply(ms, q, g);
      m.kind = Meta::kReply;
      q.payload = encode_meta(m);
      reply_to(a, m.client, std::move(q));
      return;
    }
    // Resent from the backup. If the first reply never reached the switch
    // this one is fresh there and clears the row; otherwise it passes
    // untouched.
    wire::Packet q = p;
    for (int i = 0; i < wire::kSlots; ++i) q.slots[i].value = b->second[i];
    q.set(wire::kIsMcast, false);
    q.set(wire::kIsClr);
    stamp_reply(ms, q, g);
    m.kind = Meta::kReply;
    q.payload = encode_meta(m);
    reply_to(a, m.client, std::move(q));
  }

  // Installs a mapping for a key seen for the first time, when the policy
  // allows it.
  void first_use(App& a, std::uint32_t laddr, const std::string& name) {
    if (!a.amap->claim(laddr, name)) return;
    if (!a.inc) return;
    const auto* e = a.amap->entry(laddr);
    if (e->cell || e->software || e->held) return;
    if (a.amap->allocate_mapping(laddr)) server::install_key(*a.amap, a.store, regs, laddr);
  }

  std::optional<std::pair<std::uint32_t, std::string>> slot_key(App& a, const wire::Packet& p,
                                                                const Meta& m, int i) {
    if (static_cast<std::size_t>(i) < m.names.size() && !m.names[i].empty()) {
      return std::pair{client::key_hash(m.names[i]), m.names[i]};
    }
    auto owner = a.amap->owner({i, p.slots[i].key});
    if (!owner) return std::nullopt;
    return std::pair{*owner, a.amap->entry(*owner)->name};
  }

  void server_map(App& a, MethodState& ms, wire::Packet& p, Meta& m) {
    const bool soft = p.has(wire::kIsCross) || p.has(wire::kIsOf) || !a.inc;
    wire::Packet q = p;
    Meta rm = m;
    rm.kind = Meta::kReply;
    rm.names.clear();
    rm.wide.clear();
    rm.extra.clear();
    if (soft) {
      const bool add = ms.kind == Kind::kAccumulate;
      const bool first = !add || a.dedup.first(m.client, m.flow, p.seq);
      if (first) ++a.stats.fallback_packets;
      std::vector<std::int64_t> out;
      for (int i = 0; i < wire::kSlots; ++i) {
        if (!p.enabled(i)) {
          out.push_back(0);
          continue;
        }
        auto key = slot_key(a, p, m, i);
        if (!key) {
          out.push_back(0);
          continue;
        }
        const auto& [laddr, name] = *key;
        std::int64_t v = static_cast<std::size_t>(i) < m.wide.size() ? m.wide[i] : p.slots[i].value;
        if (add && first) {
          if (ms.filter.modify_op != nf::ModifyOp::kNop) {
            v = server::modify_wide(ms.filter.modify_op, ms.filter.modify_para, v);
          }
          first_use(a, laddr, name);
          bool spilled = false;
          server::software_add(*a.amap, a.store, regs, laddr, name, v, &spilled);
          if (spilled) schedule_software(a, laddr);
          ++a.stats.fallback_items;
        }
        if (!add) {
          a.amap->claim(laddr, name);
          out.push_back(server::software_get(*a.amap, a.store, regs, laddr, name));
          ++a.stats.fallback_items;
        } else {
          out.push_back(0);
        }
      }
      for (const auto& [name, v] : m.extra) {
        const std::uint32_t laddr = client::key_hash(name);
        if (add && first) {
          server::software_add(*a.amap, a.store, regs, laddr, name, v, nullptr);
          ++a.stats.fallback_items;
        }
        if (!add) {
          rm.extra.emplace_back(name, server::software_get(*a.amap, a.store, regs, laddr, name));
          ++a.stats.fallback_items;
        }
      }
      if (!add) {
        rm.kind = Meta::kFallback;
        rm.wide = out;
        for (int i = 0; i < wire::kSlots; ++i) {
          if (p.enabled(i)) q.slots[i].value = saturate(out[i]);
        }
      }
      q.set(wire::kIsCross);
    }
    q.set(wire::kIsOf, false);
    q.payload = encode_meta(rm);
    reply_to(a, m.client, std::move(q));
  }

  void server_lock(App& a, MethodState& ms, wire::Packet& p, Meta& m) {
    const bool first = a.dedup.first(m.client, m.flow, p.seq);
    wire::Packet q = p;
    Meta rm = m;
    rm.kind = Meta::kReply;
    if (p.has(wire::kIsCross) || !a.inc) {
      ++a.stats.fallback_packets;
      std::string name;
      for (int i = 0; i < wire::kSlots; ++i) {
        if (!p.enabled(i)) continue;
        if (auto key = slot_key(a, p, m, i)) name = key->second;
      }
      std::int64_t& cnt = a.soft_locks[name];
      if (ms.kind == Kind::kTestAndSet) {
        if (first) ++cnt;
        if (cnt != 1) return;
      } else if (first) {
        cnt = 0;
      }
      q.set(wire::kIsCross);
    } else if (ms.kind == Kind::kRelease) {
      // Only the first copy of a release may clear; a late duplicate
      // would otherwise free a lock someone else holds.
      if (first) {
        q.set(wire::kIsClr);
      } else {
        q.set(wire::kIsCross);
      }
    }
    q.payload = encode_meta(rm);
    reply_to(a, m.client, std::move(q));
  }

  void server_vote(App& a, MethodState& ms, wire::Packet& p, Meta& m) {
    for (int i = 0; i < wire::kSlots; ++i) {
      if (!p.enabled(i)) continue;
      const std::uint32_t b = p.slots[i].key;
      const std::int64_t value = p.slots[i].value;
      auto& ballot = ms.ballots[b];
      if (p.has(wire::kIsCross) || !a.inc) {
        ballot.voters.insert(m.client);
        if (ballot.voters.size() < ms.filter.cntfwd.threshold) continue;
      }
      if (ballot.decided) continue;
      ballot.decided = true;
      ballot.value = value;
      ++a.stats.decisions;
      App* ap = &a;
      for (std::size_t k = 0; k < a.opt.clients.size(); ++k) {
        const int idx = static_cast<int>(k);
        send_plain(a.opt.server, a.opt.clients[k], 16,
                   [this, ap, idx, b, value] { client_decision(*ap, idx, b, value); });
      }
    }
  }

  std::map<std::string, std::int64_t> snapshot(const App& a) const {
    std::map<std::string, std::int64_t> out;
    for (const auto& [laddr, e] : a.amap->entries()) {
      out[e.name] = server::software_get(*a.amap, a.store, regs, laddr, e.name);
    }
    for (const auto& [name, v] : a.store.all()) {
      if (!out.count(name)) out[name] = v;
    }
    return out;
  }

  void server_plain(App& a, int mi, std::uint64_t call_id, const Message& req, int client) {
    MethodState& ms = a.methods[mi];
    Message rep;
    rep.type = ms.rep ? ms.rep->name : std::string();
    bool panic = false;
    std::string what;
    try {
      if (ms.handler) rep = ms.handler(req);
    } catch (const std::exception& e) {
      panic = true;
      what = e.what();
    } catch (...) {
      panic = true;
      what = "handler failed";
    }
    if (!panic && ms.kind == Kind::kLookup) {
      const std::string f = field_of(ms.filter.get);
      if (!rep.fields.count(f)) {
        const auto snap = snapshot(a);
        const auto* fd = field_desc(ms.rep, f);
        if (fd && fd->type == nf::FieldType::kIntIntMap) {
          IntIntMap im;
          for (const auto& [k, v] : snap) im[std::stoll(k)] = v;
          rep.fields[f] = im;
        } else {
          rep.fields[f] = StrIntMap(snap.begin(), snap.end());
        }
      }
    }
    const auto bytes = static_cast<std::uint32_t>(message_bytes(rep));
    send_plain(a.opt.server, client, bytes, [this, call_id, rep, panic, what] {
      auto it = calls.find(call_id);
      if (it == calls.end()) return;
      if (panic) {
        fail(call_id, Errc::kHandlerPanic, what);
        return;
      }
      Call& cl = *it->second;
      for (const auto& [k, v] : rep.fields) {
        if (!cl.reply.fields.count(k)) cl.reply.fields[k] = v;
      }
      --cl.units;
      maybe_finish(cl);
    });
  }

  void kill(int node) {
    dead.insert(node);
    std::vector<std::uint64_t> doomed;
    for (auto& [name, a] : apps) {
      if (a->opt.server == node) a->server_dead = true;
      auto it = a->client_of_node.find(node);
      if (it != a->client_of_node.end()) a->clients[it->second]->dead = true;
    }
    for (const auto& [id, cl] : calls) {
      if (cl->client_node == node || cl->app->opt.server == node) doomed.push_back(id);
    }
    for (auto id : doomed) fail(id, Errc::kCancelled, "process died");
  }
};

Runtime::Runtime(net::Network& net, RuntimeConfig cfg)
    : impl_(std::make_unique<Impl>(net, cfg)) {}
Runtime::~Runtime() = default;

void Runtime::register_service(const ServiceDef& def, const ServiceOptions& opt) {
  impl_->register_service(def, opt);
}

void Runtime::serve(const std::string& service, const std::string& method, Handler h) {
  auto it = impl_->apps.find(service);
  if (it == impl_->apps.end()) throw Error(Errc::kServiceUnknown, service);
  auto m = it->second->by_name.find(method);
  if (m == it->second->by_name.end()) throw Error(Errc::kServiceUnknown, service + "." + method);
  it->second->methods[m->second].handler = std::move(h);
}

void Runtime::call(int client, const std::string& service, const std::string& method,
                   Message req, Callback cb) {
  impl_->start_call(client, service, method, std::move(req), std::move(cb));
}

CallResult Runtime::call_sync(int client, const std::string& service, const std::string& method,
                              Message req, net::Time limit) {
  auto done = std::make_shared<bool>(false);
  auto out = std::make_shared<CallResult>();
  const auto id = impl_->start_call(client, service, method, std::move(req),
                                    [done, out](const CallResult& r) {
                                      *out = r;
                                      *done = true;
                                    });
  impl_->sim.run_while_not([&] { return *done; }, impl_->sim.now() + limit);
  if (!*done) impl_->fail(id, Errc::kCancelled, "timed out");
  return *out;
}

void Runtime::kill(int node) { impl_->kill(node); }
net::Network& Runtime::network() { return impl_->net; }
sw::SwitchState& Runtime::switch_state() { return impl_->sw; }
int Runtime::switch_node() const { return impl_->sw_node; }
ctl::Controller& Runtime::controller() { return *impl_->ctl; }

const AppStats& Runtime::stats(const std::string& service) const {
  auto it = impl_->apps.find(service);
  if (it == impl_->apps.end()) throw Error(Errc::kServiceUnknown, service);
  return it->second->stats;
}

std::map<std::string, std::int64_t> Runtime::map_snapshot(const std::string& service) const {
  auto it = impl_->apps.find(service);
  if (it == impl_->apps.end()) throw Error(Errc::kServiceUnknown, service);
  return impl_->snapshot(*it->second);
}

const server::AddressMap* Runtime::address_map(const std::string& service) const {
  auto it = impl_->apps.find(service);
  return it == impl_->apps.end() ? nullptr : it->second->amap.get();
}

std::uint32_t Runtime::reserved_cells(const std::string& service) const {
  auto it = impl_->apps.find(service);
  if (it == impl_->apps.end()) return 0;
  return it->second->inc ? it->second->reg.rows * sw::kSegments : 0;
}

bool Runtime::inc_enabled(const std::string& service) const {
  auto it = impl_->apps.find(service);
  return it != impl_->apps.end() && it->second->inc;
}

std::uint32_t Runtime::data_cells(const std::string& service) const {
  auto it = impl_->apps.find(service);
  if (it == impl_->apps.end() || !it->second->inc) return 0;
  std::uint32_t rows = 0;
  for (const auto& ms : it->second->methods) rows += ms.data_rows;
  return rows * sw::kSegments;
}

std::size_t Runtime::pending_calls() const { return impl_->calls.size(); }
std::uint64_t Runtime::fresh_cntfwd_forwards() const { return impl_->fresh_fwd; }

}  // namespace incnet::rpc
