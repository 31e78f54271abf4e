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

#include "incnet/server_agent.hpp"

#include <algorithm>
#include <limits>

namespace incnet::server {
namespace {

bool fits32(std::int64_t v) {
  return v > std::numeric_limits<std::int32_t>::min() &&
         v < std::numeric_limits<std::int32_t>::max();
}

}  // namespace

const char* to_string(CachePolicy p) {
  switch (p) {
    case CachePolicy::kLru: return "LRU";
    case CachePolicy::kFcfs: return "FCFS";
    case CachePolicy::kHash: return "HASH";
    case CachePolicy::kPoN: return "PoN";
  }
  return "?";
}

std::optional<CachePolicy> cache_policy_from(std::string_view s) {
  if (s == "LRU" || s == "lru") return CachePolicy::kLru;
  if (s == "FCFS" || s == "fcfs") return CachePolicy::kFcfs;
  if (s == "HASH" || s == "hash") return CachePolicy::kHash;
  if (s == "PoN" || s == "pon" || s == "PON") return CachePolicy::kPoN;
  return std::nullopt;
}

AddressMap::AddressMap(std::uint32_t base_row, std::uint32_t capacity, CachePolicy policy,
                       std::uint32_t pon_threshold)
    : base_row_(base_row), capacity_(capacity), policy_(policy), pon_threshold_(pon_threshold) {}

Cell AddressMap::cell(std::uint32_t k) const {
  return {static_cast<int>(k % sw::kSegments), base_row_ + k / sw::kSegments};
}

std::optional<std::uint32_t> AddressMap::owner(const Cell& c) const {
  if (c.row < base_row_ || c.segment < 0 || c.segment >= sw::kSegments) return std::nullopt;
  const std::uint32_t k = (c.row - base_row_) * sw::kSegments + static_cast<std::uint32_t>(c.segment);
  auto it = cell_owner_.find(k);
  if (it == cell_owner_.end()) return std::nullopt;
  return it->second;
}

AddressMap::Lookup AddressMap::lookup(std::uint32_t laddr, std::string_view name) const {
  auto it = entries_.find(laddr);
  if (it == entries_.end()) return {};
  const Entry& e = it->second;
  if (e.name != name) return {Status::kCollided, {}};
  if (e.held) return {Status::kHeld, {}};
  if (e.cell) return {Status::kCached, cell(*e.cell)};
  return {Status::kUncached, {}};
}

const AddressMap::Entry* AddressMap::entry(std::uint32_t laddr) const {
  auto it = entries_.find(laddr);
  return it == entries_.end() ? nullptr : &it->second;
}

bool AddressMap::claim(std::uint32_t laddr, const std::string& name) {
  auto [it, inserted] = entries_.try_emplace(laddr);
  if (inserted) it->second.name = name;
  return it->second.name == name;
}

std::optional<std::uint32_t> AddressMap::free_cell(std::uint32_t laddr) const {
  if (policy_ == CachePolicy::kHash) {
    if (capacity_ == 0) return std::nullopt;
    const std::uint32_t k = laddr % capacity_;
    if (cell_owner_.contains(k)) return std::nullopt;
    return k;
  }
  if (!released_.empty()) return released_.back();
  if (next_free_ < capacity_) return next_free_;
  return std::nullopt;
}

std::optional<Cell> AddressMap::allocate_mapping(std::uint32_t laddr) {
  auto it = entries_.find(laddr);
  if (it == entries_.end()) return std::nullopt;
  Entry& e = it->second;
  if (e.cell) return cell(*e.cell);
  if (e.software || e.held) return std::nullopt;
  if (policy_ == CachePolicy::kPoN && e.total_hits <= pon_threshold_) return std::nullopt;
  return install(laddr);
}

std::optional<Cell> AddressMap::allocate_pinned(std::uint32_t laddr, const std::string& name) {
  if (!claim(laddr, name)) return std::nullopt;
  Entry& e = entries_[laddr];
  if (!e.cell) {
    std::optional<std::uint32_t> k;
    if (!released_.empty()) {
      k = released_.back();
    } else if (next_free_ < capacity_) {
      k = next_free_;
    }
    if (!k) return std::nullopt;
    if (!released_.empty() && released_.back() == *k) {
      released_.pop_back();
    } else {
      ++next_free_;
    }
    e.cell = *k;
    cell_owner_[*k] = laddr;
  }
  e.pinned = true;
  return cell(*e.cell);
}

void AddressMap::count_use(std::uint32_t laddr, std::uint64_t n) {
  auto it = entries_.find(laddr);
  if (it == entries_.end()) return;
  it->second.window_hits += n;
  it->second.total_hits += n;
}

AddressMap::Plan AddressMap::cache_sweep() {
  Plan plan;
  if (policy_ == CachePolicy::kLru) {
    std::uint32_t pinned = 0;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> ranked;
    for (const auto& [laddr, e] : entries_) {
      if (e.pinned) {
        ++pinned;
        continue;
      }
      if (e.software || e.held) continue;
      if (e.window_hits == 0 && !e.cell) continue;
      ranked.emplace_back(e.window_hits, laddr);
    }
    // Hottest first; on equal counts a cached key keeps its cell, then the
    // lower address wins so the plan is deterministic.
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      const bool ca = entries_.at(a.second).cell.has_value();
      const bool cb = entries_.at(b.second).cell.has_value();
      if (ca != cb) return ca;
      return a.second < b.second;
    });
    const std::size_t slots = capacity_ > pinned ? capacity_ - pinned : 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const Entry& e = entries_.at(ranked[i].second);
      const bool want = i < slots && ranked[i].first > 0;
      if (want && !e.cell) plan.install.push_back(ranked[i].second);
      if (!want && e.cell && i >= slots) plan.evict.push_back(ranked[i].second);
    }
    // Only replace as many keys as there will be cells for.
    const std::size_t free_now = slots > cached() - pinned ? slots - (cached() - pinned) : 0;
    const std::size_t room = free_now + plan.evict.size();
    if (plan.install.size() > room) plan.install.resize(room);
    std::sort(plan.evict.begin(), plan.evict.end());
    std::sort(plan.install.begin(), plan.install.end());
  }
  for (auto& [_, e] : entries_) e.window_hits = 0;
  return plan;
}

void AddressMap::hold(std::uint32_t laddr) {
  auto it = entries_.find(laddr);
  if (it != entries_.end()) it->second.held = true;
}

std::optional<Cell> AddressMap::evict(std::uint32_t laddr) {
  auto it = entries_.find(laddr);
  if (it == entries_.end()) return std::nullopt;
  Entry& e = it->second;
  e.held = false;
  if (!e.cell) return std::nullopt;
  const std::uint32_t k = *e.cell;
  e.cell.reset();
  e.pinned = false;
  cell_owner_.erase(k);
  if (policy_ != CachePolicy::kHash) released_.push_back(k);
  return cell(k);
}

std::optional<Cell> AddressMap::install(std::uint32_t laddr) {
  auto it = entries_.find(laddr);
  if (it == entries_.end()) return std::nullopt;
  Entry& e = it->second;
  if (e.cell) return cell(*e.cell);
  auto k = free_cell(laddr);
  if (!k) return std::nullopt;
  if (policy_ != CachePolicy::kHash) {
    if (!released_.empty() && released_.back() == *k) {
      released_.pop_back();
    } else {
      ++next_free_;
    }
  }
  e.cell = *k;
  cell_owner_[*k] = laddr;
  return cell(*k);
}

void AddressMap::mark_software(std::uint32_t laddr) {
  auto it = entries_.find(laddr);
  if (it != entries_.end()) it->second.software = true;
}

std::vector<std::pair<std::uint32_t, Cell>> AddressMap::unmap_all() {
  std::vector<std::pair<std::uint32_t, Cell>> out;
  for (auto& [laddr, e] : entries_) {
    if (!e.cell) continue;
    out.emplace_back(laddr, cell(*e.cell));
    e.cell.reset();
    e.pinned = false;
  }
  cell_owner_.clear();
  released_.clear();
  next_free_ = 0;
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::int64_t ShadowStore::shadow(const std::string& name) const {
  auto it = shadow_.find(name);
  return it == shadow_.end() ? 0 : it->second;
}

std::int64_t software_add(AddressMap& amap, ShadowStore& store, const RegisterAccess& regs,
                          std::uint32_t laddr, const std::string& name, std::int64_t v,
                          bool* spilled) {
  const auto* e = amap.entry(laddr);
  if (e && e->name == name && e->cell) {
    const Cell c = amap.cell(*e->cell);
    const std::int64_t sum = static_cast<std::int64_t>(regs.read(c.flat())) + v;
    if (fits32(sum)) {
      regs.write(c.flat(), static_cast<std::int32_t>(sum));
      return sum + store.shadow(name);
    }
    if (spilled) *spilled = true;
  }
  store.add(name, v);
  return software_get(amap, store, regs, laddr, name);
}

std::int64_t software_get(const AddressMap& amap, const ShadowStore& store,
                          const RegisterAccess& regs, std::uint32_t laddr,
                          const std::string& name) {
  std::int64_t v = store.shadow(name);
  const auto* e = amap.entry(laddr);
  if (e && e->name == name && e->cell) v += regs.read(amap.cell(*e->cell).flat());
  return v;
}

void drain(AddressMap& amap, ShadowStore& store, const RegisterAccess& regs,
           std::uint32_t laddr) {
  const auto* e = amap.entry(laddr);
  if (!e) return;
  const std::string name = e->name;
  auto c = amap.evict(laddr);
  if (!c) return;
  store.add(name, regs.read(c->flat()));
  regs.write(c->flat(), 0);
}

bool install_key(AddressMap& amap, ShadowStore& store, const RegisterAccess& regs,
                 std::uint32_t laddr) {
  const auto* e = amap.entry(laddr);
  if (!e) return false;
  const std::string name = e->name;
  const std::int64_t v = store.shadow(name);
  if (!fits32(v)) {
    amap.mark_software(laddr);
    return false;
  }
  auto c = amap.install(laddr);
  if (!c) return false;
  regs.write(c->flat(), static_cast<std::int32_t>(v));
  store.erase(name);
  return true;
}

std::int64_t modify_wide(nf::ModifyOp op, std::int32_t para, std::int64_t v) {
  using nf::ModifyOp;
  const unsigned sh = static_cast<unsigned>(para) & 31u;
  switch (op) {
    case ModifyOp::kNop: return v;
    case ModifyOp::kMax: return std::max<std::int64_t>(v, para);
    case ModifyOp::kMin: return std::min<std::int64_t>(v, para);
    case ModifyOp::kAdd: return v + para;
    case ModifyOp::kAssign: return para;
    case ModifyOp::kShiftL: return static_cast<std::int64_t>(static_cast<std::uint64_t>(v) << sh);
    case ModifyOp::kShiftR: return v >> sh;
    case ModifyOp::kBand: return v & para;
    case ModifyOp::kBor: return v | para;
    case ModifyOp::kBnot: return ~v;
    case ModifyOp::kBxor: return v ^ para;
  }
  return v;
}

bool DedupFilter::first(std::uint16_t client, std::uint16_t flow, std::uint32_t seq) {
  auto& m = seen_[static_cast<std::uint32_t>(client) << 16 | flow];
  if (!m.emplace(seq, true).second) return false;
  // Keep a bounded history: sequence numbers far behind the newest cannot
  // reappear once their window has moved on.
  constexpr std::uint32_t kKeep = 1u << 16;
  const std::uint32_t newest = m.rbegin()->first;
  if (newest > kKeep) m.erase(m.begin(), m.lower_bound(newest - kKeep));
  return true;
}

SweepOutcome second_level_sweep(RetiredMap& m, std::int64_t now_ns, std::int64_t level2_ns,
                                bool stub_alive,
                                std::map<std::string, std::int64_t>* delivered) {
  if (now_ns - m.retired_ns < level2_ns) return SweepOutcome::kKept;
  if (stub_alive) {
    if (delivered) *delivered = m.items;
    m.items.clear();
    return SweepOutcome::kDelivered;
  }
  m.items.clear();
  return SweepOutcome::kDeleted;
}

}  // namespace incnet::server
