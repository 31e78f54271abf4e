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

// Server-side memory management: the logical-to-physical address map with
// its cache policies, the 64-bit software store, and software execution of
// the map primitives.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "incnet/netfilter.hpp"
#include "incnet/switch.hpp"

namespace incnet::server {

enum class CachePolicy { kLru, kFcfs, kHash, kPoN };
const char* to_string(CachePolicy p);
std::optional<CachePolicy> cache_policy_from(std::string_view s);

// Physical cell k of a reservation is (segment k % 32, row base + k / 32).
struct Cell {
  int segment = 0;
  std::uint32_t row = 0;
  std::uint32_t flat() const { return sw::flat(segment, row); }
  bool operator==(const Cell&) const = default;
};

class AddressMap {
 public:
  enum class Status { kUnknown, kCached, kUncached, kCollided, kHeld };
  struct Lookup {
    Status status = Status::kUnknown;
    Cell cell;
  };
  struct Entry {
    std::string name;
    std::optional<std::uint32_t> cell;
    bool pinned = false;
    bool held = false;        // eviction in progress; clients must wait
    bool software = false;    // never cache again (value outside 32 bits)
    std::uint64_t window_hits = 0;
    std::uint64_t total_hits = 0;
  };
  struct Plan {
    std::vector<std::uint32_t> evict;    // laddrs
    std::vector<std::uint32_t> install;  // laddrs
  };

  AddressMap(std::uint32_t base_row, std::uint32_t capacity, CachePolicy policy,
             std::uint32_t pon_threshold = 5);

  CachePolicy policy() const { return policy_; }
  std::uint32_t capacity() const { return capacity_; }
  std::uint32_t cached() const { return static_cast<std::uint32_t>(cell_owner_.size()); }
  Cell cell(std::uint32_t k) const;
  // laddr whose mapping occupies c, if any.
  std::optional<std::uint32_t> owner(const Cell& c) const;

  // Client view.
  Lookup lookup(std::uint32_t laddr, std::string_view name) const;
  const Entry* entry(std::uint32_t laddr) const;

  // Registers name as the owner of laddr on first use. False when another
  // name already owns it (a logical-address collision).
  bool claim(std::uint32_t laddr, const std::string& name);
  // First-use allocation under the policy; nullopt means uncached.
  std::optional<Cell> allocate_mapping(std::uint32_t laddr);
  // Allocation that ignores the policy and is never evicted (counters).
  std::optional<Cell> allocate_pinned(std::uint32_t laddr, const std::string& name);
  void count_use(std::uint32_t laddr, std::uint64_t n = 1);

  // End of a cache update window: the hottest keys of the window should hold
  // the cells. Only the LRU policy replaces entries. Resets window counts.
  Plan cache_sweep();
  void hold(std::uint32_t laddr);
  // Unmaps laddr and returns its former cell.
  std::optional<Cell> evict(std::uint32_t laddr);
  std::optional<Cell> install(std::uint32_t laddr);
  void mark_software(std::uint32_t laddr);
  // Drops every mapping (first-level timeout).
  std::vector<std::pair<std::uint32_t, Cell>> unmap_all();

  const std::unordered_map<std::uint32_t, Entry>& entries() const { return entries_; }

 private:
  std::optional<std::uint32_t> free_cell(std::uint32_t laddr) const;

  std::uint32_t base_row_;
  std::uint32_t capacity_;
  CachePolicy policy_;
  std::uint32_t pon_threshold_;
  std::unordered_map<std::uint32_t, Entry> entries_;
  std::map<std::uint32_t, std::uint32_t> cell_owner_;  // cell -> laddr
  std::uint32_t next_free_ = 0;
  std::vector<std::uint32_t> released_;
};

// Controller-mediated access to switch registers.
struct RegisterAccess {
  std::function<std::int32_t(std::uint32_t flat)> read;
  std::function<void(std::uint32_t flat, std::int32_t v)> write;
};

// 64-bit software side of an INC map. The value of a key is its shadow plus
// the register of its cell while it is cached.
class ShadowStore {
 public:
  std::int64_t shadow(const std::string& name) const;
  void add(const std::string& name, std::int64_t v) { shadow_[name] += v; }
  void set(const std::string& name, std::int64_t v) { shadow_[name] = v; }
  void erase(const std::string& name) { shadow_.erase(name); }
  const std::map<std::string, std::int64_t>& all() const { return shadow_; }

  // Backups of aggregated chunks for the copy policy.
  std::map<std::uint32_t, std::vector<std::int64_t>> backups;

 private:
  std::map<std::string, std::int64_t> shadow_;
};

inline std::int64_t lazy_value(std::int64_t reg, std::int64_t snapshot) {
  return reg - snapshot;
}

// Software addTo for one key: applied to the register when the key is
// cached and the sum still fits, otherwise to the shadow. Returns the new
// total. Sets *spilled when a cached key had to take a shadow part.
std::int64_t software_add(AddressMap& amap, ShadowStore& store, const RegisterAccess& regs,
                          std::uint32_t laddr, const std::string& name, std::int64_t v,
                          bool* spilled);
std::int64_t software_get(const AddressMap& amap, const ShadowStore& store,
                          const RegisterAccess& regs, std::uint32_t laddr,
                          const std::string& name);

// Moves a cached key's register into its shadow and zeroes the cell.
void drain(AddressMap& amap, ShadowStore& store, const RegisterAccess& regs,
           std::uint32_t laddr);
// Maps laddr and moves its shadow value into the register when it fits.
// Returns false (and leaves the key in software) otherwise.
bool install_key(AddressMap& amap, ShadowStore& store, const RegisterAccess& regs,
                 std::uint32_t laddr);

// Software Stream.modify on a 64-bit value.
std::int64_t modify_wide(nf::ModifyOp op, std::int32_t para, std::int64_t v);

// Exactly-once filter for packets handled in software, keyed by
// (client, flow, seq).
class DedupFilter {
 public:
  // True the first time the triple is seen.
  bool first(std::uint16_t client, std::uint16_t flow, std::uint32_t seq);

 private:
  std::map<std::uint32_t, std::map<std::uint32_t, bool>> seen_;
};

// Two-level timeout bookkeeping for one app's map.
struct RetiredMap {
  std::map<std::string, std::int64_t> items;
  std::int64_t retired_ns = 0;
};
enum class SweepOutcome { kKept, kDelivered, kDeleted };
SweepOutcome second_level_sweep(RetiredMap& m, std::int64_t now_ns, std::int64_t level2_ns,
                                bool stub_alive,
                                std::map<std::string, std::int64_t>* delivered);

}  // namespace incnet::server
