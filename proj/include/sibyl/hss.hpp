#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sibyl/trace.hpp"

namespace sibyl {

/// Latency/bandwidth model of one device. An empty capacity means unbounded.
struct DeviceSpec {
  std::string name;
  double read_base_us = 0.0;
  double write_base_us = 0.0;
  double read_bw_mbps = 1.0;
  double write_bw_mbps = 1.0;
  std::optional<std::uint64_t> capacity_pages;

  bool bounded() const { return capacity_pages.has_value(); }
};

/// Presets "H", "M", "L" and "L_SSD" with bandwidths of the evaluated
/// devices and configurable base latencies. Capacity is left unbounded.
DeviceSpec device_preset(std::string_view name);

/// base_latency(op) + size_bytes / bandwidth(op), in microseconds.
/// 1 MB/s moves one byte per microsecond.
double device_service_us(const DeviceSpec& spec, Op op, std::uint64_t size_bytes);

/// max(1, floor(fraction * working_set_pages)).
std::uint64_t fast_capacity_for(const WorkloadStats& stats, double fraction);

enum class VictimPolicy { LRU, Belady };

inline constexpr std::uint64_t kNeverUsed = std::numeric_limits<std::uint64_t>::max();
inline constexpr std::int64_t kNoAccess = -1;

struct PageEntry {
  std::uint32_t device = 0;
  std::uint64_t access_count = 0;
  std::int64_t last_access_req_index = kNoAccess;
  std::uint64_t epoch_count = 0;
  std::uint64_t next_use = kNeverUsed;
};

using PageTable = std::unordered_map<std::uint64_t, PageEntry>;

struct ServiceOutcome {
  double latency_us = 0.0;          // L_t, includes migration and eviction work
  bool eviction_occurred = false;
  double eviction_latency_us = 0.0;  // L_e
  std::uint64_t evicted_pages = 0;
  bool promoted = false;
  std::uint64_t migrated_pages = 0;
  std::uint32_t device = 0;  // device that ended up holding the request
};

struct MigrationEvent {
  std::uint64_t page_id = 0;
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double cost_us = 0.0;
};

/// Per-request next-reference table for Belady victim selection and the
/// oracle policy. next_use(i, k) is the index of the first request after i
/// touching page (records[i].page_id + k), or kNeverUsed.
class FutureIndex {
 public:
  explicit FutureIndex(const Workload& w);

  std::uint64_t next_use(std::size_t req_index, std::uint64_t page_offset) const {
    return next_[offsets_[req_index] + page_offset];
  }
  std::size_t size() const { return offsets_.size() - 1; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::uint64_t> next_;
};

struct DeviceState {
  DeviceSpec spec;
  std::uint64_t resident = 0;

  bool bounded() const { return spec.bounded(); }
  std::uint64_t free_pages() const {
    return bounded() ? *spec.capacity_pages - resident
                     : std::numeric_limits<std::uint64_t>::max();
  }
};

/// The hybrid storage system: devices ordered fastest first, one unified
/// logical page space and the residency of every page touched so far.
/// Evictions cascade one level down (device d to d + 1).
class HybridStorage {
 public:
  explicit HybridStorage(std::vector<DeviceSpec> devices,
                         std::uint64_t page_size = kDefaultPageSize);

  /// Required before any Belady eviction. The index must outlive the storage.
  void set_future(const FutureIndex* future) { future_ = future; }

  /// Multiplicative Gaussian jitter on service times; sigma 0 disables it.
  void set_jitter(double sigma, std::uint64_t seed);

  /// Places every page of `req` on `target` (or the first slower device able
  /// to hold the whole request), migrating and evicting as needed.
  ServiceOutcome apply_placement(const TraceRecord& req, std::size_t target,
                                 VictimPolicy victims, std::size_t req_index);

  /// Moves one resident page to another device. Used for epoch demotion.
  MigrationEvent migrate(std::uint64_t page_id, std::size_t to, VictimPolicy victims);

  void reset_epoch_counts();

  std::size_t device_count() const { return devices_.size(); }
  const DeviceState& device(std::size_t i) const { return devices_.at(i); }
  const std::vector<DeviceState>& devices() const { return devices_; }
  std::size_t slowest() const { return devices_.size() - 1; }
  std::uint64_t page_size() const { return page_size_; }
  const PageTable& pages() const { return table_; }
  const PageEntry* find(std::uint64_t page_id) const;

  /// Resident pages of a device, least recently used first.
  std::vector<std::uint64_t> resident_pages(std::size_t dev) const;

  /// Resident page of `dev` with the furthest next use, skipping the pages
  /// [pin_first, pin_first + pin_count). Returns {next_use, page}. Only
  /// meaningful with a future index set.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> belady_victim(
      std::size_t dev, std::uint64_t pin_first, std::uint64_t pin_count) const;

  /// Device a request of `size_pages` lands on when `target` is requested.
  std::size_t effective_target(std::size_t target, std::uint64_t size_pages) const;

  /// Throws std::logic_error if residency bookkeeping is inconsistent.
  void check_invariants() const;

 private:
  using LruKey = std::pair<std::int64_t, std::uint64_t>;
  using BeladyKey = std::pair<std::uint64_t, std::uint64_t>;

  struct Pin {
    std::uint64_t first = 0;
    std::uint64_t count = 0;
    bool contains(std::uint64_t p) const { return p >= first && p - first < count; }
  };

  double make_room(std::size_t dev, std::uint64_t count, const Pin& pin,
                   VictimPolicy victims, std::uint64_t& evicted);
  void attach(std::uint64_t page, PageEntry& e, std::size_t dev);
  void detach(std::uint64_t page, const PageEntry& e);
  double jitter(double us);

  std::vector<DeviceState> devices_;
  std::uint64_t page_size_;
  PageTable table_;
  std::vector<std::set<LruKey>> lru_;
  std::vector<std::set<BeladyKey>> belady_;
  const FutureIndex* future_ = nullptr;
  double jitter_sigma_ = 0.0;
  std::mt19937_64 jitter_rng_;
};

}  // namespace sibyl
