#include "sibyl/hss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sibyl/errors.hpp"

namespace sibyl {

DeviceSpec device_preset(std::string_view name) {
  // Bandwidths: H 2.4/2 GB/s, M 550/510 MB/s, L 210 MB/s sustained,
  // L_SSD 520/450 MB/s. Base latencies are model parameters.
  if (name == "H") return {"H", 10.0, 10.0, 2400.0, 2000.0, std::nullopt};
  if (name == "M") return {"M", 80.0, 90.0, 550.0, 510.0, std::nullopt};
  if (name == "L") return {"L", 4000.0, 4500.0, 210.0, 210.0, std::nullopt};
  if (name == "L_SSD") return {"L_SSD", 150.0, 180.0, 520.0, 450.0, std::nullopt};
  throw UnknownDevice("unknown device preset: " + std::string(name));
}

double device_service_us(const DeviceSpec& spec, Op op, std::uint64_t size_bytes) {
  const bool read = op == Op::Read;
  const double base = read ? spec.read_base_us : spec.write_base_us;
  const double bw = read ? spec.read_bw_mbps : spec.write_bw_mbps;
  return base + static_cast<double>(size_bytes) / bw;
}

std::uint64_t fast_capacity_for(const WorkloadStats& stats, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidFraction("capacity fraction must be in (0, 1], got " +
                          std::to_string(fraction));
  auto pages = static_cast<std::uint64_t>(
      std::floor(fraction * static_cast<double>(stats.working_set_pages)));
  return std::max<std::uint64_t>(1, pages);
}

FutureIndex::FutureIndex(const Workload& w) {
  offsets_.reserve(w.size() + 1);
  offsets_.push_back(0);
  for (const auto& r : w.records) offsets_.push_back(offsets_.back() + r.size_pages);
  next_.assign(offsets_.back(), kNeverUsed);

  std::unordered_map<std::uint64_t, std::uint64_t> seen;
  for (std::size_t i = w.size(); i-- > 0;) {
    const auto& r = w.records[i];
    for (std::uint64_t k = 0; k < r.size_pages; ++k) {
      auto [it, inserted] = seen.try_emplace(r.page_id + k, i);
      if (!inserted) {
        next_[offsets_[i] + k] = it->second;
        it->second = i;
      }
    }
  }
}

HybridStorage::HybridStorage(std::vector<DeviceSpec> devices, std::uint64_t page_size)
    : page_size_(page_size) {
  if (devices.empty() || devices.size() > 3)
    throw InvalidParameter("a hybrid storage system has 1 to 3 devices");
  for (auto& spec : devices) {
    if (spec.read_base_us < 0 || spec.write_base_us < 0)
      throw InvalidParameter("device " + spec.name + ": negative base latency");
    if (!(spec.read_bw_mbps > 0) || !(spec.write_bw_mbps > 0))
      throw InvalidParameter("device " + spec.name + ": bandwidth must be positive");
    devices_.push_back(DeviceState{std::move(spec), 0});
  }
  lru_.resize(devices_.size());
  belady_.resize(devices_.size());
}

void HybridStorage::set_jitter(double sigma, std::uint64_t seed) {
  if (sigma < 0) throw InvalidParameter("jitter sigma must be >= 0");
  jitter_sigma_ = sigma;
  jitter_rng_.seed(seed);
}

double HybridStorage::jitter(double us) {
  if (jitter_sigma_ == 0.0 || us == 0.0) return us;
  std::normal_distribution<double> noise(0.0, jitter_sigma_);
  return us * std::max(0.05, 1.0 + noise(jitter_rng_));
}

const PageEntry* HybridStorage::find(std::uint64_t page_id) const {
  auto it = table_.find(page_id);
  return it == table_.end() ? nullptr : &it->second;
}

std::size_t HybridStorage::effective_target(std::size_t target,
                                            std::uint64_t size_pages) const {
  if (target >= devices_.size())
    throw UnknownDevice("device index " + std::to_string(target) + " out of range");
  std::size_t dev = target;
  while (dev < devices_.size() && devices_[dev].bounded() &&
         *devices_[dev].spec.capacity_pages < size_pages)
    ++dev;
  if (dev == devices_.size())
    throw NoCapacityAnywhere("no device can hold a " + std::to_string(size_pages) +
                             "-page request");
  return dev;
}

void HybridStorage::attach(std::uint64_t page, PageEntry& e, std::size_t dev) {
  e.device = static_cast<std::uint32_t>(dev);
  ++devices_[dev].resident;
  lru_[dev].emplace(e.last_access_req_index, page);
  belady_[dev].emplace(e.next_use, page);
}

void HybridStorage::detach(std::uint64_t page, const PageEntry& e) {
  --devices_[e.device].resident;
  lru_[e.device].erase({e.last_access_req_index, page});
  belady_[e.device].erase({e.next_use, page});
}

double HybridStorage::make_room(std::size_t dev, std::uint64_t count, const Pin& pin,
                                VictimPolicy victims, std::uint64_t& evicted) {
  if (dev + 1 >= devices_.size())
    throw NoCapacityAnywhere("device " + devices_[dev].spec.name +
                             " is full and has no slower device");
  const std::size_t next = dev + 1;
  double cost = 0.0;

  std::vector<std::uint64_t> chosen;
  chosen.reserve(count);
  if (victims == VictimPolicy::LRU) {
    for (auto it = lru_[dev].begin(); it != lru_[dev].end() && chosen.size() < count; ++it)
      if (!pin.contains(it->second)) chosen.push_back(it->second);
  } else {
    if (future_ == nullptr)
      throw InvalidParameter("Belady victim selection needs a future index");
    for (auto it = belady_[dev].rbegin(); it != belady_[dev].rend() && chosen.size() < count;
         ++it)
      if (!pin.contains(it->second)) chosen.push_back(it->second);
  }
  if (chosen.size() < count)
    throw NoCapacityAnywhere("cannot free " + std::to_string(count) + " pages on " +
                             devices_[dev].spec.name);

  const double per_page = device_service_us(devices_[dev].spec, Op::Read, page_size_) +
                          device_service_us(devices_[next].spec, Op::Write, page_size_);
  // Each victim makes room for itself one level down, so a small middle
  // device passes overflow further down.
  for (auto page : chosen) {
    if (devices_[next].bounded() && devices_[next].free_pages() == 0)
      cost += make_room(next, 1, pin, victims, evicted);
    auto& e = table_.at(page);
    detach(page, e);
    attach(page, e, next);
    cost += per_page;
    ++evicted;
  }
  return cost;
}

ServiceOutcome HybridStorage::apply_placement(const TraceRecord& req, std::size_t target,
                                              VictimPolicy victims, std::size_t req_index) {
  const std::size_t dev = effective_target(target, req.size_pages);
  const Pin pin{req.page_id, req.size_pages};

  ServiceOutcome out;
  out.device = static_cast<std::uint32_t>(dev);

  // Pages moving to `dev` leave their old device first, so the space they
  // free there can absorb evictions cascading from `dev`.
  std::uint64_t incoming = 0;
  std::vector<std::uint64_t> moved_from(devices_.size(), 0);
  for (std::uint64_t k = 0; k < req.size_pages; ++k) {
    auto it = table_.find(req.page_id + k);
    if (it == table_.end()) {
      ++incoming;
    } else if (it->second.device != dev) {
      ++incoming;
      ++moved_from[it->second.device];
      if (it->second.device > dev) out.promoted = true;
      detach(it->first, it->second);
    }
  }

  double eviction = 0.0;
  auto& target_state = devices_[dev];
  if (target_state.bounded() && target_state.free_pages() < incoming)
    eviction = make_room(dev, incoming - target_state.free_pages(), pin, victims,
                         out.evicted_pages);

  for (std::uint64_t k = 0; k < req.size_pages; ++k) {
    const std::uint64_t page = req.page_id + k;
    auto [it, inserted] = table_.try_emplace(page);
    auto& e = it->second;
    if (!inserted && e.device == dev) detach(page, e);
    ++e.access_count;
    ++e.epoch_count;
    e.last_access_req_index = static_cast<std::int64_t>(req_index);
    e.next_use = future_ ? future_->next_use(req_index, k) : kNeverUsed;
    attach(page, e, dev);
  }

  double migration = 0.0;
  for (std::size_t src = 0; src < devices_.size(); ++src) {
    if (moved_from[src] == 0) continue;
    const std::uint64_t bytes = moved_from[src] * page_size_;
    migration += device_service_us(devices_[src].spec, Op::Read, bytes) +
                 device_service_us(devices_[dev].spec, Op::Write, bytes);
    out.migrated_pages += moved_from[src];
  }

  out.eviction_occurred = out.evicted_pages > 0;
  out.eviction_latency_us = jitter(eviction);
  out.latency_us = jitter(device_service_us(target_state.spec, req.op, req.size) + migration) +
                   out.eviction_latency_us;
  return out;
}

MigrationEvent HybridStorage::migrate(std::uint64_t page_id, std::size_t to,
                                      VictimPolicy victims) {
  if (to >= devices_.size())
    throw UnknownDevice("device index " + std::to_string(to) + " out of range");
  auto it = table_.find(page_id);
  if (it == table_.end())
    throw std::invalid_argument("page " + std::to_string(page_id) + " is not mapped");
  auto& e = it->second;
  MigrationEvent ev{page_id, e.device, static_cast<std::uint32_t>(to), 0.0};
  if (e.device == to) return ev;

  std::uint64_t evicted = 0;
  if (devices_[to].bounded() && devices_[to].free_pages() < 1)
    ev.cost_us += make_room(to, 1, Pin{page_id, 1}, victims, evicted);
  ev.cost_us += device_service_us(devices_[e.device].spec, Op::Read, page_size_) +
                device_service_us(devices_[to].spec, Op::Write, page_size_);
  detach(page_id, e);
  attach(page_id, e, to);
  ev.cost_us = jitter(ev.cost_us);
  return ev;
}

void HybridStorage::reset_epoch_counts() {
  for (auto& [page, e] : table_) e.epoch_count = 0;
}

std::vector<std::uint64_t> HybridStorage::resident_pages(std::size_t dev) const {
  std::vector<std::uint64_t> out;
  out.reserve(lru_.at(dev).size());
  for (const auto& [last, page] : lru_[dev]) out.push_back(page);
  return out;
}

std::optional<std::pair<std::uint64_t, std::uint64_t>> HybridStorage::belady_victim(
    std::size_t dev, std::uint64_t pin_first, std::uint64_t pin_count) const {
  const Pin pin{pin_first, pin_count};
  for (auto it = belady_.at(dev).rbegin(); it != belady_[dev].rend(); ++it)
    if (!pin.contains(it->second)) return *it;
  return std::nullopt;
}

void HybridStorage::check_invariants() const {
  std::uint64_t total = 0;
  for (std::size_t d = 0; d < devices_.size(); ++d) {
    const auto& s = devices_[d];
    if (s.resident != lru_[d].size() || s.resident != belady_[d].size())
      throw std::logic_error("device " + s.spec.name + ": resident count out of sync");
    if (s.bounded() && s.resident > *s.spec.capacity_pages)
      throw std::logic_error("device " + s.spec.name + ": negative free pages");
    total += s.resident;
  }
  if (total != table_.size())
    throw std::logic_error("resident pages do not match the page table");
  for (const auto& [page, e] : table_) {
    if (e.device >= devices_.size())
      throw std::logic_error("page mapped to an unknown device");
    if (!lru_[e.device].count({e.last_access_req_index, page}))
      throw std::logic_error("page " + std::to_string(page) + " missing from its device");
    if (e.access_count < 1) throw std::logic_error("mapped page with zero accesses");
  }
}

}  // namespace sibyl
