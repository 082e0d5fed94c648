#include "sibyl/features.hpp"

#include <algorithm>
#include <cmath>

#include "sibyl/errors.hpp"

namespace sibyl {

int bin(std::uint64_t value, const BinScheme& scheme, int bins) {
  if (bins < 2) throw InvalidParameter("binning needs at least 2 bins");
  if (!(scheme.max > 0)) throw InvalidParameter("bin scheme max must be positive");
  double pos = 0.0;
  if (scheme.kind == BinKind::Linear) {
    pos = static_cast<double>(value) * bins / scheme.max;
  } else {
    pos = std::log2(static_cast<double>(value) + 1.0) * bins / std::log2(scheme.max + 1.0);
  }
  if (pos >= bins - 1) return bins - 1;
  return static_cast<int>(std::floor(pos));
}

Observation extract(const TraceRecord& req, const HybridStorage& storage,
                    const BinningConfig& cfg, std::size_t req_index) {
  Observation obs;
  obs.device_count = static_cast<int>(storage.device_count());
  obs.size_bin = bin(req.size_pages, cfg.size, kSizeBins);
  obs.type_bin = req.op == Op::Write ? 1 : 0;

  if (const auto* e = storage.find(req.page_id)) {
    // Requests strictly between the previous touch and this one.
    const auto since = static_cast<std::uint64_t>(
        static_cast<std::int64_t>(req_index) - e->last_access_req_index - 1);
    obs.interval_bin = bin(since, cfg.interval, kIntervalBins);
    obs.count_bin = bin(e->access_count, cfg.count, kCountBins);
    obs.curr_bin = static_cast<int>(e->device);
  } else {
    obs.interval_bin = kIntervalBins - 1;
    obs.count_bin = 0;
    obs.curr_bin = static_cast<int>(storage.slowest());
  }

  for (std::size_t d = 0; d < obs.capacity_features(); ++d) {
    const auto& dev = storage.device(d);
    if (!dev.bounded() || *dev.spec.capacity_pages == 0) {
      obs.cap_bins[d] = dev.bounded() ? 0 : kCapacityBins - 1;
      continue;
    }
    BinScheme scheme = cfg.capacity.value_or(
        BinScheme{BinKind::Linear, static_cast<double>(*dev.spec.capacity_pages)});
    obs.cap_bins[d] = bin(dev.free_pages(), scheme, kCapacityBins);
  }
  return obs;
}

FeatureVector normalized(const Observation& obs) {
  FeatureVector v{};
  auto norm = [](int b, int bins) {
    return bins > 1 ? static_cast<double>(b) / static_cast<double>(bins - 1) : 0.0;
  };
  std::size_t i = 0;
  v[i++] = norm(obs.size_bin, kSizeBins);
  v[i++] = norm(obs.type_bin, kTypeBins);
  v[i++] = norm(obs.interval_bin, kIntervalBins);
  v[i++] = norm(obs.count_bin, kCountBins);
  for (std::size_t d = 0; d < obs.capacity_features(); ++d)
    v[i++] = norm(obs.cap_bins[d], kCapacityBins);
  v[i++] = norm(obs.curr_bin, obs.device_count);
  return v;
}

std::size_t packed_state_bits(int device_count) {
  return 8 + 4 + 8 + 8 + 4 + 8 * static_cast<std::size_t>(device_count - 1);
}

std::uint64_t pack_state(const Observation& obs) {
  std::uint64_t bits = 0;
  unsigned shift = 0;
  auto put = [&](int v, unsigned width) {
    bits |= (static_cast<std::uint64_t>(v) & ((1ull << width) - 1)) << shift;
    shift += width;
  };
  put(obs.size_bin, 8);
  put(obs.type_bin, 4);
  put(obs.interval_bin, 8);
  put(obs.count_bin, 8);
  put(obs.curr_bin, 4);
  for (std::size_t d = 0; d < obs.capacity_features(); ++d) put(obs.cap_bins[d], 8);
  return bits;
}

Observation unpack_state(std::uint64_t bits, int device_count) {
  Observation obs;
  obs.device_count = device_count;
  unsigned shift = 0;
  auto get = [&](unsigned width) {
    int v = static_cast<int>((bits >> shift) & ((1ull << width) - 1));
    shift += width;
    return v;
  };
  obs.size_bin = get(8);
  obs.type_bin = get(4);
  obs.interval_bin = get(8);
  obs.count_bin = get(8);
  obs.curr_bin = get(4);
  for (std::size_t d = 0; d < obs.capacity_features(); ++d) obs.cap_bins[d] = get(8);
  return obs;
}

}  // namespace sibyl
