#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "sibyl/hss.hpp"
#include "sibyl/trace.hpp"

namespace sibyl {

enum class BinKind { Linear, Log2 };

struct BinScheme {
  BinKind kind = BinKind::Linear;
  double max = 1.0;
};

/// Linear: min(bins-1, floor(value * bins / max)).
/// Log2:   min(bins-1, floor(log2(value + 1) * bins / log2(max + 1))).
int bin(std::uint64_t value, const BinScheme& scheme, int bins);

inline constexpr int kSizeBins = 8;
inline constexpr int kTypeBins = 2;
inline constexpr int kIntervalBins = 64;
inline constexpr int kCountBins = 64;
inline constexpr int kCapacityBins = 8;

/// Capacity features exist for every device except the slowest, so a dual
/// system has one and a tri-hybrid system two.
inline constexpr std::size_t kMaxCapacityFeatures = 2;
inline constexpr std::size_t kMaxFeatures = 5 + kMaxCapacityFeatures;

struct BinningConfig {
  BinScheme size{BinKind::Linear, 64};
  BinScheme interval{BinKind::Log2, 1 << 20};
  BinScheme count{BinKind::Log2, 1 << 16};
  /// Binned on free pages; an empty max means the device's capacity.
  std::optional<BinScheme> capacity;
};

/// The binned observation of one request. Field order follows the network
/// input: size, type, interval, count, capacities (fastest first), current
/// device.
struct Observation {
  int size_bin = 0;
  int type_bin = 0;
  int interval_bin = 0;
  int count_bin = 0;
  std::array<int, kMaxCapacityFeatures> cap_bins{};
  int curr_bin = 0;
  int device_count = 2;

  std::size_t capacity_features() const { return static_cast<std::size_t>(device_count - 1); }
  std::size_t feature_count() const { return 5 + capacity_features(); }

  bool operator==(const Observation&) const = default;
};

using FeatureVector = std::array<double, kMaxFeatures>;

/// Observation of `req` arriving as request `req_index` (0-based). Reads only
/// the page table and device occupancy left by requests before it.
/// First touch: interval bin is the top bin, count 0, current device the
/// slowest one.
Observation extract(const TraceRecord& req, const HybridStorage& storage,
                    const BinningConfig& cfg, std::size_t req_index);

/// Each field mapped to bin / (bins - 1); only the first feature_count()
/// entries are meaningful.
FeatureVector normalized(const Observation& obs);

/// Packed per-page state: 8/4/8/8 bits for size/type/interval/count, 4 bits
/// for the current device and 8 bits per capacity counter. 40 bits for a dual
/// system, 48 for a tri-hybrid one.
std::size_t packed_state_bits(int device_count);
std::uint64_t pack_state(const Observation& obs);
Observation unpack_state(std::uint64_t bits, int device_count);

}  // namespace sibyl
