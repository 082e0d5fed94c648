#include <doctest.h>

#include <cmath>
#include <random>

#include "sibyl/errors.hpp"
#include "sibyl/features.hpp"
#include "support.hpp"

using namespace sibyl;
using namespace testing;

namespace {

// Bin index as the number of bin lower edges at or below `value`, with the
// edges computed directly rather than by inverting the formula.
int edge_bin(std::uint64_t value, const BinScheme& s, int bins) {
  int b = 0;
  for (int k = 1; k < bins; ++k) {
    long double edge;
    if (s.kind == BinKind::Linear)
      edge = static_cast<long double>(k) * s.max / bins;
    else
      edge = std::pow(2.0L, static_cast<long double>(k) * std::log2(s.max + 1.0L) / bins) - 1.0L;
    if (static_cast<long double>(value) >= edge - 1e-12L) b = k;
  }
  return b;
}

}  // namespace

TEST_CASE("bin examples") {
  CHECK(bin(0, {BinKind::Linear, 100}, 8) == 0);
  CHECK(bin(100, {BinKind::Linear, 100}, 8) == 7);
  CHECK(bin(1000, {BinKind::Linear, 100}, 8) == 7);
  CHECK(bin(63, {BinKind::Log2, 63}, 64) == 63);
  CHECK(bin(1 << 30, {BinKind::Log2, 63}, 64) == 63);
  CHECK(bin(7, {BinKind::Log2, 63}, 64) == 32);
  CHECK(bin(0, {BinKind::Log2, 63}, 64) == 0);
  CHECK_THROWS_AS(bin(1, {BinKind::Linear, 0}, 8), InvalidParameter);
  CHECK_THROWS_AS(bin(1, {BinKind::Linear, 8}, 1), InvalidParameter);
}

TEST_CASE("bin agrees with the bin-edge oracle") {
  const std::vector<std::pair<BinScheme, int>> schemes{
      {{BinKind::Log2, 63}, 64},          {{BinKind::Linear, 64}, 8},
      {{BinKind::Linear, 100}, 8},        {{BinKind::Log2, 1 << 20}, 64},
      {{BinKind::Log2, 1 << 16}, 64},     {{BinKind::Linear, 37}, 8}};
  for (const auto& [s, bins] : schemes)
    for (std::uint64_t v = 0; v <= 4096; ++v) CHECK(bin(v, s, bins) == edge_bin(v, s, bins));
}

TEST_CASE("bin is monotone") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> val(0, 1 << 22);
  for (int i = 0; i < 20000; ++i) {
    auto a = val(rng), b = val(rng);
    if (a > b) std::swap(a, b);
    for (auto kind : {BinKind::Linear, BinKind::Log2}) {
      BinScheme s{kind, static_cast<double>(1 + rng() % (1 << 20))};
      CHECK(bin(a, s, 64) <= bin(b, s, 64));
    }
  }
}

TEST_CASE("first touch with an empty fast device") {
  HybridStorage s(dual(16));
  auto w = workload({{R, 3}});
  auto o = extract(w[0], s, {}, 0);
  CHECK(o.size_bin == 0);
  CHECK(o.type_bin == 0);
  CHECK(o.interval_bin == 63);
  CHECK(o.count_bin == 0);
  CHECK(o.cap_bins[0] == 7);
  CHECK(o.curr_bin == 1);
  CHECK(o.feature_count() == 6);
}

TEST_CASE("write right after a read of the same fast page") {
  HybridStorage s(dual(16));
  auto w = workload({{R, 3}, {W, 3}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  auto o = extract(w[1], s, {}, 1);
  CHECK(o.type_bin == 1);
  CHECK(o.interval_bin == 0);
  CHECK(o.curr_bin == 0);
  CHECK(o.count_bin == bin(1, BinningConfig{}.count, kCountBins));
}

TEST_CASE("interval counts the requests in between") {
  HybridStorage s(dual(16));
  auto w = workload({{R, 3}, {R, 4}, {R, 5}, {R, 3}});
  for (std::size_t i = 0; i < 3; ++i) s.apply_placement(w[i], 0, VictimPolicy::LRU, i);
  auto o = extract(w[3], s, {}, 3);
  CHECK(o.interval_bin == bin(2, BinningConfig{}.interval, kIntervalBins));
}

TEST_CASE("capacity bin at half free follows the floor rule") {
  HybridStorage s(dual(16));
  auto w = workload({{W, 0, 8}, {R, 100}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  CHECK(s.device(0).free_pages() == 8);
  CHECK(extract(w[1], s, {}, 1).cap_bins[0] == 4);
}

TEST_CASE("capacity bin edge cases") {
  HybridStorage unbounded({device_preset("H"), device_preset("L")});
  auto w = workload({{R, 1}});
  CHECK(extract(w[0], unbounded, {}, 0).cap_bins[0] == 7);

  HybridStorage full(dual(1));
  full.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  auto w2 = workload({{R, 2}});
  CHECK(extract(w2[0], full, {}, 1).cap_bins[0] == 0);

  HybridStorage three(tri(4, 8));
  auto o = extract(w[0], three, {}, 0);
  CHECK(o.feature_count() == 7);
  CHECK(o.cap_bins[0] == 7);
  CHECK(o.cap_bins[1] == 7);
  CHECK(o.curr_bin == 2);
}

TEST_CASE("extraction only reads state left by earlier requests") {
  // Two storages that differ only in a later request's effect give the same
  // observation for the current request.
  auto w = workload({{W, 1}, {W, 2}, {R, 1}});
  HybridStorage a(dual(4)), b(dual(4));
  a.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  b.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  auto before = extract(w[1], a, {}, 1);
  a.apply_placement(w[2], 1, VictimPolicy::LRU, 2);
  CHECK(extract(w[1], b, {}, 1) == before);
}

TEST_CASE("normalized vectors lie in [0, 1] and use bin / (bins - 1)") {
  Observation o;
  o.size_bin = 7;
  o.type_bin = 1;
  o.interval_bin = 21;
  o.count_bin = 63;
  o.cap_bins[0] = 4;
  o.curr_bin = 1;
  auto v = normalized(o);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 1.0);
  CHECK(v[2] == doctest::Approx(21.0 / 63.0));
  CHECK(v[3] == 1.0);
  CHECK(v[4] == doctest::Approx(4.0 / 7.0));
  CHECK(v[5] == 1.0);

  std::mt19937_64 rng(2);
  HybridStorage s(tri(5, 9));
  for (std::size_t i = 0; i < 500; ++i) {
    auto req = make_record(i, rng() % 2 ? Op::Read : Op::Write, (rng() % 50) * 4096,
                           (1 + rng() % 80) * 4096);
    auto obs = extract(req, s, {}, i);
    auto x = normalized(obs);
    for (std::size_t k = 0; k < obs.feature_count(); ++k) {
      CHECK(x[k] >= 0.0);
      CHECK(x[k] <= 1.0);
    }
    s.apply_placement(req, rng() % 3, VictimPolicy::LRU, i);
  }
}

TEST_CASE("packed state is 40 bits dual, 48 bits tri, and round-trips") {
  CHECK(packed_state_bits(2) == 40);
  CHECK(packed_state_bits(3) == 48);
  std::mt19937_64 rng(4);
  for (int n : {2, 3}) {
    for (int i = 0; i < 1000; ++i) {
      Observation o;
      o.device_count = n;
      o.size_bin = static_cast<int>(rng() % kSizeBins);
      o.type_bin = static_cast<int>(rng() % kTypeBins);
      o.interval_bin = static_cast<int>(rng() % kIntervalBins);
      o.count_bin = static_cast<int>(rng() % kCountBins);
      for (std::size_t d = 0; d < o.capacity_features(); ++d)
        o.cap_bins[d] = static_cast<int>(rng() % kCapacityBins);
      o.curr_bin = static_cast<int>(rng() % n);
      const auto bits = pack_state(o);
      CHECK(bits < (1ull << packed_state_bits(n)));
      CHECK(unpack_state(bits, n) == o);
    }
  }
}
