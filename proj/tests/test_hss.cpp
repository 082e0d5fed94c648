#include <doctest.h>

#include <random>

#include "sibyl/errors.hpp"
#include "sibyl/hss.hpp"
#include "support.hpp"

using namespace sibyl;
using namespace testing;

namespace {

double svc(const char* preset, Op op, std::uint64_t bytes = 4096) {
  return device_service_us(device_preset(preset), op, bytes);
}

}  // namespace

TEST_CASE("device_service_us is base plus transfer time") {
  CHECK(device_service_us(device_preset("H"), Op::Read, 4096) ==
        doctest::Approx(11.706666666666667).epsilon(1e-12));
  DeviceSpec unit{"u", 0.0, 0.0, 1.0, 1.0, std::nullopt};
  CHECK(device_service_us(unit, Op::Read, 1) == 1.0);
  DeviceSpec slope{"s", 0.0, 0.0, 550.0, 510.0, std::nullopt};
  CHECK(device_service_us(slope, Op::Write, 8192) == 2 * device_service_us(slope, Op::Write, 4096));
}

TEST_CASE("presets are pointwise ordered by speed") {
  for (auto op : {Op::Read, Op::Write})
    for (std::uint64_t bytes : {1ull, 512ull, 4096ull, 1ull << 20}) {
      CHECK(svc("H", op, bytes) < svc("M", op, bytes));
      CHECK(svc("M", op, bytes) < svc("L_SSD", op, bytes));
      CHECK(svc("L_SSD", op, bytes) < svc("L", op, bytes));
    }
  CHECK_THROWS_AS(device_preset("Z"), UnknownDevice);
}

TEST_CASE("fast_capacity_for") {
  WorkloadStats s;
  s.working_set_pages = 6265;
  CHECK(fast_capacity_for(s, 0.10) == 626);
  CHECK(fast_capacity_for(s, 1.0) == 6265);
  s.working_set_pages = 5;
  CHECK(fast_capacity_for(s, 0.10) == 1);
  CHECK_THROWS_AS(fast_capacity_for(s, 0.0), InvalidFraction);
  CHECK_THROWS_AS(fast_capacity_for(s, 1.5), InvalidFraction);
}

TEST_CASE("write to an empty fast device") {
  HybridStorage s(dual(4));
  auto w = workload({{W, 7}});
  auto out = s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  CHECK_FALSE(out.eviction_occurred);
  CHECK_FALSE(out.promoted);
  CHECK(out.evicted_pages == 0);
  CHECK(out.eviction_latency_us == 0.0);
  CHECK(out.latency_us == svc("H", Op::Write));
  CHECK(s.find(7)->device == 0);
  CHECK(s.find(7)->access_count == 1);
  CHECK(s.device(0).free_pages() == 3);
}

TEST_CASE("eviction of one LRU victim") {
  HybridStorage s(dual(1));
  auto w = workload({{W, 1}, {W, 2}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  auto out = s.apply_placement(w[1], 0, VictimPolicy::LRU, 1);
  const double evict = svc("H", Op::Read) + svc("L", Op::Write);
  CHECK(out.eviction_occurred);
  CHECK(out.evicted_pages == 1);
  CHECK(out.eviction_latency_us == doctest::Approx(evict).epsilon(1e-12));
  CHECK(out.latency_us == doctest::Approx(svc("H", Op::Write) + evict).epsilon(1e-12));
  CHECK(s.find(1)->device == 1);
  CHECK(s.find(2)->device == 0);
}

TEST_CASE("hit on the target device neither promotes nor evicts") {
  HybridStorage s(dual(1));
  auto w = workload({{W, 1}, {R, 1}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  auto out = s.apply_placement(w[1], 0, VictimPolicy::LRU, 1);
  CHECK_FALSE(out.promoted);
  CHECK(out.evicted_pages == 0);
  CHECK(out.latency_us == svc("H", Op::Read));
  CHECK(s.find(1)->access_count == 2);
  CHECK(s.find(1)->last_access_req_index == 1);
}

TEST_CASE("promotion pays a migration") {
  HybridStorage s(dual(2));
  auto w = workload({{W, 3}, {R, 3}});
  s.apply_placement(w[0], 1, VictimPolicy::LRU, 0);
  auto out = s.apply_placement(w[1], 0, VictimPolicy::LRU, 1);
  CHECK(out.promoted);
  CHECK(out.migrated_pages == 1);
  CHECK(out.latency_us ==
        doctest::Approx(svc("H", Op::Read) + svc("L", Op::Read) + svc("H", Op::Write)).epsilon(1e-12));
  CHECK(s.find(3)->device == 0);
}

TEST_CASE("LRU picks the least recently used page") {
  HybridStorage s(dual(2));
  auto w = workload({{W, 1}, {W, 2}, {R, 1}, {W, 3}});
  for (std::size_t i = 0; i < w.size(); ++i) s.apply_placement(w[i], 0, VictimPolicy::LRU, i);
  CHECK(s.find(2)->device == 1);
  CHECK(s.find(1)->device == 0);
  CHECK(s.find(3)->device == 0);
  CHECK(s.resident_pages(0) == std::vector<std::uint64_t>{1, 3});
}

TEST_CASE("Belady picks the furthest next use") {
  auto w = workload({{W, 1}, {W, 2}, {W, 3}, {R, 1}, {R, 2}, {R, 1}});
  FutureIndex future(w);
  CHECK(future.next_use(0, 0) == 3);
  CHECK(future.next_use(1, 0) == 4);
  CHECK(future.next_use(2, 0) == kNeverUsed);
  CHECK(future.next_use(3, 0) == 5);

  HybridStorage s(dual(2));
  s.set_future(&future);
  for (std::size_t i = 0; i < 3; ++i) s.apply_placement(w[i], 0, VictimPolicy::Belady, i);
  // Page 2 is needed at 4, page 1 at 3; page 2 goes.
  CHECK(s.find(2)->device == 1);
  CHECK(s.find(1)->device == 0);
  auto victim = s.belady_victim(0, 0, 0);
  REQUIRE(victim);
  CHECK(victim->first == kNeverUsed);
  CHECK(victim->second == 3);

  HybridStorage blind(dual(1));
  blind.apply_placement(w[0], 0, VictimPolicy::Belady, 0);
  CHECK_THROWS_AS(blind.apply_placement(w[1], 0, VictimPolicy::Belady, 1), InvalidParameter);
}

TEST_CASE("FutureIndex covers every page of multi-page requests") {
  auto w = workload({{W, 10, 3}, {R, 11}, {R, 12, 2}});
  FutureIndex f(w);
  CHECK(f.next_use(0, 0) == kNeverUsed);
  CHECK(f.next_use(0, 1) == 1);
  CHECK(f.next_use(0, 2) == 2);
  CHECK(f.next_use(2, 1) == kNeverUsed);
}

TEST_CASE("overflow from a small middle device continues down") {
  HybridStorage s(tri(3, 1));
  auto w = workload({{W, 1, 3}, {W, 9}, {W, 20, 3}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  s.apply_placement(w[1], 1, VictimPolicy::LRU, 1);
  auto out = s.apply_placement(w[2], 0, VictimPolicy::LRU, 2);
  s.check_invariants();
  // Three victims leave H; each first pushes M's current page to L.
  CHECK(out.evicted_pages == 6);
  CHECK(s.device(0).resident == 3);
  CHECK(s.device(1).resident == 1);
  CHECK(s.device(2).resident == 3);
  CHECK(s.find(9)->device == 2);
  const double h_to_m = svc("H", Op::Read) + svc("M", Op::Write);
  const double m_to_l = svc("M", Op::Read) + svc("L", Op::Write);
  CHECK(out.eviction_latency_us == doctest::Approx(3 * h_to_m + 3 * m_to_l).epsilon(1e-12));
}

TEST_CASE("evictions cascade one level down in a tri-hybrid system") {
  HybridStorage s(tri(1, 1));
  auto w = workload({{W, 1}, {W, 2}, {W, 3}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  s.apply_placement(w[1], 1, VictimPolicy::LRU, 1);
  auto out = s.apply_placement(w[2], 0, VictimPolicy::LRU, 2);
  CHECK(out.evicted_pages == 2);
  CHECK(s.find(3)->device == 0);
  CHECK(s.find(1)->device == 1);
  CHECK(s.find(2)->device == 2);
  const double expect = svc("M", Op::Read) + svc("L", Op::Write) + svc("H", Op::Read) +
                        svc("M", Op::Write);
  CHECK(out.eviction_latency_us == doctest::Approx(expect).epsilon(1e-12));
  s.check_invariants();
}

TEST_CASE("requests larger than the target device go to the first one that fits") {
  HybridStorage s(tri(2, 4));
  auto w = workload({{W, 0, 3}, {W, 10, 8}});
  CHECK(s.effective_target(0, 3) == 1);
  auto a = s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  CHECK(a.device == 1);
  auto b = s.apply_placement(w[1], 0, VictimPolicy::LRU, 1);
  CHECK(b.device == 2);
  s.check_invariants();

  HybridStorage tight({bounded("H", 1), bounded("L", 2)});
  CHECK_THROWS_AS(tight.effective_target(0, 3), NoCapacityAnywhere);
  CHECK_THROWS_AS(tight.effective_target(2, 1), UnknownDevice);
}

TEST_CASE("pages of the request itself are never chosen as victims") {
  HybridStorage s(dual(2));
  auto w = workload({{W, 5}, {W, 9}, {W, 4, 2}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  s.apply_placement(w[1], 0, VictimPolicy::LRU, 1);
  // Request covers pages 4 and 5; 5 is the LRU page but is pinned.
  auto out = s.apply_placement(w[2], 0, VictimPolicy::LRU, 2);
  CHECK(out.evicted_pages == 1);
  CHECK(s.find(9)->device == 1);
  CHECK(s.find(4)->device == 0);
  CHECK(s.find(5)->device == 0);
  s.check_invariants();
}

TEST_CASE("a full slowest device cannot absorb evictions") {
  HybridStorage s({bounded("H", 1), bounded("L", 1)});
  auto w = workload({{W, 1}, {W, 2}, {W, 3}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  s.apply_placement(w[1], 1, VictimPolicy::LRU, 1);
  CHECK_THROWS_AS(s.apply_placement(w[2], 0, VictimPolicy::LRU, 2), NoCapacityAnywhere);
}

TEST_CASE("migrate moves one page and charges read plus write") {
  HybridStorage s(dual(2));
  auto w = workload({{W, 1}});
  s.apply_placement(w[0], 0, VictimPolicy::LRU, 0);
  auto ev = s.migrate(1, 1, VictimPolicy::LRU);
  CHECK(ev.from == 0);
  CHECK(ev.to == 1);
  CHECK(ev.cost_us == doctest::Approx(svc("H", Op::Read) + svc("L", Op::Write)).epsilon(1e-12));
  CHECK(s.find(1)->device == 1);
  CHECK(s.migrate(1, 1, VictimPolicy::LRU).cost_us == 0.0);
  s.check_invariants();
}

TEST_CASE("outcome eviction fields agree and storage stays consistent") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const bool three = trial % 2;
    auto devices = three ? tri(1 + rng() % 4, 1 + rng() % 8) : dual(1 + rng() % 6);
    HybridStorage s(devices);
    std::set<std::uint64_t> touched;
    for (std::size_t i = 0; i < 300; ++i) {
      const auto page = rng() % 40;
      const auto pages = 1 + rng() % 3;
      auto req = make_record(i, rng() % 2 ? Op::Read : Op::Write, page * 4096, pages * 4096);
      auto out = s.apply_placement(req, rng() % devices.size(), VictimPolicy::LRU, i);
      CHECK(out.latency_us > 0);
      CHECK(out.eviction_occurred == (out.evicted_pages > 0));
      CHECK(out.eviction_occurred == (out.eviction_latency_us > 0));
      for (std::uint64_t k = 0; k < pages; ++k) touched.insert(page + k);
      s.check_invariants();
    }
    std::uint64_t resident = 0;
    for (const auto& d : s.devices()) resident += d.resident;
    CHECK(resident == touched.size());
  }
}

TEST_CASE("replaying the same sequence gives identical outcomes, with and without jitter") {
  auto run = [](double sigma) {
    HybridStorage s(dual(3));
    s.set_jitter(sigma, 42);
    std::vector<double> lat;
    std::mt19937_64 rng(8);
    for (std::size_t i = 0; i < 200; ++i) {
      auto req = make_record(i, Op::Write, (rng() % 10) * 4096, 4096);
      lat.push_back(s.apply_placement(req, rng() % 2, VictimPolicy::LRU, i).latency_us);
    }
    return lat;
  };
  CHECK(run(0.0) == run(0.0));
  CHECK(run(0.1) == run(0.1));
  CHECK(run(0.1) != run(0.0));
  for (double v : run(0.5)) CHECK(v > 0);
  HybridStorage s(dual(1));
  CHECK_THROWS_AS(s.set_jitter(-1, 0), InvalidParameter);
}

TEST_CASE("construction validates devices") {
  CHECK_THROWS_AS(HybridStorage({}), InvalidParameter);
  auto d = device_preset("H");
  CHECK_THROWS_AS(HybridStorage({d, d, d, d}), InvalidParameter);
  auto bad = d;
  bad.read_bw_mbps = 0;
  CHECK_THROWS_AS(HybridStorage({bad}), InvalidParameter);
  bad = d;
  bad.write_base_us = -1;
  CHECK_THROWS_AS(HybridStorage({bad}), InvalidParameter);
}
