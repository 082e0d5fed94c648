#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <vector>

#include "sibyl/hss.hpp"
#include "sibyl/trace.hpp"

namespace testing {

struct Req {
  sibyl::Op op;
  std::uint64_t page;
  std::uint64_t pages = 1;
};

inline sibyl::Workload workload(std::initializer_list<Req> reqs) {
  sibyl::Workload w;
  std::uint64_t t = 0;
  for (const auto& r : reqs)
    w.records.push_back(sibyl::make_record(t++, r.op, r.page * sibyl::kDefaultPageSize,
                                           r.pages * sibyl::kDefaultPageSize));
  return w;
}

inline sibyl::DeviceSpec bounded(const char* preset, std::optional<std::uint64_t> pages) {
  auto d = sibyl::device_preset(preset);
  d.capacity_pages = pages;
  return d;
}

// Fast H with `fast_pages` capacity over an unbounded slow device.
inline std::vector<sibyl::DeviceSpec> dual(std::uint64_t fast_pages, const char* slow = "L") {
  return {bounded("H", fast_pages), sibyl::device_preset(slow)};
}

inline std::vector<sibyl::DeviceSpec> tri(std::uint64_t h_pages, std::uint64_t m_pages) {
  return {bounded("H", h_pages), bounded("M", m_pages), sibyl::device_preset("L")};
}

constexpr auto R = sibyl::Op::Read;
constexpr auto W = sibyl::Op::Write;

}  // namespace testing
