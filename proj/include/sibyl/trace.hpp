#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sibyl {

enum class Op : std::uint8_t { Read = 0, Write = 1 };

inline constexpr std::uint64_t kDefaultPageSize = 4096;

/// One block-I/O request. page_id and size_pages are derived from offset and
/// size for the page size the record was parsed with.
struct TraceRecord {
  std::uint64_t timestamp = 0;
  Op op = Op::Read;
  std::uint64_t offset = 0;
  std::uint64_t size = 1;
  std::uint64_t page_id = 0;
  std::uint64_t size_pages = 1;

  bool operator==(const TraceRecord&) const = default;
};

TraceRecord make_record(std::uint64_t timestamp, Op op, std::uint64_t offset,
                        std::uint64_t size,
                        std::uint64_t page_size = kDefaultPageSize);

struct Workload {
  std::vector<TraceRecord> records;
  std::uint64_t page_size = kDefaultPageSize;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  const TraceRecord& operator[](std::size_t i) const { return records[i]; }

  bool operator==(const Workload&) const = default;
};

struct WorkloadStats {
  double write_fraction = 0.0;
  double read_fraction = 0.0;
  double avg_request_size_pages = 0.0;
  double avg_access_count = 0.0;
  std::uint64_t unique_pages = 0;
  std::uint64_t working_set_pages = 0;
  std::uint64_t total_requests = 0;
};

/// Parses `timestamp,hostname,disknum,type,offset,size,responsetime`.
/// Hostname, disk number and response time are validated for presence only.
TraceRecord parse_msrc_line(std::string_view line,
                            std::uint64_t page_size = kDefaultPageSize);

/// Disk number of an MSRC line, for single-disk filtering.
int msrc_disk_number(std::string_view line);

std::string format_msrc_line(const TraceRecord& rec,
                             std::string_view hostname = "synth", int disk = 0);

/// Reads a whole trace. Blank lines are skipped; `disk` keeps only records of
/// that disk number. Errors carry the 1-based line number.
Workload read_msrc(std::istream& in, std::uint64_t page_size = kDefaultPageSize,
                   std::optional<int> disk = std::nullopt);
Workload load_msrc(const std::string& path,
                   std::uint64_t page_size = kDefaultPageSize,
                   std::optional<int> disk = std::nullopt);

void write_msrc(std::ostream& out, const Workload& w);
void save_msrc(const std::string& path, const Workload& w);

WorkloadStats workload_stats(const Workload& w);

enum class SynthKind { HotRandom, ColdSequential, Mixed };

SynthKind parse_synth_kind(std::string_view name);
std::string_view to_string(SynthKind kind);
std::string_view to_string(Op op);

/// Deterministic synthetic workloads.
///
/// HotRandom: 1-page requests over `pages` hot pages. The first min(n, pages)
/// requests visit every hot page once in shuffled order, the rest are
/// Zipf(1) draws, so the whole hot set is always touched.
///
/// ColdSequential: the page range [0, pages) is split into n consecutive
/// chunks (sizes differ by at most one) and swept in order; with pages >= n
/// every page is touched exactly once. With pages < n the sweep wraps.
///
/// Mixed: one tenth of the pages (at least one) form a hot region served by
/// HotRandom-style requests; the rest is swept sequentially in 32-page
/// requests. Requests alternate between the two streams at random.
Workload synth_trace(SynthKind kind, std::uint64_t n, std::uint64_t pages,
                     std::uint64_t seed,
                     std::uint64_t page_size = kDefaultPageSize);

}  // namespace sibyl
