#include "sibyl/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "sibyl/errors.hpp"

namespace sibyl {

namespace {

void check_page_size(std::uint64_t page_size) {
  if (page_size == 0 || (page_size & (page_size - 1)) != 0)
    throw InvalidParameter("page size must be a power of two, got " +
                           std::to_string(page_size));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

// Parses a non-negative integer field. A leading '-' on an otherwise valid
// number is reported as NegativeValue, anything else non-numeric as
// MalformedLine.
std::uint64_t parse_unsigned(std::string_view field, const char* what) {
  if (field.empty()) throw MalformedLine(std::string("empty ") + what + " field");
  if (field.front() == '-') {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec == std::errc() && p == field.data() + field.size())
      throw NegativeValue(std::string("negative ") + what + ": " + std::string(field));
    throw MalformedLine(std::string("non-numeric ") + what + ": " + std::string(field));
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || p != field.data() + field.size())
    throw MalformedLine(std::string("non-numeric ") + what + ": " + std::string(field));
  return v;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

TraceRecord make_record(std::uint64_t timestamp, Op op, std::uint64_t offset,
                        std::uint64_t size, std::uint64_t page_size) {
  check_page_size(page_size);
  if (size == 0) throw MalformedLine("request size must be positive");
  TraceRecord r;
  r.timestamp = timestamp;
  r.op = op;
  r.offset = offset;
  r.size = size;
  r.page_id = offset / page_size;
  r.size_pages = (size + page_size - 1) / page_size;
  return r;
}

TraceRecord parse_msrc_line(std::string_view line, std::uint64_t page_size) {
  auto fields = split_fields(trim(line));
  if (fields.size() < 7)
    throw MalformedLine("expected at least 7 fields, got " +
                        std::to_string(fields.size()));

  auto ts = parse_unsigned(fields[0], "timestamp");
  Op op;
  if (iequals(fields[3], "read"))
    op = Op::Read;
  else if (iequals(fields[3], "write"))
    op = Op::Write;
  else
    throw MalformedLine("unknown op token: " + std::string(fields[3]));
  auto offset = parse_unsigned(fields[4], "offset");
  auto size = parse_unsigned(fields[5], "size");
  return make_record(ts, op, offset, size, page_size);
}

int msrc_disk_number(std::string_view line) {
  auto fields = split_fields(trim(line));
  if (fields.size() < 7)
    throw MalformedLine("expected at least 7 fields, got " +
                        std::to_string(fields.size()));
  return static_cast<int>(parse_unsigned(fields[2], "disk number"));
}

std::string_view to_string(Op op) { return op == Op::Read ? "Read" : "Write"; }

std::string format_msrc_line(const TraceRecord& rec, std::string_view hostname,
                             int disk) {
  std::ostringstream os;
  os << rec.timestamp << ',' << hostname << ',' << disk << ',' << to_string(rec.op)
     << ',' << rec.offset << ',' << rec.size << ",0";
  return os.str();
}

Workload read_msrc(std::istream& in, std::uint64_t page_size, std::optional<int> disk) {
  check_page_size(page_size);
  Workload w;
  w.page_size = page_size;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      if (disk && msrc_disk_number(line) != *disk) continue;
      auto rec = parse_msrc_line(line, page_size);
      if (!w.records.empty() && rec.timestamp < w.records.back().timestamp)
        throw MalformedLine("timestamp decreases");
      w.records.push_back(rec);
    } catch (const MalformedLine& e) {
      throw MalformedLine("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const NegativeValue& e) {
      throw NegativeValue("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return w;
}

Workload load_msrc(const std::string& path, std::uint64_t page_size,
                   std::optional<int> disk) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace: " + path);
  return read_msrc(in, page_size, disk);
}

void write_msrc(std::ostream& out, const Workload& w) {
  for (const auto& r : w.records) out << format_msrc_line(r) << '\n';
}

void save_msrc(const std::string& path, const Workload& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write trace: " + path);
  write_msrc(out, w);
}

WorkloadStats workload_stats(const Workload& w) {
  if (w.empty()) throw EmptyWorkload("workload has no records");
  std::unordered_map<std::uint64_t, std::uint64_t> touches;
  std::uint64_t writes = 0;
  std::uint64_t page_touches = 0;
  for (const auto& r : w.records) {
    if (r.op == Op::Write) ++writes;
    for (std::uint64_t p = 0; p < r.size_pages; ++p) ++touches[r.page_id + p];
    page_touches += r.size_pages;
  }
  WorkloadStats s;
  s.total_requests = w.size();
  s.write_fraction = static_cast<double>(writes) / static_cast<double>(w.size());
  s.read_fraction = 1.0 - s.write_fraction;
  s.avg_request_size_pages =
      static_cast<double>(page_touches) / static_cast<double>(w.size());
  s.unique_pages = touches.size();
  s.working_set_pages = s.unique_pages;
  s.avg_access_count =
      static_cast<double>(page_touches) / static_cast<double>(s.unique_pages);
  return s;
}

SynthKind parse_synth_kind(std::string_view name) {
  if (iequals(name, "HotRandom") || iequals(name, "hot_random") || iequals(name, "hot"))
    return SynthKind::HotRandom;
  if (iequals(name, "ColdSequential") || iequals(name, "cold_sequential") ||
      iequals(name, "cold"))
    return SynthKind::ColdSequential;
  if (iequals(name, "Mixed")) return SynthKind::Mixed;
  throw InvalidParameter("unknown synthetic workload kind: " + std::string(name));
}

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::HotRandom: return "HotRandom";
    case SynthKind::ColdSequential: return "ColdSequential";
    case SynthKind::Mixed: return "Mixed";
  }
  return "?";
}

namespace {

constexpr std::uint64_t kTickNs = 1000;
constexpr std::uint64_t kSequentialChunkPages = 32;

// Zipf(1) sampler over a permuted hot set, plus the initial shuffled sweep
// that guarantees every hot page is touched.
class HotStream {
 public:
  HotStream(std::uint64_t base, std::uint64_t pages, std::mt19937_64& rng)
      : base_(base), order_(pages) {
    std::iota(order_.begin(), order_.end(), std::uint64_t{0});
    std::shuffle(order_.begin(), order_.end(), rng);
    std::vector<double> weights(pages);
    for (std::uint64_t k = 0; k < pages; ++k) weights[k] = 1.0 / static_cast<double>(k + 1);
    zipf_ = std::discrete_distribution<std::uint64_t>(weights.begin(), weights.end());
  }

  std::uint64_t next(std::mt19937_64& rng) {
    if (warmup_ < order_.size()) return base_ + order_[warmup_++];
    return base_ + order_[zipf_(rng)];
  }

 private:
  std::uint64_t base_;
  std::vector<std::uint64_t> order_;
  std::size_t warmup_ = 0;
  std::discrete_distribution<std::uint64_t> zipf_;
};

Op random_op(std::mt19937_64& rng, double write_prob) {
  return std::bernoulli_distribution(write_prob)(rng) ? Op::Write : Op::Read;
}

}  // namespace

Workload synth_trace(SynthKind kind, std::uint64_t n, std::uint64_t pages,
                     std::uint64_t seed, std::uint64_t page_size) {
  if (n < 1) throw InvalidParameter("synthetic trace needs n >= 1");
  if (pages < 1) throw InvalidParameter("synthetic trace needs pages >= 1");
  check_page_size(page_size);

  std::mt19937_64 rng(seed);
  Workload w;
  w.page_size = page_size;
  w.records.reserve(n);
  auto emit = [&](Op op, std::uint64_t first_page, std::uint64_t len) {
    w.records.push_back(make_record(w.records.size() * kTickNs, op, first_page * page_size,
                                    len * page_size, page_size));
  };

  switch (kind) {
    case SynthKind::HotRandom: {
      HotStream hot(0, pages, rng);
      for (std::uint64_t i = 0; i < n; ++i) {
        auto page = hot.next(rng);
        emit(random_op(rng, 0.5), page, 1);
      }
      break;
    }
    case SynthKind::ColdSequential: {
      // Chunk i covers [i*pages/n, (i+1)*pages/n) when pages >= n.
      std::uint64_t chunks = std::min(n, pages);
      for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t c = i % chunks;
        std::uint64_t lo = c * pages / chunks;
        std::uint64_t hi = (c + 1) * pages / chunks;
        emit(random_op(rng, 0.5), lo, hi - lo);
      }
      break;
    }
    case SynthKind::Mixed: {
      std::uint64_t hot_pages = std::max<std::uint64_t>(1, pages / 10);
      std::uint64_t cold_pages = pages > hot_pages ? pages - hot_pages : 0;
      HotStream hot(0, hot_pages, rng);
      std::uint64_t cursor = 0;
      for (std::uint64_t i = 0; i < n; ++i) {
        bool take_hot = cold_pages == 0 || std::bernoulli_distribution(0.5)(rng);
        if (take_hot) {
          emit(random_op(rng, 0.5), hot.next(rng), 1);
        } else {
          std::uint64_t len = std::min(kSequentialChunkPages, cold_pages - cursor);
          emit(random_op(rng, 0.5), hot_pages + cursor, len);
          cursor += len;
          if (cursor >= cold_pages) cursor = 0;
        }
      }
      break;
    }
  }
  return w;
}

}  // namespace sibyl
