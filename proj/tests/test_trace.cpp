#include <doctest.h>

#include <random>
#include <sstream>

#include "sibyl/errors.hpp"
#include "sibyl/trace.hpp"

using namespace sibyl;

TEST_CASE("parse_msrc_line maps fields and derives pages") {
  auto r = parse_msrc_line("128166372003061629,hm,1,Read,8192,4096,300");
  CHECK(r.timestamp == 128166372003061629ull);
  CHECK(r.op == Op::Read);
  CHECK(r.offset == 8192);
  CHECK(r.size == 4096);
  CHECK(r.page_id == 2);
  CHECK(r.size_pages == 1);

  auto w = parse_msrc_line("0,x,0,Write,0,4096,0");
  CHECK(w.op == Op::Write);
  CHECK(w.page_id == 0);
  CHECK(w.size_pages == 1);

  auto u = parse_msrc_line("0,x,0,Read,100,6000,0");
  CHECK(u.page_id == 0);
  CHECK(u.size_pages == 2);
}

TEST_CASE("op token is case-insensitive and whitespace is tolerated") {
  CHECK(parse_msrc_line("5,h,0,WRITE,0,1,0").op == Op::Write);
  CHECK(parse_msrc_line("5,h,0,read,0,1,0").op == Op::Read);
  CHECK(parse_msrc_line(" 5 , h , 0 , Read , 4096 , 512 , 0\r\n").page_id == 1);
}

TEST_CASE("parse_msrc_line errors") {
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Read,0,4096"), MalformedLine);
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Trim,0,4096,0"), MalformedLine);
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Read,abc,4096,0"), MalformedLine);
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Read,0,4k,0"), MalformedLine);
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Read,-4096,4096,0"), NegativeValue);
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Read,0,-1,0"), NegativeValue);
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Read,0,0,0"), MalformedLine);
  CHECK_THROWS_AS(parse_msrc_line("1,h,0,Read,0,10,0", 3000), InvalidParameter);
}

TEST_CASE("page size changes the derived fields") {
  auto r = parse_msrc_line("0,x,0,Read,16384,8192,0", 8192);
  CHECK(r.page_id == 2);
  CHECK(r.size_pages == 1);
}

TEST_CASE("format then parse round-trips retained fields") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint64_t> big(0, 1ull << 50);
  std::uniform_int_distribution<std::uint64_t> size(1, 1 << 20);
  for (int i = 0; i < 500; ++i) {
    auto r = make_record(big(rng), i % 3 ? Op::Read : Op::Write, big(rng), size(rng));
    auto back = parse_msrc_line(format_msrc_line(r));
    CHECK(back == r);
    CHECK(parse_msrc_line(format_msrc_line(back)) == r);
  }
}

TEST_CASE("read_msrc skips blanks, filters disks and reports line numbers") {
  std::istringstream in("1,h,0,Read,0,4096,0\n\n2,h,1,Write,4096,4096,0\n3,h,0,Write,8192,4096,0\n");
  auto all = read_msrc(in);
  CHECK(all.size() == 3);

  std::istringstream again("1,h,0,Read,0,4096,0\n\n2,h,1,Write,4096,4096,0\n3,h,0,Write,8192,4096,0\n");
  auto disk0 = read_msrc(again, kDefaultPageSize, 0);
  REQUIRE(disk0.size() == 2);
  CHECK(disk0[1].page_id == 2);

  std::istringstream bad("1,h,0,Read,0,4096,0\n2,h,0,Read,x,4096,0\n");
  try {
    read_msrc(bad);
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  std::istringstream backwards("5,h,0,Read,0,4096,0\n4,h,0,Read,0,4096,0\n");
  CHECK_THROWS_AS(read_msrc(backwards), MalformedLine);
}

TEST_CASE("write_msrc and read_msrc round-trip a workload") {
  auto w = synth_trace(SynthKind::Mixed, 300, 400, 5);
  std::stringstream io;
  write_msrc(io, w);
  CHECK(read_msrc(io) == w);
}

TEST_CASE("load_msrc on a missing file is a trace error") {
  CHECK_THROWS_AS(load_msrc("/nonexistent/trace.csv"), TraceError);
}

TEST_CASE("workload_stats hand counts") {
  Workload w;
  w.records = {make_record(0, Op::Write, 0, 4096), make_record(1, Op::Write, 0, 4096),
               make_record(2, Op::Read, 0, 4096), make_record(3, Op::Read, 0, 4096)};
  auto s = workload_stats(w);
  CHECK(s.write_fraction == 0.5);
  CHECK(s.unique_pages == 1);
  CHECK(s.avg_access_count == 4.0);

  Workload one;
  one.records = {make_record(0, Op::Read, 0, 4096)};
  auto t = workload_stats(one);
  CHECK(t.read_fraction == 1.0);
  CHECK(t.avg_request_size_pages == 1.0);
  CHECK(t.unique_pages == 1);
  CHECK(t.avg_access_count == 1.0);

  // Page 0..2 by one 3-page write, page 1 again by a read: 4 touches, 3 pages.
  Workload multi;
  multi.records = {make_record(0, Op::Write, 0, 3 * 4096), make_record(1, Op::Read, 4096, 10)};
  auto m = workload_stats(multi);
  CHECK(m.avg_request_size_pages == 2.0);
  CHECK(m.unique_pages == 3);
  CHECK(m.working_set_pages == 3);
  CHECK(m.avg_access_count == doctest::Approx(4.0 / 3.0));

  CHECK_THROWS_AS(workload_stats(Workload{}), EmptyWorkload);
}

TEST_CASE("synthetic workloads") {
  CHECK(workload_stats(synth_trace(SynthKind::ColdSequential, 10, 10, 1)).avg_access_count ==
        1.0);
  auto hot = synth_trace(SynthKind::HotRandom, 1000, 10, 7);
  auto hs = workload_stats(hot);
  CHECK(hs.unique_pages == 10);
  CHECK(hs.avg_access_count == 100.0);
  CHECK(hs.avg_request_size_pages == 1.0);

  CHECK(synth_trace(SynthKind::HotRandom, 500, 50, 3) == synth_trace(SynthKind::HotRandom, 500, 50, 3));
  CHECK(synth_trace(SynthKind::Mixed, 500, 500, 3) == synth_trace(SynthKind::Mixed, 500, 500, 3));
  CHECK_FALSE(synth_trace(SynthKind::HotRandom, 500, 50, 3) ==
              synth_trace(SynthKind::HotRandom, 500, 50, 4));

  auto cold = synth_trace(SynthKind::ColdSequential, 10, 640, 2);
  for (const auto& r : cold.records) CHECK(r.size_pages == 64);
  for (std::size_t i = 1; i < cold.size(); ++i)
    CHECK(cold[i].page_id == cold[i - 1].page_id + cold[i - 1].size_pages);

  CHECK_THROWS_AS(synth_trace(SynthKind::HotRandom, 0, 10, 1), InvalidParameter);
  CHECK_THROWS_AS(synth_trace(SynthKind::HotRandom, 10, 0, 1), InvalidParameter);
  CHECK(parse_synth_kind("cold_sequential") == SynthKind::ColdSequential);
  CHECK_THROWS_AS(parse_synth_kind("bursty"), InvalidParameter);
}

TEST_CASE("ColdSequential touches each page once for any n") {
  for (std::uint64_t n = 1; n <= 200; ++n)
    CHECK(workload_stats(synth_trace(SynthKind::ColdSequential, n, n, n)).avg_access_count ==
          1.0);
}

TEST_CASE("read and write fractions sum to one") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (auto kind : {SynthKind::HotRandom, SynthKind::ColdSequential, SynthKind::Mixed}) {
      auto s = workload_stats(synth_trace(kind, 1 + seed * 13, 5 + seed * 7, seed));
      CHECK(s.write_fraction + s.read_fraction == 1.0);
    }
  }
}

TEST_CASE("Mixed trace has a hot region and 32-page sequential sweeps") {
  auto w = synth_trace(SynthKind::Mixed, 2000, 1000, 9);
  std::uint64_t hot = 0, cold = 0;
  for (const auto& r : w.records) {
    if (r.page_id < 100) {
      ++hot;
      CHECK(r.size_pages == 1);
    } else {
      ++cold;
      CHECK(r.size_pages <= 32);
    }
  }
  CHECK(hot > 800);
  CHECK(cold > 800);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i].timestamp > w[i - 1].timestamp);
}
