#include <cstdint>
#include <string>
#include <vector>

#include "boundedq/bench.hpp"
#include "doctest.h"

using namespace boundedq;

namespace {

BenchConfig small_config(const std::string& impl) {
  BenchConfig c;
  c.impl = impl;
  c.capacity = 8;
  c.threads = 1;
  c.ops = 1000;
  c.warmup = 100;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("every operation is a success or a full/empty failure") {
  for (const auto& impl : queue_names()) {
    CAPTURE(impl);
    BenchResult r = run_bench(small_config(impl));
    CHECK(r.total_ops == 1000);
    CHECK(r.successes + r.full_failures + r.empty_failures == r.total_ops);
    CHECK(r.ops_per_sec > 0);
  }
}

TEST_CASE("multi-threaded runs keep the accounting identity") {
  BenchConfig c = small_config("optimal");
  c.threads = 4;
  c.ops = 2000;
  BenchResult r = run_bench(c);
  CHECK(r.total_ops == 4 * 2000);
  CHECK(r.successes + r.full_failures + r.empty_failures == r.total_ops);
}

TEST_CASE("invalid configurations are refused with an explanation") {
  BenchConfig c = small_config("distinct");
  c.workload = "duplicate";
  CHECK_THROWS_AS(run_bench(c), std::invalid_argument);
  CHECK_THROWS_WITH_AS(run_bench(c),
                       doctest::Contains("distinct"), std::invalid_argument);

  BenchConfig bad = small_config("llsc");
  bad.ratio = 1.5;
  CHECK_THROWS_AS(run_bench(bad), std::invalid_argument);
  bad = small_config("nope");
  CHECK_THROWS_AS(run_bench(bad), std::invalid_argument);
  bad = small_config("llsc");
  bad.ops = 0;
  bad.duration_s = 0;
  CHECK_THROWS_AS(run_bench(bad), std::invalid_argument);
}

TEST_CASE("fixed seed and one thread reproduce the operation outcomes") {
  BenchConfig c = small_config("dcss");
  BenchResult a = run_bench(c);
  BenchResult b = run_bench(c);
  CHECK(a.successes == b.successes);
  CHECK(a.full_failures == b.full_failures);
  CHECK(a.empty_failures == b.empty_failures);
}

TEST_CASE("csv output round-trips") {
  std::vector<BenchResult> rs;
  rs.push_back(run_bench(small_config("segment")));
  rs.push_back(run_bench(small_config("llsc")));
  std::string csv = to_csv(rs);
  std::vector<BenchResult> back = from_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == rs[0]);
  CHECK(back[1] == rs[1]);
}

TEST_CASE("json output round-trips") {
  BenchResult r = run_bench(small_config("optimal"));
  nlohmann::json j = nlohmann::json::parse(to_json(r).dump());
  CHECK(from_json(j) == r);
}

TEST_CASE("instrumented-mode run keeps the identity and is deterministic") {
  BenchConfig c = small_config("optimal");
  c.threads = 2;
  c.ops = 50;
  c.warmup = 0;
  BenchResult a = run_bench_instrumented(c);
  CHECK(a.total_ops == 100);
  CHECK(a.successes + a.full_failures + a.empty_failures == a.total_ops);
  BenchResult b = run_bench_instrumented(c);
  CHECK(a.successes == b.successes);
  CHECK(a.full_failures == b.full_failures);
  CHECK(a.empty_failures == b.empty_failures);

  c.ops = 0;
  c.duration_s = 1.0;
  CHECK_THROWS_AS(run_bench_instrumented(c), std::invalid_argument);
}

TEST_CASE("overhead grid matches first-principles counts") {
  OverheadGrid g = report_overhead({16, 256, 4096}, {2, 4, 8, 16});
  auto find = [&](const std::string& impl, std::uint64_t c, int n) {
    for (const auto& row : g.rows)
      if (row.impl == impl && row.capacity == c && row.nprocs == n)
        return row.rep;
    FAIL("missing grid row");
    return OverheadReport{};
  };
  auto slope = [&](const std::string& impl) {
    for (const auto& s : g.slopes)
      if (s.impl == impl) return s;
    FAIL("missing slope row");
    return OverheadGrid::Slope{};
  };

  // The sequential oracle: exactly the two counters, at every size.
  for (std::uint64_t c : {16u, 256u, 4096u})
    CHECK(find("seq", c, 2).metadata_locations == 2);

  // Optimal queue: everything but the value cells is independent of C...
  for (int n : {2, 4, 8, 16}) {
    OverheadReport a = find("optimal", 16, n);
    for (std::uint64_t c : {256u, 4096u}) {
      OverheadReport b = find("optimal", c, n);
      CHECK(a.metadata_locations == b.metadata_locations);
      CHECK(a.descriptor_pool_size == b.descriptor_pool_size);
      CHECK(a.emulation_locations == b.emulation_locations);
      CHECK(b.value_locations == c);  // the cells themselves scale with C
    }
  }
  CHECK(slope("optimal").vs_capacity == 0.0);
  // ...and affine in n: counters + activeOp + n slots + 2n descriptors
  // of six words each.
  for (int n : {2, 4, 8, 16}) {
    CHECK(find("optimal", 16, n).metadata_locations ==
          3 + static_cast<std::uint64_t>(n) + 2 * n * 6);
    CHECK(find("optimal", 16, n).descriptor_pool_size ==
          2 * static_cast<std::uint64_t>(n));
  }
  std::uint64_t m2 = find("optimal", 16, 2).metadata_locations;
  std::uint64_t m4 = find("optimal", 16, 4).metadata_locations;
  std::uint64_t m8 = find("optimal", 16, 8).metadata_locations;
  std::uint64_t m16 = find("optimal", 16, 16).metadata_locations;
  CHECK(m8 - m4 == 2 * (m4 - m2));
  CHECK(m16 - m8 == 2 * (m8 - m4));

  // O(1)-metadata queues are flat in both directions.
  for (const char* impl : {"distinct", "llsc"}) {
    CAPTURE(impl);
    CHECK(slope(impl).vs_capacity == 0.0);
    CHECK(slope(impl).vs_procs == 0.0);
    CHECK(find(impl, 4096, 16).metadata_locations == 2);
  }
}
