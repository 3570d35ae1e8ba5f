#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rlbf/error.hpp"
#include "rlbf/workload.hpp"
#include "test_util.hpp"

using namespace rlbf;

namespace {

const char* kSample =
    "; Version: 2.2\n"
    "; MaxProcs: 128\n"
    ";\n"
    "1 0 -1 3600 4 -1 -1 8 7200 -1 1 3 1 -1 1 -1 -1 -1\n"
    "2 1055 5 100 16 -1 -1 -1 -1 -1 1 3 1 -1 1 -1 -1 -1\n"
    "3 2110 0 900 2 -1 -1 2 600 -1 1 3 1 -1 1 -1 -1 -1\n"
    "4 2200 0 -1 2 -1 -1 2 600 -1 0 3 1 -1 1 -1 -1 -1\n";

}  // namespace

TEST_CASE("SWF fields map onto job attributes") {
  const auto trace = parse_swf(std::string_view(kSample));
  CHECK(trace.cluster_size == 128);
  REQUIRE(trace.jobs.size() == 3);

  const auto& first = trace.jobs[0];
  CHECK(first.id == 1);
  CHECK(first.submit_time == 0);
  CHECK(first.actual_runtime == 3600);
  CHECK(first.requested_nodes == 8);
  CHECK(first.requested_time == 7200);
  CHECK(trace.has_request_time);

  // requested procs missing -> allocated; requested time missing -> runtime
  CHECK(trace.jobs[1].requested_nodes == 16);
  CHECK(trace.jobs[1].requested_time == 100);
  // runtime above the request is clamped to it
  CHECK(trace.jobs[2].actual_runtime == 600);
}

TEST_CASE("cluster size falls back to override, then largest job") {
  const std::string body = "1 0 -1 10 4 -1 -1 6 20\n2 5 -1 10 3 -1 -1 -1 20\n";
  CHECK(parse_swf(std::string_view(body)).cluster_size == 6);
  CHECK(parse_swf(std::string_view(body), 64).cluster_size == 64);
  CHECK(parse_swf(std::string_view("; MaxProcs: 32\n" + body), 64).cluster_size == 32);
}

TEST_CASE("jobs come out in submit order") {
  const auto trace = parse_swf(std::string_view("1 50 -1 10 1 -1 -1 1 20\n2 5 -1 10 1 -1 -1 1 20\n"));
  CHECK(trace.jobs[0].id == 2);
  CHECK(trace.jobs[1].id == 1);
}

TEST_CASE("malformed numbers report the line") {
  try {
    parse_swf(std::string_view("; header\n1 0 -1 10 1 -1 -1 1 20\n2 x -1 10 1 -1 -1 1 20\n"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.code() == "parse_error");
  }
  CHECK_THROWS_AS(parse_swf(std::string_view("1 0 -1 10\n")), ParseError);
}

TEST_CASE("a trace without usable jobs is an error") {
  try {
    parse_swf(std::string_view("; only comments\n1 0 -1 -1 4 -1 -1 4 10\n"));
    FAIL("expected empty_trace");
  } catch (const Error& e) {
    CHECK(e.code() == "empty_trace");
  }
}

TEST_CASE("mean inter-arrival over consecutive submissions") {
  const auto trace = parse_swf(std::string_view(kSample));
  const auto stats = compute_stats(trace);
  CHECK(stats.mean_interarrival == doctest::Approx(1055.0));
  CHECK(stats.size == 128);
  CHECK(stats.mean_requested_nodes == doctest::Approx((8.0 + 16 + 2) / 3));
  CHECK(stats.mean_requested_time == doctest::Approx((7200.0 + 100 + 600) / 3));
  CHECK(stats_to_json(stats).find("\"i_t\"") != std::string::npos);
}

TEST_CASE("stats match a one-pass oracle on random traces") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 200; ++round) {
    const auto trace = testing::random_trace(rng, 80, 32);
    double diff_sum = 0, r_sum = 0, n_sum = 0;
    for (std::size_t i = 0; i < trace.jobs.size(); ++i) {
      r_sum += trace.jobs[i].requested_time;
      n_sum += trace.jobs[i].requested_nodes;
      if (i > 0) diff_sum += trace.jobs[i].submit_time - trace.jobs[i - 1].submit_time;
    }
    const double n = static_cast<double>(trace.jobs.size());
    const auto stats = compute_stats(trace);
    CHECK(stats.mean_interarrival == (n > 1 ? diff_sum / (n - 1) : 0.0));
    CHECK(stats.mean_requested_time == r_sum / n);
    CHECK(stats.mean_requested_nodes == n_sum / n);
  }
}

TEST_CASE("write then parse reproduces every job") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 100; ++round) {
    auto trace = testing::random_trace(rng, 50, 64);
    // fractional times survive too
    trace.jobs.front().requested_time += 0.25;
    const auto back = parse_swf(std::string_view(to_swf(trace)));
    CHECK(back.cluster_size == trace.cluster_size);
    REQUIRE(back.jobs.size() == trace.jobs.size());
    for (std::size_t i = 0; i < trace.jobs.size(); ++i) CHECK(back.jobs[i] == trace.jobs[i]);
  }
}

TEST_CASE("sampled windows") {
  std::mt19937_64 rng(3);
  SyntheticSpec spec;
  spec.job_count = 10000;
  const auto trace = generate_synthetic(spec, 1);

  SUBCASE("deterministic in the seed") {
    CHECK(to_swf(sample_sequence(trace, 256, 7)) == to_swf(sample_sequence(trace, 256, 7)));
  }
  SUBCASE("full window is the whole trace shifted to zero") {
    auto small = head(trace, 300);
    small.jobs.front().submit_time = 50;
    for (auto& j : small.jobs) j.submit_time += 50;
    const auto full = sample_sequence(small, small.jobs.size(), 99);
    REQUIRE(full.jobs.size() == small.jobs.size());
    CHECK(full.jobs.front().submit_time == 0);
    for (std::size_t i = 0; i < full.jobs.size(); ++i) {
      CHECK(full.jobs[i].id == small.jobs[i].id);
      CHECK(full.jobs[i].submit_time == small.jobs[i].submit_time - small.jobs[0].submit_time);
    }
  }
  SUBCASE("always a contiguous run of the source") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto len = std::uniform_int_distribution<std::size_t>(1, 2000)(rng);
      const auto window = sample_sequence(trace, len, seed);
      const auto start = static_cast<std::size_t>(window.jobs.front().id - 1);
      const double origin = trace.jobs[start].submit_time;
      for (std::size_t i = 0; i < len; ++i) {
        CHECK(window.jobs[i].id == trace.jobs[start + i].id);
        CHECK(window.jobs[i].submit_time == trace.jobs[start + i].submit_time - origin);
      }
    }
  }
  SUBCASE("ten evaluation windows of 1024 jobs") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto w = sample_sequence(trace, 1024, seed);
      CHECK(w.jobs.size() == 1024);
      CHECK(w.jobs.front().submit_time == 0);
    }
  }
  SUBCASE("window longer than the trace") {
    CHECK_THROWS_AS(sample_sequence(trace, 10001, 0), Error);
  }
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  SUBCASE("zero jobs") {
    spec.job_count = 0;
    try {
      generate_synthetic(spec, 0);
      FAIL("expected empty_trace");
    } catch (const Error& e) {
      CHECK(e.code() == "empty_trace");
    }
  }
  SUBCASE("submit times never decrease") {
    spec.job_count = 256;
    const auto t = generate_synthetic(spec, 42);
    for (std::size_t i = 1; i < t.jobs.size(); ++i) {
      CHECK(t.jobs[i].submit_time >= t.jobs[i - 1].submit_time);
    }
    CHECK_FALSE(t.has_request_time);
    for (const auto& j : t.jobs) {
      CHECK(j.requested_time == j.actual_runtime);
      CHECK(j.requested_nodes >= 1);
      CHECK((j.requested_nodes & (j.requested_nodes - 1)) == 0);
      CHECK(j.requested_nodes <= (1 << spec.max_node_power));
    }
  }
  SUBCASE("mean inter-arrival follows the parameter") {
    spec.job_count = 10000;
    spec.cluster_size = 256;
    spec.mean_interarrival = 771;
    const auto stats = compute_stats(generate_synthetic(spec, 2024));
    CHECK(std::abs(stats.mean_interarrival - 771) < 0.1 * 771);
  }
  SUBCASE("deterministic in the seed") {
    spec.job_count = 500;
    CHECK(to_swf(generate_synthetic(spec, 9)) == to_swf(generate_synthetic(spec, 9)));
    CHECK(to_swf(generate_synthetic(spec, 9)) != to_swf(generate_synthetic(spec, 10)));
  }
  SUBCASE("invalid parameters") {
    spec.mean_interarrival = 0;
    CHECK_THROWS_AS(generate_synthetic(spec, 0), Error);
    spec.mean_interarrival = 10;
    spec.max_node_power = 9;  // 512 > 256
    CHECK_THROWS_AS(generate_synthetic(spec, 0), Error);
  }
}
