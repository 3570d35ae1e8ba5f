#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "rlbf/error.hpp"
#include "rlbf/policies.hpp"

using namespace rlbf;

namespace {

Job make_job(std::int64_t id, double submit, double request, int nodes) {
  Job j;
  j.id = id;
  j.submit_time = submit;
  j.requested_time = request;
  j.actual_runtime = request;
  j.requested_nodes = nodes;
  return j;
}

std::vector<std::size_t> sorted(PolicyKind kind, const std::vector<Job>& jobs, double clock) {
  std::vector<std::size_t> q(jobs.size());
  std::iota(q.begin(), q.end(), std::size_t{0});
  sort_queue(kind, jobs, q, clock);
  return q;
}

}  // namespace

TEST_CASE("FCFS orders by submit time") {
  const std::vector<Job> jobs = {make_job(1, 5, 10, 1), make_job(2, 3, 10, 1), make_job(3, 9, 10, 1)};
  CHECK(sorted(PolicyKind::Fcfs, jobs, 20) == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("WFP3 and F1 formulas") {
  // -(w/r)^3 * n with w = 100, r = 50, n = 4
  CHECK(score(PolicyKind::Wfp3, make_job(1, 0, 50, 4), 100) == -32.0);
  // log10(100)*10 + 870*log10(1000)
  CHECK(score(PolicyKind::F1, make_job(1, 1000, 100, 10), 0) == doctest::Approx(2630.0).epsilon(1e-12));
  CHECK(score(PolicyKind::Sjf, make_job(1, 0, 77, 3), 5) == 77.0);
  CHECK(score(PolicyKind::Fcfs, make_job(1, 12, 77, 3), 50) == 12.0);
}

TEST_CASE("F1 treats submit time 0 as 1") {
  const auto at_zero = score(PolicyKind::F1, make_job(1, 0, 100, 10), 0);
  const auto at_one = score(PolicyKind::F1, make_job(1, 1, 100, 10), 0);
  CHECK(at_zero == at_one);
  CHECK(std::isfinite(at_zero));
}

TEST_CASE("policy names") {
  for (auto k : {PolicyKind::Fcfs, PolicyKind::Sjf, PolicyKind::Wfp3, PolicyKind::F1}) {
    CHECK(parse_policy(policy_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_policy("unicep"), Error);
}

TEST_CASE("ordering properties on random queues") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> submit(0, 50);
  std::uniform_int_distribution<int> request(1, 30);
  std::uniform_int_distribution<int> nodes(1, 8);

  for (int round = 0; round < 300; ++round) {
    std::vector<Job> jobs;
    const int n = std::uniform_int_distribution<int>(1, 25)(rng);
    for (int i = 0; i < n; ++i) jobs.push_back(make_job(i, submit(rng), request(rng), nodes(rng)));
    const double clock = 60;

    SUBCASE("permuting the input never changes the order") {
      for (auto kind : {PolicyKind::Fcfs, PolicyKind::Sjf, PolicyKind::Wfp3, PolicyKind::F1}) {
        const auto reference = sorted(kind, jobs, clock);
        std::vector<std::size_t> q(jobs.size());
        std::iota(q.begin(), q.end(), std::size_t{0});
        std::shuffle(q.begin(), q.end(), rng);
        sort_queue(kind, jobs, q, clock);
        CHECK(q == reference);
      }
    }
    SUBCASE("FCFS survives positive affine rescaling of submit times") {
      auto scaled = jobs;
      for (auto& j : scaled) j.submit_time = 3.5 * j.submit_time + 1000;
      CHECK(sorted(PolicyKind::Fcfs, jobs, clock) == sorted(PolicyKind::Fcfs, scaled, 1e6));
    }
    SUBCASE("SJF puts strictly shorter requests strictly earlier") {
      const auto q = sorted(PolicyKind::Sjf, jobs, clock);
      for (std::size_t a = 0; a < q.size(); ++a) {
        for (std::size_t b = a + 1; b < q.size(); ++b) {
          CHECK_FALSE(jobs[q[b]].requested_time < jobs[q[a]].requested_time);
        }
      }
    }
  }
}

TEST_CASE("WFP3 priority grows with waiting time") {
  const auto job = make_job(1, 0, 40, 3);
  double previous = score(PolicyKind::Wfp3, job, 1);
  for (double clock = 2; clock < 500; clock += 7) {
    const double s = score(PolicyKind::Wfp3, job, clock);
    CHECK(s < previous);
    previous = s;
  }
}
