#pragma once

#include <random>

#include "rlbf/workload.hpp"

namespace rlbf::testing {

/// Small random trace: integer times, request time >= runtime.
inline Trace random_trace(std::mt19937_64& rng, std::size_t max_jobs, int max_nodes) {
  std::uniform_int_distribution<std::size_t> count(1, max_jobs);
  std::uniform_int_distribution<int> nodes_dist(1, max_nodes);
  std::uniform_int_distribution<int> gap(0, 40);
  std::uniform_int_distribution<int> run(1, 200);
  std::uniform_int_distribution<int> slack(0, 150);

  Trace t;
  t.cluster_size = std::uniform_int_distribution<int>(1, max_nodes)(rng);
  const auto n = count(rng);
  double clock = 0;
  for (std::size_t i = 0; i < n; ++i) {
    clock += gap(rng);
    Job j;
    j.id = static_cast<std::int64_t>(i + 1);
    j.submit_time = clock;
    j.requested_nodes = std::uniform_int_distribution<int>(1, t.cluster_size)(rng);
    j.actual_runtime = run(rng);
    j.requested_time = j.actual_runtime + slack(rng);
    t.jobs.push_back(j);
  }
  return t;
}

}  // namespace rlbf::testing
