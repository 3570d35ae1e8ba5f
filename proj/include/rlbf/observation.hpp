#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rlbf/simulator.hpp"

namespace rlbf {

inline constexpr std::size_t kJobFeatures = 6;
inline constexpr std::size_t kDefaultMaxObservedJobs = 128;

// Column layout of one job row.
enum Feature : std::size_t {
  kWaitFeature = 0,       // min(w_t / 3600, 1)
  kRequestFeature = 1,    // log10(r_t) / 6, clamped to [0, 1]
  kNodesFeature = 2,      // n_t / cluster size
  kSafeFitFeature = 3,    // 1 if starting now cannot delay the rjob under the estimate
  kAvailabilityFeature = 4,  // free nodes / cluster size
  kRjobFeature = 5,       // 1 on the rjob row
};

/// Fixed-size view of the waiting queue: `max_jobs` rows of kJobFeatures
/// columns plus a mask over max_jobs + 1 actions. The last action is "stop".
struct Observation {
  std::size_t max_jobs = kDefaultMaxObservedJobs;
  std::size_t used_rows = 0;      // rows past this are zero padding
  std::vector<double> features;   // max_jobs * kJobFeatures, row-major
  std::vector<std::uint8_t> mask; // max_jobs + 1, 1 = selectable
  std::vector<std::size_t> slot_job;  // job index per used row

  std::size_t stop_action() const { return max_jobs; }
  std::size_t selectable_jobs() const;
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * kJobFeatures, kJobFeatures);
  }
};

struct ObservationInput {
  std::span<const std::size_t> queue;  // waiting jobs, any order, rjob included
  std::size_t rjob = 0;
  std::span<const Job> jobs;
  Seconds clock = 0;
  int free_nodes = 0;
  int total_nodes = 1;
  Seconds reservation = 0;
  int extra_nodes = 0;
  RuntimeEstimator estimator;
};

/// Encodes the earliest-submitted `max_jobs` waiting jobs. Padding rows, the
/// rjob, and jobs that do not fit the free nodes are masked off.
Observation build_observation(const ObservationInput& in,
                              std::size_t max_jobs = kDefaultMaxObservedJobs);

}  // namespace rlbf
