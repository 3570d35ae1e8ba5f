#include "rlbf/observation.hpp"

#include <algorithm>
#include <cmath>

namespace rlbf {

std::size_t Observation::selectable_jobs() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(max_jobs), 1));
}

Observation build_observation(const ObservationInput& in, std::size_t max_jobs) {
  Observation obs;
  obs.max_jobs = max_jobs;
  obs.features.assign(max_jobs * kJobFeatures, 0.0);
  obs.mask.assign(max_jobs + 1, 0);
  obs.mask[max_jobs] = 1;

  std::vector<std::size_t> order(in.queue.begin(), in.queue.end());
  const auto fcfs = [&](std::size_t a, std::size_t b) {
    const auto& ja = in.jobs[a];
    const auto& jb = in.jobs[b];
    if (ja.submit_time != jb.submit_time) return ja.submit_time < jb.submit_time;
    return ja.id < jb.id;
  };
  if (order.size() > max_jobs) {
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(max_jobs),
                      order.end(), fcfs);
    order.resize(max_jobs);
  } else {
    std::sort(order.begin(), order.end(), fcfs);
  }

  const double total = std::max(1, in.total_nodes);
  const double availability = in.free_nodes / total;
  obs.used_rows = order.size();
  obs.slot_job = order;
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    const auto& job = in.jobs[order[slot]];
    const bool is_rjob = order[slot] == in.rjob;
    const bool fits = job.requested_nodes <= in.free_nodes;
    const bool safe = fits && (in.clock + in.estimator.estimate(job) <= in.reservation ||
                               job.requested_nodes <= in.extra_nodes);

    double* row = obs.features.data() + slot * kJobFeatures;
    row[kWaitFeature] = std::min(std::max(0.0, in.clock - job.submit_time) / 3600.0, 1.0);
    row[kRequestFeature] = std::clamp(std::log10(std::max(1.0, job.requested_time)) / 6.0, 0.0, 1.0);
    row[kNodesFeature] = job.requested_nodes / total;
    row[kSafeFitFeature] = safe && !is_rjob ? 1.0 : 0.0;
    row[kAvailabilityFeature] = availability;
    row[kRjobFeature] = is_rjob ? 1.0 : 0.0;

    obs.mask[slot] = (!is_rjob && fits) ? 1 : 0;
  }
  return obs;
}

}  // namespace rlbf
