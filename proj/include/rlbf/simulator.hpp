#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rlbf/policies.hpp"
#include "rlbf/workload.hpp"

namespace rlbf {

inline constexpr Seconds kBsldThreshold = 10.0;

/// max((wait + run) / max(run, threshold), 1)
double bounded_slowdown(Seconds wait, Seconds run, Seconds threshold = kBsldThreshold);

/// How the scheduler guesses job runtimes. Estimates drive decisions only;
/// the simulation always advances on actual runtimes.
struct RuntimeEstimator {
  enum class Mode { RequestTime, ActualRuntime, NoisyActual };

  Mode mode = Mode::RequestTime;
  double noise_fraction = 0;  // NoisyActual only

  static RuntimeEstimator request_time() { return {Mode::RequestTime, 0}; }
  static RuntimeEstimator actual_runtime() { return {Mode::ActualRuntime, 0}; }
  static RuntimeEstimator noisy_actual(double noise_fraction);

  Seconds estimate(const Job& job) const;
  std::string name() const;
};

struct RunningJob {
  std::size_t job = 0;  // index into the simulated job list
  Seconds start = 0;
  Seconds true_end = 0;
};

struct ClusterState {
  int total_nodes = 0;
  int free_nodes = 0;
  std::vector<RunningJob> running;
  Seconds clock = 0;
};

struct Reservation {
  Seconds time = 0;
  int extra_nodes = 0;  // free at `time` once the reserved job has started
};

/// Earliest time the running jobs, released in order of estimated end (ties
/// by job id), free `nodes` nodes on top of the currently free ones.
Reservation reserve(const ClusterState& state, std::span<const Job> jobs, int nodes,
                    const RuntimeEstimator& estimator);

Seconds reservation_time(const ClusterState& state, std::span<const Job> jobs, const Job& rjob,
                         const RuntimeEstimator& estimator);

/// What a backfilling strategy sees when the head of the queue (the rjob)
/// cannot start.
struct BackfillContext {
  Seconds clock = 0;
  std::size_t rjob = 0;
  Seconds reservation = 0;
  int extra_nodes = 0;
  int free_nodes = 0;
  int total_nodes = 0;
  std::span<const std::size_t> candidates;  // waiting jobs minus rjob, policy order
  std::span<const std::size_t> queue;       // every waiting job, policy order
  std::span<const Job> jobs;
  const ClusterState* cluster = nullptr;
  RuntimeEstimator estimator;
};

class Backfiller {
 public:
  virtual ~Backfiller() = default;
  /// Jobs to start now, in start order. Each must be a candidate that fits
  /// the free nodes left after the ones before it.
  virtual std::vector<std::size_t> select(const BackfillContext& ctx) = 0;
};

struct JobRecord {
  std::int64_t id = 0;
  Seconds submit = 0;
  Seconds start = 0;
  Seconds wait = 0;
  Seconds run = 0;
  int nodes = 0;
  double bsld = 1;
};

struct ScheduleResult {
  std::vector<JobRecord> jobs;  // trace order
  double avg_bsld = 0;
  double avg_wait = 0;
  std::size_t backfilled = 0;
  // Backfilled jobs that, judged on actual runtimes, push back the rjob.
  std::size_t violations = 0;
};

std::string to_csv(const ScheduleResult& result);
std::string to_json(const ScheduleResult& result);

/// Test and instrumentation hooks.
struct SimulationObserver {
  std::function<void(const ClusterState&, std::span<const Job>)> on_event;
  std::function<void(const BackfillContext&, std::span<const std::size_t>)> on_backfill;
  std::function<void(std::size_t job, Seconds start)> on_start;
};

/// Runs the trace to completion. Scheduling happens after every batch of
/// submissions/completions sharing a timestamp. `backfiller` may be null
/// (no backfilling).
ScheduleResult run_schedule(const Trace& trace, PolicyKind policy, Backfiller* backfiller,
                            const RuntimeEstimator& estimator,
                            const SimulationObserver* observer = nullptr);

}  // namespace rlbf
