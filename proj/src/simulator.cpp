#include "rlbf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rlbf/error.hpp"

namespace rlbf {

double bounded_slowdown(Seconds wait, Seconds run, Seconds threshold) {
  return std::max((wait + run) / std::max(run, threshold), 1.0);
}

RuntimeEstimator RuntimeEstimator::noisy_actual(double noise_fraction) {
  if (!(noise_fraction >= 0)) {
    throw Error("config_error", "noise fraction must be >= 0");
  }
  return {Mode::NoisyActual, noise_fraction};
}

Seconds RuntimeEstimator::estimate(const Job& job) const {
  switch (mode) {
    case Mode::RequestTime: return std::max(1.0, job.requested_time);
    case Mode::ActualRuntime: return std::max(1.0, job.actual_runtime);
    case Mode::NoisyActual: return std::max(1.0, job.actual_runtime * (1.0 + noise_fraction));
  }
  return job.requested_time;
}

std::string RuntimeEstimator::name() const {
  switch (mode) {
    case Mode::RequestTime: return "req";
    case Mode::ActualRuntime: return "ar";
    case Mode::NoisyActual: {
      std::ostringstream s;
      s << "noisy:" << noise_fraction * 100.0;
      return s.str();
    }
  }
  return "?";
}

Reservation reserve(const ClusterState& state, std::span<const Job> jobs, int nodes,
                    const RuntimeEstimator& estimator) {
  if (nodes > state.total_nodes) {
    throw Error("reservation_error", "job needs " + std::to_string(nodes) +
                                         " nodes but the cluster has " +
                                         std::to_string(state.total_nodes));
  }
  struct Release {
    Seconds end;
    std::int64_t id;
    int nodes;
  };
  std::vector<Release> releases;
  releases.reserve(state.running.size());
  for (const auto& r : state.running) {
    const auto& job = jobs[r.job];
    // A job past its estimate is treated as ending now.
    const Seconds end = std::max(state.clock, r.start + estimator.estimate(job));
    releases.push_back({end, job.id, job.requested_nodes});
  }
  std::sort(releases.begin(), releases.end(), [](const Release& a, const Release& b) {
    return a.end != b.end ? a.end < b.end : a.id < b.id;
  });

  // Walk release times in order; jobs sharing an end time release together.
  int available = state.free_nodes;
  std::size_t i = 0;
  Seconds when = state.clock;
  while (true) {
    while (i < releases.size() && releases[i].end <= when) available += releases[i++].nodes;
    if (available >= nodes) return {when, available - nodes};
    if (i == releases.size()) break;
    when = releases[i].end;
  }
  throw Error("internal_error", "running jobs do not account for the cluster's nodes");
}

Seconds reservation_time(const ClusterState& state, std::span<const Job> jobs, const Job& rjob,
                         const RuntimeEstimator& estimator) {
  return reserve(state, jobs, rjob.requested_nodes, estimator).time;
}

std::string to_csv(const ScheduleResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "id,submit,start,wait,run,bsld\n";
  for (const auto& j : result.jobs) {
    out << j.id << ',' << j.submit << ',' << j.start << ',' << j.wait << ',' << j.run << ','
        << j.bsld << '\n';
  }
  return out.str();
}

std::string to_json(const ScheduleResult& result) {
  nlohmann::ordered_json j;
  j["jobs"] = result.jobs.size();
  j["avg_bsld"] = result.avg_bsld;
  j["avg_wait"] = result.avg_wait;
  j["backfilled"] = result.backfilled;
  j["violations"] = result.violations;
  return j.dump(2);
}

namespace {

class Simulation {
 public:
  Simulation(const Trace& trace, PolicyKind policy, Backfiller* backfiller,
             const RuntimeEstimator& estimator, const SimulationObserver* observer)
      : jobs_(trace.jobs),
        policy_(policy),
        backfiller_(backfiller),
        estimator_(estimator),
        observer_(observer) {
    state_.total_nodes = trace.cluster_size;
    state_.free_nodes = trace.cluster_size;
    for (auto& j : jobs_) {
      if (j.requested_nodes > state_.total_nodes || j.requested_nodes < 1) {
        throw Error("rejected_job", "job " + std::to_string(j.id) + " requests " +
                                        std::to_string(j.requested_nodes) +
                                        " nodes on a cluster of " +
                                        std::to_string(state_.total_nodes));
      }
      j.start_time.reset();
    }
  }

  ScheduleResult run() {
    constexpr Seconds kNever = std::numeric_limits<Seconds>::infinity();
    std::size_t next = 0;
    while (next < jobs_.size() || !waiting_.empty() || !state_.running.empty()) {
      Seconds when = next < jobs_.size() ? jobs_[next].submit_time : kNever;
      for (const auto& r : state_.running) when = std::min(when, r.true_end);
      if (when == kNever) {
        throw Error("internal_error", "waiting jobs but no pending event");
      }
      state_.clock = std::max(state_.clock, when);

      std::erase_if(state_.running, [&](const RunningJob& r) {
        if (r.true_end > state_.clock) return false;
        state_.free_nodes += jobs_[r.job].requested_nodes;
        return true;
      });
      while (next < jobs_.size() && jobs_[next].submit_time <= state_.clock) {
        waiting_.push_back(next++);
      }
      schedule();
      if (observer_ && observer_->on_event) observer_->on_event(state_, jobs_);
    }
    return collect();
  }

 private:
  void start(std::size_t index) {
    auto& job = jobs_[index];
    state_.free_nodes -= job.requested_nodes;
    if (state_.free_nodes < 0) throw Error("internal_error", "node count went negative");
    job.start_time = state_.clock;
    state_.running.push_back({index, state_.clock, state_.clock + job.actual_runtime});
    if (observer_ && observer_->on_start) observer_->on_start(index, state_.clock);
  }

  void schedule() {
    if (waiting_.empty()) return;
    sort_queue(policy_, jobs_, waiting_, state_.clock);

    std::size_t started = 0;
    while (started < waiting_.size() &&
           jobs_[waiting_[started]].requested_nodes <= state_.free_nodes) {
      start(waiting_[started++]);
    }
    waiting_.erase(waiting_.begin(), waiting_.begin() + static_cast<std::ptrdiff_t>(started));
    if (waiting_.empty() || backfiller_ == nullptr) return;

    const std::size_t rjob = waiting_.front();
    const auto res = reserve(state_, jobs_, jobs_[rjob].requested_nodes, estimator_);

    BackfillContext ctx;
    ctx.clock = state_.clock;
    ctx.rjob = rjob;
    ctx.reservation = res.time;
    ctx.extra_nodes = res.extra_nodes;
    ctx.free_nodes = state_.free_nodes;
    ctx.total_nodes = state_.total_nodes;
    ctx.candidates = std::span<const std::size_t>(waiting_).subspan(1);
    ctx.queue = waiting_;
    ctx.jobs = jobs_;
    ctx.cluster = &state_;
    ctx.estimator = estimator_;

    const auto picks = backfiller_->select(ctx);
    if (picks.empty()) return;
    if (observer_ && observer_->on_backfill) observer_->on_backfill(ctx, picks);

    count_violations(rjob, picks);
    for (auto p : picks) {
      auto it = std::find(waiting_.begin() + 1, waiting_.end(), p);
      if (it == waiting_.end()) {
        throw Error("internal_error", "backfiller picked a job that is not a candidate");
      }
      if (jobs_[p].requested_nodes > state_.free_nodes) {
        throw Error("internal_error", "backfiller picked a job that does not fit");
      }
      waiting_.erase(it);
      start(p);
      ++backfilled_;
    }
  }

  // Replays the picks against the rjob's reservation computed on actual
  // runtimes; a pick that neither ends before it nor fits the spare nodes
  // delays the rjob.
  void count_violations(std::size_t rjob, std::span<const std::size_t> picks) {
    const auto truth =
        reserve(state_, jobs_, jobs_[rjob].requested_nodes, RuntimeEstimator::actual_runtime());
    int extra = truth.extra_nodes;
    for (auto p : picks) {
      const auto& job = jobs_[p];
      if (state_.clock + job.actual_runtime <= truth.time) continue;
      if (job.requested_nodes > extra) ++violations_;
      extra -= job.requested_nodes;
    }
  }

  ScheduleResult collect() const {
    ScheduleResult result;
    result.jobs.reserve(jobs_.size());
    double bsld_sum = 0, wait_sum = 0;
    for (const auto& j : jobs_) {
      JobRecord rec;
      rec.id = j.id;
      rec.submit = j.submit_time;
      rec.start = *j.start_time;
      rec.wait = rec.start - rec.submit;
      rec.run = j.actual_runtime;
      rec.nodes = j.requested_nodes;
      rec.bsld = bounded_slowdown(rec.wait, rec.run);
      bsld_sum += rec.bsld;
      wait_sum += rec.wait;
      result.jobs.push_back(rec);
    }
    const auto n = static_cast<double>(jobs_.size());
    result.avg_bsld = n > 0 ? bsld_sum / n : 0;
    result.avg_wait = n > 0 ? wait_sum / n : 0;
    result.backfilled = backfilled_;
    result.violations = violations_;
    return result;
  }

  std::vector<Job> jobs_;
  PolicyKind policy_;
  Backfiller* backfiller_;
  RuntimeEstimator estimator_;
  const SimulationObserver* observer_;
  ClusterState state_;
  std::vector<std::size_t> waiting_;
  std::size_t backfilled_ = 0;
  std::size_t violations_ = 0;
};

}  // namespace

ScheduleResult run_schedule(const Trace& trace, PolicyKind policy, Backfiller* backfiller,
                            const RuntimeEstimator& estimator, const SimulationObserver* observer) {
  if (trace.jobs.empty()) throw Error("empty_trace", "cannot simulate an empty trace");
  return Simulation(trace, policy, backfiller, estimator, observer).run();
}

}  // namespace rlbf
