#include "rlbf/backfill.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "rlbf/error.hpp"

namespace rlbf {

std::vector<std::size_t> easy_backfill(const BackfillContext& ctx) {
  std::vector<std::size_t> started;
  int free_nodes = ctx.free_nodes;
  int extra = ctx.extra_nodes;
  for (auto c : ctx.candidates) {
    if (free_nodes == 0) break;
    const auto& job = ctx.jobs[c];
    if (job.requested_nodes > free_nodes) continue;
    const bool ends_before = ctx.clock + ctx.estimator.estimate(job) <= ctx.reservation;
    if (ends_before) {
      free_nodes -= job.requested_nodes;
      started.push_back(c);
    } else if (job.requested_nodes <= extra) {
      free_nodes -= job.requested_nodes;
      extra -= job.requested_nodes;
      started.push_back(c);
    }
  }
  return started;
}

std::vector<std::size_t> EasyBackfiller::select(const BackfillContext& ctx) {
  if (!scan_order_) return easy_backfill(ctx);
  std::vector<std::size_t> order(ctx.candidates.begin(), ctx.candidates.end());
  sort_queue(*scan_order_, ctx.jobs, order, ctx.clock);
  BackfillContext reordered = ctx;
  reordered.candidates = order;
  return easy_backfill(reordered);
}

LearnedBackfiller::LearnedBackfiller(const AgentParams& params, Mode mode, std::uint64_t seed,
                                     Trajectory* recorder)
    : params_(params), mode_(mode), rng_(seed), recorder_(recorder) {}

std::vector<std::size_t> LearnedBackfiller::select(const BackfillContext& ctx) {
  std::vector<std::size_t> started;
  int free_nodes = ctx.free_nodes;
  int extra = ctx.extra_nodes;
  std::vector<std::size_t> queue(ctx.queue.begin(), ctx.queue.end());
  const auto max_jobs = params_.shape.max_jobs;

  for (std::size_t pick = 0; pick < max_jobs; ++pick) {
    const bool any_fits = std::any_of(ctx.candidates.begin(), ctx.candidates.end(), [&](std::size_t c) {
      return ctx.jobs[c].requested_nodes <= free_nodes &&
             std::find(started.begin(), started.end(), c) == started.end();
    });
    if (!any_fits) break;

    ObservationInput in;
    in.queue = queue;
    in.rjob = ctx.rjob;
    in.jobs = ctx.jobs;
    in.clock = ctx.clock;
    in.free_nodes = free_nodes;
    in.total_nodes = ctx.total_nodes;
    in.reservation = ctx.reservation;
    in.extra_nodes = extra;
    in.estimator = ctx.estimator;
    const auto obs = build_observation(in, max_jobs);
    // Fitting jobs beyond the observation window are invisible to the agent.
    if (obs.selectable_jobs() == 0) break;

    const auto probs = policy_forward(params_, obs);
    std::size_t action = obs.stop_action();
    if (mode_ == Mode::Greedy) {
      action = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
      std::discrete_distribution<std::size_t> dist(probs.begin(), probs.end());
      action = dist(rng_);
    }
    if (!obs.mask[action]) {
      throw Error("internal_error", "agent selected a masked action");
    }
    ++decisions_;
    if (recorder_) {
      recorder_->steps.push_back(
          compact_step(obs, action, std::log(probs[action]), value_forward(params_, obs)));
    }
    if (action == obs.stop_action()) break;

    const std::size_t job_index = obs.slot_job[action];
    const auto& job = ctx.jobs[job_index];
    const bool ends_before = ctx.clock + ctx.estimator.estimate(job) <= ctx.reservation;
    free_nodes -= job.requested_nodes;
    if (!ends_before) extra = std::max(0, extra - job.requested_nodes);
    started.push_back(job_index);
    std::erase(queue, job_index);
  }
  return started;
}

StrategySpec StrategySpec::parse(std::string_view text) {
  StrategySpec spec;
  if (text == "none") return spec;
  if (text == "easy:req" || text == "easy") {
    spec.kind = Kind::Easy;
    spec.estimator = RuntimeEstimator::request_time();
    return spec;
  }
  if (text == "easy:ar") {
    spec.kind = Kind::Easy;
    spec.estimator = RuntimeEstimator::actual_runtime();
    return spec;
  }
  constexpr std::string_view noisy = "easy:noisy:";
  if (text.substr(0, noisy.size()) == noisy) {
    const auto pct = text.substr(noisy.size());
    double value = 0;
    const auto [ptr, ec] = std::from_chars(pct.data(), pct.data() + pct.size(), value);
    if (ec != std::errc() || ptr != pct.data() + pct.size()) {
      throw Error("config_error", "bad noise percentage in '" + std::string(text) + "'");
    }
    spec.kind = Kind::Easy;
    spec.estimator = RuntimeEstimator::noisy_actual(value / 100.0);
    return spec;
  }
  constexpr std::string_view rl = "rl:";
  if (text.substr(0, rl.size()) == rl && text.size() > rl.size()) {
    spec.kind = Kind::Learned;
    spec.estimator = RuntimeEstimator::request_time();
    spec.model_path = std::string(text.substr(rl.size()));
    return spec;
  }
  throw Error("config_error", "unknown backfill strategy '" + std::string(text) + "'");
}

std::string StrategySpec::name() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Easy: return "easy:" + estimator.name();
    case Kind::Learned: return "rl:" + model_path;
  }
  return "?";
}

}  // namespace rlbf
