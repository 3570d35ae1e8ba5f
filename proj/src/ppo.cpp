#include "rlbf/ppo.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "rlbf/error.hpp"

namespace rlbf {

void TrainConfig::validate() const {
  if (epochs == 0 || trajectories_per_epoch == 0 || jobs_per_trajectory == 0 ||
      update_iterations == 0 || max_observed_jobs == 0 || policy_hidden == 0 ||
      value_hidden == 0) {
    throw Error("config_error", "training sizes must be positive");
  }
  if (!(learning_rate > 0) || !(clip_ratio > 0) || !(discount > 0) || discount > 1 ||
      !(gae_lambda > 0) || gae_lambda > 1) {
    throw Error("config_error", "learning rate, clip ratio, discount and lambda must be positive");
  }
}

double episode_reward(double achieved_bsld, double baseline_bsld, std::size_t violations,
                      double violation_penalty) {
  if (!(baseline_bsld > 0)) throw Error("reward_error", "baseline bsld must be positive");
  return (baseline_bsld - achieved_bsld) / baseline_bsld +
         static_cast<double>(violations) * violation_penalty;
}

double baseline_bsld(const Trace& sequence) {
  EasyBackfiller sjf_scan(PolicyKind::Sjf);
  return run_schedule(sequence, PolicyKind::Fcfs, &sjf_scan, RuntimeEstimator::request_time())
      .avg_bsld;
}

Episode run_episode(const Trace& sequence, PolicyKind base, const AgentParams& params,
                    LearnedBackfiller::Mode mode, std::uint64_t seed, double baseline,
                    double violation_penalty) {
  Episode ep;
  ep.baseline = baseline;
  LearnedBackfiller agent(params, mode, seed, &ep.trajectory);
  ep.result = run_schedule(sequence, base, &agent, RuntimeEstimator::request_time());
  ep.trajectory.reward =
      episode_reward(ep.result.avg_bsld, baseline, ep.result.violations, violation_penalty);
  return ep;
}

void compute_advantages(Trajectory& trajectory, double discount, double lambda) {
  auto& steps = trajectory.steps;
  const auto n = steps.size();
  double next_value = 0;
  double running_adv = 0;
  double running_ret = 0;
  for (std::size_t k = n; k-- > 0;) {
    const double reward = k + 1 == n ? trajectory.reward : 0.0;
    const double delta = reward + discount * next_value - steps[k].value;
    running_adv = delta + discount * lambda * running_adv;
    running_ret = reward + discount * running_ret;
    steps[k].advantage = running_adv;
    steps[k].ret = running_ret;
    next_value = steps[k].value;
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the three words
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

UpdateStats ppo_update(AgentParams& params, std::span<const StepSample> batch,
                       const TrainConfig& config, Adam& policy_opt, Adam& value_opt) {
  UpdateStats stats;
  ParamVector policy_grad(params.policy.size());
  ParamVector value_grad(params.value.size());
  for (std::size_t it = 0; it < config.update_iterations; ++it) {
    const auto pl = ppo_policy_loss(params, batch, config.clip_ratio, policy_grad);
    const double vl = value_loss(params, batch, value_grad);
    if (!std::isfinite(pl.loss) || !std::isfinite(vl)) {
      throw Error("training_diverged", "non-finite loss at update iteration " + std::to_string(it) +
                                           " (policy " + std::to_string(pl.loss) + ", value " +
                                           std::to_string(vl) + ")");
    }
    if (it == 0) {
      stats.policy_loss = pl.loss;
      stats.value_loss_start = vl;
    }
    stats.approx_kl = pl.approx_kl;
    stats.value_loss_end = vl;
    policy_opt.step(params.policy, policy_grad);
    value_opt.step(params.value, value_grad);
  }
  if (!params.all_finite()) throw Error("training_diverged", "non-finite parameters after update");
  return stats;
}

TrainResult ppo_train(const Trace& trace, PolicyKind base, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  if (trace.jobs.size() < config.jobs_per_trajectory) {
    throw Error("config_error", "trace has fewer jobs than one trajectory needs");
  }

  TrainResult result;
  result.params = AgentParams::random(config.shape(), mix_seed(config.seed, 0x5eed));
  Adam policy_opt(result.params.policy.size(), config.learning_rate);
  Adam value_opt(result.params.value.size(), config.learning_rate);
  std::map<std::size_t, double> baseline_cache;  // keyed by window start

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    std::vector<StepSample> batch;
    double reward_sum = 0, bsld_sum = 0, baseline_sum = 0;

    for (std::size_t t = 0; t < config.trajectories_per_epoch; ++t) {
      const auto seed = mix_seed(config.seed, epoch + 1, t);
      const auto start = sample_start_index(trace.jobs.size(), config.jobs_per_trajectory, seed);
      const auto sequence = sample_sequence(trace, config.jobs_per_trajectory, seed);
      auto cached = baseline_cache.find(start);
      if (cached == baseline_cache.end()) {
        cached = baseline_cache.emplace(start, baseline_bsld(sequence)).first;
      }
      auto ep = run_episode(sequence, base, result.params, LearnedBackfiller::Mode::Sample,
                            mix_seed(seed, 0xac7), cached->second, config.violation_penalty);
      reward_sum += ep.trajectory.reward;
      bsld_sum += ep.result.avg_bsld;
      baseline_sum += ep.baseline;
      record.violations += ep.result.violations;
      compute_advantages(ep.trajectory, config.discount, config.gae_lambda);
      for (auto& s : ep.trajectory.steps) batch.push_back(std::move(s));
    }

    const double n = static_cast<double>(config.trajectories_per_epoch);
    record.mean_reward = reward_sum / n;
    record.mean_bsld = bsld_sum / n;
    record.mean_baseline_bsld = baseline_sum / n;
    record.steps = batch.size();

    if (!batch.empty()) {
      double mean = 0;
      for (const auto& s : batch) mean += s.advantage;
      mean /= static_cast<double>(batch.size());
      double var = 0;
      for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
      const double sd = std::sqrt(var / static_cast<double>(batch.size()));
      for (auto& s : batch) s.advantage = (s.advantage - mean) / (sd + 1e-8);

      const auto stats = ppo_update(result.params, batch, config, policy_opt, value_opt);
      record.policy_loss = stats.policy_loss;
      record.value_loss_start = stats.value_loss_start;
      record.value_loss_end = stats.value_loss_end;
      record.approx_kl = stats.approx_kl;
    }
    result.curve.push_back(record);
    if (on_epoch) on_epoch(record, result.params);
  }
  return result;
}

}  // namespace rlbf
