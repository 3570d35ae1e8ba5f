#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rlbf/backfill.hpp"
#include "rlbf/network.hpp"
#include "rlbf/policies.hpp"
#include "rlbf/workload.hpp"

namespace rlbf {

inline constexpr double kViolationPenalty = -5.0;

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t trajectories_per_epoch = 100;
  std::size_t jobs_per_trajectory = 256;
  std::size_t update_iterations = 80;
  double learning_rate = 1e-3;
  double clip_ratio = 0.2;
  double discount = 1.0;
  double gae_lambda = 0.97;
  std::size_t policy_hidden = 32;
  std::size_t value_hidden = 64;
  std::size_t max_observed_jobs = kDefaultMaxObservedJobs;
  double violation_penalty = kViolationPenalty;
  std::uint64_t seed = 0;

  NetworkShape shape() const {
    return {max_observed_jobs, kJobFeatures, policy_hidden, value_hidden};
  }
  void validate() const;
};

/// (baseline - achieved) / baseline + violations * penalty
double episode_reward(double achieved_bsld, double baseline_bsld, std::size_t violations,
                      double violation_penalty = kViolationPenalty);

/// Average bsld of the sequence under FCFS with SJF-ordered EASY backfilling
/// on request times: the reference the reward is measured against.
double baseline_bsld(const Trace& sequence);

struct Episode {
  ScheduleResult result;
  double baseline = 0;
  Trajectory trajectory;
};

/// Schedules one sequence with `base` ordering and learned backfilling and
/// fills in the terminal reward.
Episode run_episode(const Trace& sequence, PolicyKind base, const AgentParams& params,
                    LearnedBackfiller::Mode mode, std::uint64_t seed, double baseline,
                    double violation_penalty = kViolationPenalty);

/// Generalized advantage estimation over a trajectory whose only reward is
/// the terminal one. Fills StepSample::advantage and ::ret.
void compute_advantages(Trajectory& trajectory, double discount, double lambda);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_reward = 0;
  double mean_bsld = 0;
  double mean_baseline_bsld = 0;
  std::size_t steps = 0;
  std::size_t violations = 0;
  double policy_loss = 0;
  double value_loss_start = 0;
  double value_loss_end = 0;
  double approx_kl = 0;
};

struct TrainResult {
  AgentParams params;
  std::vector<EpochRecord> curve;
};

using EpochCallback = std::function<void(const EpochRecord&, const AgentParams&)>;

/// PPO-clip with a GAE advantage and separate Adam optimizers for the policy
/// and value networks. Deterministic in config.seed.
TrainResult ppo_train(const Trace& trace, PolicyKind base, const TrainConfig& config,
                      const EpochCallback& on_epoch = {});

/// One PPO update over a fixed batch (advantages already normalized).
struct UpdateStats {
  double policy_loss = 0;
  double value_loss_start = 0;
  double value_loss_end = 0;
  double approx_kl = 0;
};
UpdateStats ppo_update(AgentParams& params, std::span<const StepSample> batch,
                       const TrainConfig& config, Adam& policy_opt, Adam& value_opt);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace rlbf
