#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <vector>

#include "rlbf/observation.hpp"

namespace rlbf {

/// Allocator with a fixed 64-byte alignment. Vectorized Eigen reductions
/// over mapped memory peel differently depending on the start address, so
/// parameter and gradient buffers need a stable alignment for runs to be
/// bit-reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using ParamVector = std::vector<double, AlignedAllocator<double>>;

struct NetworkShape {
  std::size_t max_jobs = kDefaultMaxObservedJobs;
  std::size_t features = kJobFeatures;
  std::size_t policy_hidden = 32;
  std::size_t value_hidden = 64;

  std::size_t value_inputs() const { return max_jobs * features; }
  std::size_t policy_size() const;
  std::size_t value_size() const;
  bool operator==(const NetworkShape&) const = default;
};

/// Weights of both networks, stored flat so optimizers and serialization can
/// treat them as plain vectors.
///
/// Policy kernel (applied to every job row with shared weights):
///   features -> policy_hidden -> policy_hidden -> 1, tanh hidden layers,
///   followed by one scalar bias that scores the stop action.
/// Value network (on the flattened observation):
///   max_jobs*features -> value_hidden -> value_hidden -> 1, tanh hidden layers.
///
/// Matrices are column-major; each layer is W then b.
struct AgentParams {
  NetworkShape shape;
  ParamVector policy;
  ParamVector value;

  static AgentParams zeros(const NetworkShape& shape);
  /// Glorot-uniform weights, zero biases.
  static AgentParams random(const NetworkShape& shape, std::uint64_t seed);

  bool all_finite() const;
  bool operator==(const AgentParams&) const = default;
};

/// Action distribution over max_jobs + 1 slots. Masked slots get exactly 0.
std::vector<double> policy_forward(const AgentParams& params, const Observation& obs);

double value_forward(const AgentParams& params, const Observation& obs);

/// log pi(action | obs); adds d log pi / d params into `grad` (policy-sized).
double policy_log_prob_gradient(const AgentParams& params, const Observation& obs,
                                std::size_t action, std::span<double> grad);

/// V(obs); adds dV / d params into `grad` (value-sized).
double value_gradient(const AgentParams& params, const Observation& obs, std::span<double> grad);

/// One recorded decision in compact form: only the non-padding rows.
struct StepSample {
  std::vector<double> rows;            // used_rows * features
  std::vector<std::uint8_t> selectable;  // used_rows
  std::size_t action = 0;              // slot index, or max_jobs for stop
  double log_prob = 0;
  double value = 0;
  double advantage = 0;
  double ret = 0;
};

StepSample compact_step(const Observation& obs, std::size_t action, double log_prob, double value);

struct PolicyLossStats {
  double loss = 0;
  double approx_kl = 0;
  double clip_fraction = 0;
};

/// Mean PPO-clip loss -min(r A, clip(r, 1-eps, 1+eps) A) over the batch;
/// writes its gradient into `grad` (overwritten, policy-sized).
PolicyLossStats ppo_policy_loss(const AgentParams& params, std::span<const StepSample> batch,
                                double clip_ratio, std::span<double> grad);

/// Mean squared error (V - ret)^2 over the batch; writes its gradient into
/// `grad` (overwritten, value-sized).
double value_loss(const AgentParams& params, std::span<const StepSample> batch,
                  std::span<double> grad);

/// Values for a batch of compact steps.
std::vector<double> value_batch(const AgentParams& params, std::span<const StepSample> batch);

class Adam {
 public:
  explicit Adam(std::size_t size, double learning_rate = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  ParamVector m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace rlbf
