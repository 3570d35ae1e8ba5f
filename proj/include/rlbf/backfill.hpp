#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rlbf/network.hpp"
#include "rlbf/observation.hpp"
#include "rlbf/simulator.hpp"

namespace rlbf {

/// Single-reservation EASY. Candidates are scanned in `ctx.candidates` order;
/// a candidate starts if it fits the free nodes and either ends (by the
/// context's estimate) before the reservation or fits the extra nodes.
std::vector<std::size_t> easy_backfill(const BackfillContext& ctx);

class EasyBackfiller : public Backfiller {
 public:
  /// `scan_order` re-sorts candidates by another policy before scanning;
  /// by default they keep the base-policy order.
  explicit EasyBackfiller(std::optional<PolicyKind> scan_order = std::nullopt)
      : scan_order_(scan_order) {}

  std::vector<std::size_t> select(const BackfillContext& ctx) override;

 private:
  std::optional<PolicyKind> scan_order_;
};

/// One agent decision recorded during a training rollout.
struct Trajectory {
  std::vector<StepSample> steps;
  double reward = 0;  // terminal; every intermediate reward is 0
};

/// Delegates the choice to the policy network. Sample mode draws from the
/// action distribution; Greedy takes the most probable action.
class LearnedBackfiller : public Backfiller {
 public:
  enum class Mode { Sample, Greedy };

  LearnedBackfiller(const AgentParams& params, Mode mode, std::uint64_t seed = 0,
                    Trajectory* recorder = nullptr);

  std::vector<std::size_t> select(const BackfillContext& ctx) override;

  std::size_t decisions() const { return decisions_; }

 private:
  const AgentParams& params_;
  Mode mode_;
  std::mt19937_64 rng_;
  Trajectory* recorder_;
  std::size_t decisions_ = 0;
};

/// Parsed strategy string: "none" | "easy:req" | "easy:ar" |
/// "easy:noisy:<pct>" | "rl:<model-file>".
struct StrategySpec {
  enum class Kind { None, Easy, Learned };

  Kind kind = Kind::None;
  RuntimeEstimator estimator;
  std::string model_path;

  static StrategySpec parse(std::string_view text);
  std::string name() const;
};

}  // namespace rlbf
