#include "rlbf/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "rlbf/error.hpp"

namespace rlbf {
namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstVectorMap = Eigen::Map<const Vector>;
using MatrixMap = Eigen::Map<Matrix>;
using VectorMap = Eigen::Map<Vector>;

// Offsets of the policy kernel's tensors inside AgentParams::policy.
struct PolicyLayout {
  std::size_t f, h;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + h * f; }
  std::size_t w2() const { return b1() + h; }
  std::size_t b2() const { return w2() + h * h; }
  std::size_t w3() const { return b2() + h; }
  std::size_t b3() const { return w3() + h; }
  std::size_t stop() const { return b3() + 1; }
  std::size_t size() const { return stop() + 1; }
};

struct ValueLayout {
  std::size_t d, h;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + h * d; }
  std::size_t w2() const { return b1() + h; }
  std::size_t b2() const { return w2() + h * h; }
  std::size_t w3() const { return b2() + h; }
  std::size_t b3() const { return w3() + h; }
  std::size_t size() const { return b3() + 1; }
};

std::size_t l_inputs(const PolicyLayout& l) { return l.f; }
std::size_t l_inputs(const ValueLayout& l) { return l.d; }

PolicyLayout policy_layout(const NetworkShape& s) { return {s.features, s.policy_hidden}; }
ValueLayout value_layout(const NetworkShape& s) { return {s.value_inputs(), s.value_hidden}; }

struct PolicyView {
  ConstMatrixMap w1, w2, w3;
  ConstVectorMap b1, b2;
  double b3, stop;

  explicit PolicyView(const AgentParams& p)
      : PolicyView(p.policy.data(), policy_layout(p.shape)) {}
  PolicyView(const double* d, const PolicyLayout& l)
      : w1(d + l.w1(), l.h, l.f),
        w2(d + l.w2(), l.h, l.h),
        w3(d + l.w3(), 1, l.h),
        b1(d + l.b1(), l.h),
        b2(d + l.b2(), l.h),
        b3(d[l.b3()]),
        stop(d[l.stop()]) {}
};

struct ValueView {
  ConstMatrixMap w1, w2, w3;
  ConstVectorMap b1, b2;
  double b3;

  explicit ValueView(const AgentParams& p) : ValueView(p.value.data(), value_layout(p.shape)) {}
  ValueView(const double* d, const ValueLayout& l)
      : w1(d + l.w1(), l.h, l.d),
        w2(d + l.w2(), l.h, l.h),
        w3(d + l.w3(), 1, l.h),
        b1(d + l.b1(), l.h),
        b2(d + l.b2(), l.h),
        b3(d[l.b3()]) {}
};

// Activations for a batch of columns through a 3-layer tanh MLP.
struct MlpPass {
  Matrix h1, h2;
  RowVector out;
};

template <typename View, typename Input>
MlpPass mlp_forward(const View& v, const Input& x) {
  MlpPass pass;
  pass.h1 = ((v.w1 * x).colwise() + v.b1).array().tanh().matrix();
  pass.h2 = ((v.w2 * pass.h1).colwise() + v.b2).array().tanh().matrix();
  pass.out = (v.w3 * pass.h2).array() + v.b3;
  return pass;
}

// Value pass on a group: only the first `width` input columns of w1.
MlpPass value_group_forward(const ValueView& v, const Matrix& x) {
  MlpPass pass;
  pass.h1 = ((v.w1.leftCols(x.rows()) * x).colwise() + v.b1).array().tanh().matrix();
  pass.h2 = ((v.w2 * pass.h1).colwise() + v.b2).array().tanh().matrix();
  pass.out = (v.w3 * pass.h2).array() + v.b3;
  return pass;
}

// Accumulates the gradient of sum_k d_out[k] * out[k] into w1..b3 at `g`.
template <typename View, typename Layout, typename Input>
void mlp_backward(const View& v, const Layout& l, const Input& x, const MlpPass& pass,
                  const RowVector& d_out, double* g) {
  MatrixMap gw1_full(g + l.w1(), l.h, static_cast<Eigen::Index>(l_inputs(l)));
  auto gw1 = gw1_full.leftCols(x.rows());
  VectorMap gb1(g + l.b1(), l.h);
  MatrixMap gw2(g + l.w2(), l.h, l.h);
  VectorMap gb2(g + l.b2(), l.h);
  MatrixMap gw3(g + l.w3(), 1, l.h);

  gw3.noalias() += d_out * pass.h2.transpose();
  g[l.b3()] += d_out.sum();
  Matrix dz2 = (v.w3.transpose() * d_out).cwiseProduct((1.0 - pass.h2.array().square()).matrix());
  gw2.noalias() += dz2 * pass.h1.transpose();
  gb2 += dz2.rowwise().sum();
  Matrix dz1 = (v.w2.transpose() * dz2).cwiseProduct((1.0 - pass.h1.array().square()).matrix());
  gw1.noalias() += dz1 * x.transpose();
  gb1 += dz1.rowwise().sum();
}

// Selectable rows of every step stacked as columns, plus per-step offsets.
struct PolicyBatch {
  Matrix x;                            // features x total selectable rows
  std::vector<std::size_t> offset;     // first column of step i; size steps+1
  std::vector<std::ptrdiff_t> action;  // local column of the action, -1 for stop
};

PolicyBatch gather_policy_batch(std::span<const StepSample> batch, std::size_t features,
                                std::size_t max_jobs) {
  PolicyBatch pb;
  pb.offset.reserve(batch.size() + 1);
  std::size_t total = 0;
  for (const auto& s : batch) {
    pb.offset.push_back(total);
    total += static_cast<std::size_t>(std::count(s.selectable.begin(), s.selectable.end(), 1));
  }
  pb.offset.push_back(total);
  pb.x.resize(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(total));
  pb.action.reserve(batch.size());

  std::size_t col = 0;
  for (const auto& s : batch) {
    std::ptrdiff_t local = -1;
    std::ptrdiff_t k = 0;
    for (std::size_t r = 0; r < s.selectable.size(); ++r) {
      if (!s.selectable[r]) continue;
      if (r == s.action) local = k;
      for (std::size_t f = 0; f < features; ++f) {
        pb.x(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(col)) = s.rows[r * features + f];
      }
      ++col;
      ++k;
    }
    if (s.action != max_jobs && local < 0) {
      throw Error("internal_error", "recorded action is not selectable");
    }
    pb.action.push_back(local);
  }
  return pb;
}

// Log-softmax over [scores[begin:end], stop].
struct StepDistribution {
  double log_norm;
};

StepDistribution step_log_norm(const RowVector& scores, std::size_t begin, std::size_t end,
                               double stop) {
  double m = stop;
  for (std::size_t c = begin; c < end; ++c) m = std::max(m, scores(static_cast<Eigen::Index>(c)));
  double sum = std::exp(stop - m);
  for (std::size_t c = begin; c < end; ++c) sum += std::exp(scores(static_cast<Eigen::Index>(c)) - m);
  return {m + std::log(sum)};
}

Matrix dense_value_inputs(std::span<const StepSample> batch, std::size_t inputs) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(inputs), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& rows = batch[i].rows;
    std::copy(rows.begin(), rows.end(), x.col(static_cast<Eigen::Index>(i)).data());
  }
  return x;
}

// Steps grouped by queue length so each group only multiplies the non-zero
// prefix of the flattened observation.
struct ValueGroup {
  std::vector<std::size_t> members;
  std::size_t width = 0;  // input columns actually used
  Matrix x;               // width x members
};

std::vector<ValueGroup> value_groups(std::span<const StepSample> batch) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch[a].rows.size() > batch[b].rows.size();
  });
  constexpr std::size_t kGroup = 256;
  std::vector<ValueGroup> groups;
  for (std::size_t begin = 0; begin < order.size(); begin += kGroup) {
    ValueGroup g;
    g.members.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + kGroup)));
    g.width = std::max<std::size_t>(1, batch[g.members.front()].rows.size());
    g.x = Matrix::Zero(static_cast<Eigen::Index>(g.width), static_cast<Eigen::Index>(g.members.size()));
    for (std::size_t k = 0; k < g.members.size(); ++k) {
      const auto& rows = batch[g.members[k]].rows;
      std::copy(rows.begin(), rows.end(), g.x.col(static_cast<Eigen::Index>(k)).data());
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace

std::size_t NetworkShape::policy_size() const { return policy_layout(*this).size(); }
std::size_t NetworkShape::value_size() const { return value_layout(*this).size(); }

AgentParams AgentParams::zeros(const NetworkShape& shape) {
  AgentParams p;
  p.shape = shape;
  p.policy.assign(shape.policy_size(), 0.0);
  p.value.assign(shape.value_size(), 0.0);
  return p;
}

AgentParams AgentParams::random(const NetworkShape& shape, std::uint64_t seed) {
  auto p = zeros(shape);
  std::mt19937_64 rng(seed);
  const auto fill = [&](ParamVector& v, std::size_t offset, std::size_t rows,
                        std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < rows * cols; ++i) v[offset + i] = dist(rng);
  };
  const auto pl = policy_layout(shape);
  fill(p.policy, pl.w1(), pl.h, pl.f);
  fill(p.policy, pl.w2(), pl.h, pl.h);
  fill(p.policy, pl.w3(), 1, pl.h);
  const auto vl = value_layout(shape);
  fill(p.value, vl.w1(), vl.h, vl.d);
  fill(p.value, vl.w2(), vl.h, vl.h);
  fill(p.value, vl.w3(), 1, vl.h);
  return p;
}

bool AgentParams::all_finite() const {
  const auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(policy.begin(), policy.end(), finite) &&
         std::all_of(value.begin(), value.end(), finite);
}

StepSample compact_step(const Observation& obs, std::size_t action, double log_prob, double value) {
  StepSample s;
  s.rows.assign(obs.features.begin(),
                obs.features.begin() + static_cast<std::ptrdiff_t>(obs.used_rows * kJobFeatures));
  s.selectable.assign(obs.mask.begin(), obs.mask.begin() + static_cast<std::ptrdiff_t>(obs.used_rows));
  s.action = action == obs.stop_action() ? obs.max_jobs : action;
  s.log_prob = log_prob;
  s.value = value;
  return s;
}

std::vector<double> policy_forward(const AgentParams& params, const Observation& obs) {
  const StepSample step = compact_step(obs, obs.stop_action(), 0, 0);
  const PolicyView view(params);
  const auto pb = gather_policy_batch(std::span(&step, 1), params.shape.features, obs.max_jobs);
  std::vector<double> probs(obs.max_jobs + 1, 0.0);
  RowVector scores;
  if (pb.x.cols() > 0) scores = mlp_forward(view, pb.x).out;
  const auto dist = step_log_norm(scores, 0, pb.offset[1], view.stop);
  std::size_t col = 0;
  for (std::size_t r = 0; r < obs.used_rows; ++r) {
    if (!obs.mask[r]) continue;
    probs[r] = std::exp(scores(static_cast<Eigen::Index>(col++)) - dist.log_norm);
  }
  probs[obs.stop_action()] = std::exp(view.stop - dist.log_norm);
  return probs;
}

double value_forward(const AgentParams& params, const Observation& obs) {
  const ValueView view(params);
  const auto inputs = static_cast<Eigen::Index>(obs.used_rows * params.shape.features);
  const Vector x = ConstVectorMap(obs.features.data(), inputs);
  const Vector h1 = (view.w1.leftCols(inputs) * x + view.b1).array().tanh().matrix();
  const Vector h2 = (view.w2 * h1 + view.b2).array().tanh().matrix();
  return (view.w3 * h2)(0) + view.b3;
}

double policy_log_prob_gradient(const AgentParams& params, const Observation& obs,
                                std::size_t action, std::span<double> grad) {
  if (action > obs.max_jobs || !obs.mask[action]) {
    throw Error("internal_error", "log-probability of a masked action");
  }
  const StepSample step = compact_step(obs, action, 0, 0);
  const PolicyView view(params);
  const auto layout = policy_layout(params.shape);
  const auto pb = gather_policy_batch(std::span(&step, 1), params.shape.features, obs.max_jobs);
  const auto cols = static_cast<Eigen::Index>(pb.offset[1]);

  MlpPass pass;
  if (cols > 0) pass = mlp_forward(view, pb.x);
  const auto dist = step_log_norm(pass.out, 0, pb.offset[1], view.stop);
  const double stop_p = std::exp(view.stop - dist.log_norm);

  // d log p(a) / d logit_j = [j == a] - p_j
  RowVector d_scores(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    d_scores(c) = (pb.action[0] == c ? 1.0 : 0.0) - std::exp(pass.out(c) - dist.log_norm);
  }
  const bool stop_taken = pb.action[0] < 0;
  grad[layout.stop()] += (stop_taken ? 1.0 : 0.0) - stop_p;
  if (cols > 0) mlp_backward(view, layout, pb.x, pass, d_scores, grad.data());

  const double logit = stop_taken ? view.stop : pass.out(pb.action[0]);
  return logit - dist.log_norm;
}

double value_gradient(const AgentParams& params, const Observation& obs, std::span<double> grad) {
  const StepSample step = compact_step(obs, obs.stop_action(), 0, 0);
  const ValueView view(params);
  const auto layout = value_layout(params.shape);
  const Matrix x = dense_value_inputs(std::span(&step, 1), params.shape.value_inputs());
  const auto pass = mlp_forward(view, x);
  mlp_backward(view, layout, x, pass, RowVector::Ones(1), grad.data());
  return pass.out(0);
}

PolicyLossStats ppo_policy_loss(const AgentParams& params, std::span<const StepSample> batch,
                                double clip_ratio, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  PolicyLossStats stats;
  if (batch.empty()) return stats;

  const PolicyView view(params);
  const auto layout = policy_layout(params.shape);
  const auto pb = gather_policy_batch(batch, params.shape.features, params.shape.max_jobs);
  const auto cols = pb.x.cols();
  MlpPass pass;
  if (cols > 0) pass = mlp_forward(view, pb.x);

  RowVector d_scores = RowVector::Zero(cols);
  double d_stop = 0;
  const double n = static_cast<double>(batch.size());
  std::size_t clipped = 0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto begin = pb.offset[i];
    const auto end = pb.offset[i + 1];
    const auto dist = step_log_norm(pass.out, begin, end, view.stop);
    const auto local = pb.action[i];
    const double logit = local < 0 ? view.stop : pass.out(static_cast<Eigen::Index>(begin) + local);
    const double log_prob = logit - dist.log_norm;
    const double ratio = std::exp(log_prob - batch[i].log_prob);
    const double adv = batch[i].advantage;
    const double unclipped = ratio * adv;
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
    const double clipped_obj = clipped_ratio * adv;

    stats.loss -= std::min(unclipped, clipped_obj) / n;
    stats.approx_kl += (batch[i].log_prob - log_prob) / n;
    if (clipped_ratio != ratio) ++clipped;

    // Gradient flows only through the unclipped branch.
    if (unclipped > clipped_obj) continue;
    const double g = -adv * ratio / n;  // d loss / d log_prob
    for (std::size_t c = begin; c < end; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      const double p = std::exp(pass.out(ci) - dist.log_norm);
      d_scores(ci) += g * ((local >= 0 && c == begin + static_cast<std::size_t>(local)) ? 1.0 : 0.0) - g * p;
    }
    const double stop_p = std::exp(view.stop - dist.log_norm);
    d_stop += g * ((local < 0 ? 1.0 : 0.0) - stop_p);
  }
  stats.clip_fraction = static_cast<double>(clipped) / n;
  grad[layout.stop()] += d_stop;
  if (cols > 0) mlp_backward(view, layout, pb.x, pass, d_scores, grad.data());
  return stats;
}

double value_loss(const AgentParams& params, std::span<const StepSample> batch,
                  std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0;
  const ValueView view(params);
  const auto layout = value_layout(params.shape);
  const double n = static_cast<double>(batch.size());
  double loss = 0;
  for (const auto& group : value_groups(batch)) {
    const auto pass = value_group_forward(view, group.x);
    RowVector d_out(static_cast<Eigen::Index>(group.members.size()));
    for (std::size_t k = 0; k < group.members.size(); ++k) {
      const double err = pass.out(static_cast<Eigen::Index>(k)) - batch[group.members[k]].ret;
      loss += err * err / n;
      d_out(static_cast<Eigen::Index>(k)) = 2.0 * err / n;
    }
    mlp_backward(view, layout, group.x, pass, d_out, grad.data());
  }
  return loss;
}

std::vector<double> value_batch(const AgentParams& params, std::span<const StepSample> batch) {
  const ValueView view(params);
  std::vector<double> out(batch.size());
  for (const auto& group : value_groups(batch)) {
    const auto pass = value_group_forward(view, group.x);
    for (std::size_t k = 0; k < group.members.size(); ++k) {
      out[group.members[k]] = pass.out(static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace rlbf
