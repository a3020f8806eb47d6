#pragma once

// Deep Q-network agent: state encoding, replayed double-network TD loss
// and its gradient, and the online training loop (epsilon-greedy action,
// environment step, store, sample a mini-batch, gradient step, periodic
// target sync).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecoff/dynamics.hpp"
#include "mecoff/metrics.hpp"
#include "mecoff/qnetwork.hpp"
#include "mecoff/replay_memory.hpp"

namespace mecoff {

/// [task, energy / h_max, gain index / (|G_n| - 1) per BS, one-hot last_bs (N + 1)].
inline std::vector<double> encode_state(const NetworkState& s, const ScenarioSpec& spec) {
  const auto n_bs = spec.channel.n_bs();
  std::vector<double> code;
  code.reserve(2 + 2 * n_bs + 1);
  code.push_back(s.task_present ? 1.0 : 0.0);
  code.push_back(static_cast<double>(s.energy) / spec.params.h_max);
  for (std::size_t n = 0; n < n_bs; ++n) {
    const auto levels = spec.channel.n_states(n);
    code.push_back(levels > 1 ? static_cast<double>(s.gains[n]) / static_cast<double>(levels - 1) : 0.0);
  }
  for (std::size_t b = 0; b <= n_bs; ++b) code.push_back(static_cast<int>(b) == s.last_bs ? 1.0 : 0.0);
  return code;
}

inline std::size_t encoding_size(const ScenarioSpec& spec) { return 2 * spec.channel.n_bs() + 3; }

/// Layer widths for a Q-network on `spec` with the given hidden layers.
inline std::vector<std::size_t> network_sizes(const ScenarioSpec& spec, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{encoding_size(spec)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_count(spec.params.n_bs, spec.params.h_max));
  return sizes;
}

/// A stored experience with its encodings and the feasibility mask of the
/// next state, so replay never re-derives them.
struct DqnSample {
  Transition transition;
  std::size_t action = 0;  // action index
  std::vector<double> state_code;
  std::vector<double> next_code;
  std::vector<std::uint8_t> next_mask;
};

inline DqnSample make_sample(const Transition& t, const ScenarioSpec& spec) {
  return {t, action_index(t.action, spec.params.h_max), encode_state(t.state, spec), encode_state(t.next_state, spec),
          feasibility_mask(t.next_state, spec)};
}

/// Lowest feasible index minimizing `q` (a column of Q values).
template <class Column>
std::size_t masked_argmin(const Column& q, std::span<const std::uint8_t> mask) {
  std::size_t best = mask.size();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && (best == mask.size() || q(static_cast<Eigen::Index>(i)) < q(static_cast<Eigen::Index>(best))))
      best = i;
  if (best == mask.size()) throw std::logic_error("no feasible action in mask");
  return best;
}

template <class Scalar>
typename QNetwork<Scalar>::Vector to_vector(const std::vector<double>& code) {
  typename QNetwork<Scalar>::Vector v(static_cast<Eigen::Index>(code.size()));
  for (std::size_t i = 0; i < code.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<Scalar>(code[i]);
  return v;
}

/// (1 - gamma) p + gamma Q(x', argmin_{y'} Q(x', y'; target); online). The
/// argmin runs over feasible actions of x' under the target weights and
/// the value is read from the online weights. `cost_scale` rescales p into
/// the units the networks are trained in.
template <class Scalar>
double td_target(const DqnSample& sample, const QNetwork<Scalar>& online, const QNetwork<Scalar>& target,
                 double gamma, double cost_scale = 1.0) {
  const auto x = to_vector<Scalar>(sample.next_code);
  const auto q_target = target.forward_one(x);
  const auto q_online = online.forward_one(x);
  const auto a = masked_argmin(q_target, sample.next_mask);
  return (1.0 - gamma) * cost_scale * sample.transition.cost +
         gamma * static_cast<double>(q_online(static_cast<Eigen::Index>(a)));
}

template <class Scalar>
struct LossGradient {
  double loss = 0.0;
  QNetwork<Scalar> gradient;
};

/// Mean squared TD error over the batch and its exact gradient with
/// respect to the online weights at the taken actions; targets are
/// treated as constants.
template <class Scalar>
LossGradient<Scalar> loss_and_gradient(std::span<const DqnSample* const> batch, const QNetwork<Scalar>& online,
                                       const QNetwork<Scalar>& target, double gamma, double cost_scale = 1.0) {
  using Matrix = typename QNetwork<Scalar>::Matrix;
  if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  if (!online.same_shape(target)) throw std::invalid_argument("loss_and_gradient: network shapes differ");
  const auto in = static_cast<Eigen::Index>(online.input_dim());
  const auto bsz = static_cast<Eigen::Index>(batch.size());

  Matrix x(in, bsz), x_next(in, bsz);
  for (Eigen::Index i = 0; i < bsz; ++i) {
    const auto& s = *batch[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(s.state_code.size()) != in || static_cast<Eigen::Index>(s.next_code.size()) != in)
      throw std::invalid_argument("loss_and_gradient: encoding length does not match the network input");
    for (Eigen::Index r = 0; r < in; ++r) {
      x(r, i) = static_cast<Scalar>(s.state_code[static_cast<std::size_t>(r)]);
      x_next(r, i) = static_cast<Scalar>(s.next_code[static_cast<std::size_t>(r)]);
    }
  }

  const Matrix q_target_next = target.forward(x_next);
  const Matrix q_online_next = online.forward(x_next);
  std::vector<double> y(batch.size());
  for (Eigen::Index i = 0; i < bsz; ++i) {
    const auto& s = *batch[static_cast<std::size_t>(i)];
    const auto a = masked_argmin(q_target_next.col(i), s.next_mask);
    y[static_cast<std::size_t>(i)] = (1.0 - gamma) * cost_scale * s.transition.cost +
                                     gamma * static_cast<double>(q_online_next(static_cast<Eigen::Index>(a), i));
  }

  // Forward pass keeping pre-activations for the backward pass.
  const auto& layers = online.layers();
  const std::size_t depth = layers.size();
  std::vector<Matrix> acts(depth + 1), pre(depth);
  acts[0] = x;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = (layers[l].weight * acts[l]).colwise() + layers[l].bias;
    acts[l + 1] = l + 1 < depth ? Matrix(pre[l].cwiseMax(Scalar(0))) : pre[l];
  }

  LossGradient<Scalar> out{0.0, QNetwork<Scalar>(online.sizes())};
  Matrix delta = Matrix::Zero(acts[depth].rows(), bsz);
  const double inv_b = 1.0 / static_cast<double>(bsz);
  for (Eigen::Index i = 0; i < bsz; ++i) {
    const auto a = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(i)]->action);
    const double err = y[static_cast<std::size_t>(i)] - static_cast<double>(acts[depth](a, i));
    out.loss += err * err * inv_b;
    delta(a, i) = static_cast<Scalar>(-2.0 * err * inv_b);
  }

  for (std::size_t l = depth; l-- > 0;) {
    auto& g = out.gradient.layers()[l];
    g.weight.noalias() = delta * acts[l].transpose();
    g.bias = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = layers[l].weight.transpose() * delta;
      delta = back.cwiseProduct((pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }
  return out;
}

enum class OptimizerKind { Sgd, Adam };

struct DqnConfig {
  std::vector<std::size_t> hidden = {128};
  std::uint64_t epochs = 100'000;
  std::size_t replay_capacity = 5000;  // U
  std::size_t batch_size = 100;        // S
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double learning_rate = 3e-2;
  std::uint64_t target_sync = 100;  // C; 1 syncs every epoch
  double epsilon_start = 1.0;
  double epsilon_end = 0.02;
  std::uint64_t epsilon_anneal_epochs = 10'000;  // 0: constant epsilon_end
  double cost_scale = 30.0;  // Q targets of order 0.1 for the default scenario
  double divergence_factor = 1e6;
  std::uint64_t seed = 1;
};

struct DqnResult {
  QNetwork<float> online;
  std::vector<MetricsRow> metrics;
  std::uint64_t epochs_run = 0;
  std::uint64_t updates = 0;
  std::uint64_t target_syncs = 0;
  bool diverged = false;
  std::string report;
};

inline double epsilon_at(const DqnConfig& cfg, std::uint64_t epoch) {
  if (cfg.epsilon_anneal_epochs == 0 || epoch >= cfg.epsilon_anneal_epochs) return cfg.epsilon_end;
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * static_cast<double>(epoch) /
                                 static_cast<double>(cfg.epsilon_anneal_epochs);
}

template <class Scalar>
Action dqn_greedy_action(const QNetwork<Scalar>& net, const NetworkState& s, const ScenarioSpec& spec) {
  const auto q = net.forward_one(to_vector<Scalar>(encode_state(s, spec)));
  const auto mask = feasibility_mask(s, spec);
  return action_from_index(masked_argmin(q, mask), spec.params.h_max);
}

/// Observer called after every epoch; useful for invariant checks in tests.
struct DqnEpochView {
  std::uint64_t epoch = 0;
  const Transition* transition = nullptr;
  const QNetwork<float>* online = nullptr;
  const QNetwork<float>* target = nullptr;
  bool synced = false;
  bool updated = false;
};

template <class Observer>
DqnResult train_dqn(const ScenarioSpec& spec, const DqnConfig& cfg, Observer&& observe) {
  if (cfg.replay_capacity < cfg.batch_size)
    throw std::invalid_argument("train_dqn: replay capacity must be at least the mini-batch size");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_dqn: mini-batch size must be positive");

  Rng init_rng(cfg.seed, 10);
  DqnResult r;
  r.online = QNetwork<float>::random(network_sizes(spec, cfg.hidden), init_rng);
  QNetwork<float> target = r.online;
  Adam<float> adam(r.online);

  Environment env(spec, Rng(cfg.seed, 11));
  Rng explore(cfg.seed, 12);
  Rng replay_rng(cfg.seed, 13);
  ReplayMemory<DqnSample> memory(cfg.replay_capacity);
  MetricsRecorder recorder;
  std::vector<const DqnSample*> batch(cfg.batch_size);
  double first_loss = -1.0;

  for (std::uint64_t k = 0; k < cfg.epochs; ++k) {
    const double eps = epsilon_at(cfg, k);
    const auto& x = env.state();
    const auto mask = feasibility_mask(x, spec);
    Action a;
    if (explore.uniform() < eps) {
      std::vector<std::size_t> feas;
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) feas.push_back(i);
      a = action_from_index(feas[explore.below(feas.size())], spec.params.h_max);
    } else {
      const auto q = r.online.forward_one(to_vector<float>(encode_state(x, spec)));
      a = action_from_index(masked_argmin(q, mask), spec.params.h_max);
    }

    const auto step = env.step(a);
    memory.push(make_sample(step.transition, spec));

    double loss = std::numeric_limits<double>::quiet_NaN();
    bool updated = false;
    if (memory.size() >= cfg.batch_size) {
      const auto idx = memory.sample_indices(cfg.batch_size, replay_rng);
      for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &memory[idx[i]];
      auto lg = loss_and_gradient<float>(batch, r.online, target, spec.params.discount, cfg.cost_scale);
      loss = lg.loss;
      if (cfg.optimizer == OptimizerKind::Adam) adam.step(r.online, lg.gradient, cfg.learning_rate);
      else sgd_step(r.online, lg.gradient, cfg.learning_rate);
      updated = true;
      ++r.updates;
      if (first_loss < 0.0 && loss > 0.0) first_loss = loss;
    }

    bool synced = false;
    if (cfg.target_sync > 0 && (k + 1) % cfg.target_sync == 0) {
      target = r.online;
      synced = true;
      ++r.target_syncs;
    }

    recorder.record(step.cost, loss, eps);
    r.epochs_run = k + 1;
    observe(DqnEpochView{k + 1, &step.transition, &r.online, &target, synced, updated});

    if (updated && (!std::isfinite(loss) || (first_loss > 0.0 && loss > cfg.divergence_factor * first_loss) ||
                    !r.online.all_finite())) {
      r.diverged = true;
      r.report = "training diverged at epoch " + std::to_string(k + 1) + ": loss " + std::to_string(loss) +
                 " vs first loss " + std::to_string(first_loss);
      break;
    }
  }
  r.metrics = recorder.take();
  return r;
}

inline DqnResult train_dqn(const ScenarioSpec& spec, const DqnConfig& cfg) {
  return train_dqn(spec, cfg, [](const DqnEpochView&) {});
}

}  // namespace mecoff
