#pragma once

// Per-neuron kernel logistic regression over dual weights.
//
// For neuron i the field on stored pattern mu is h = (K alpha_i)[mu] and the
// model probability of s_i = +1 is sigmoid(h). Training minimizes the binary
// cross-entropy plus the RKHS ridge penalty (lambda / 2) alpha^T K alpha by
// full-batch gradient descent from alpha = 0.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ridge/error.hpp"
#include "ridge/kernel_core.hpp"

namespace ridge {

/// 1 / (1 + exp(-h)) without overflow for any finite h.
inline double sigmoid(double h) noexcept {
  if (h >= 0.0) return 1.0 / (1.0 + std::exp(-h));
  const double e = std::exp(h);
  return e / (1.0 + e);
}

/// log(1 + exp(h)) without overflow.
inline double softplus(double h) noexcept {
  return std::max(h, 0.0) + std::log1p(std::exp(-std::abs(h)));
}

/// sigmoid(h) * sigmoid(-h), with both factors evaluated stably so the variance
/// stays positive (not rounded to zero) deep in saturation.
inline double bernoulli_variance(double h) noexcept { return sigmoid(h) * sigmoid(-h); }

/// t[mu] = (xi_mu[i] + 1) / 2 for one neuron i.
struct NeuronTargets {
  Eigen::VectorXd t;

  static NeuronTargets from_values(Eigen::VectorXd values) {
    if (!(values.array() == 0.0 || values.array() == 1.0).all())
      throw ArgumentError("targets must be 0 or 1");
    return NeuronTargets{std::move(values)};
  }

  static NeuronTargets for_neuron(const PatternSet& ps, int neuron) {
    if (neuron < 0 || neuron >= ps.num_neurons()) throw ArgumentError("neuron index out of range");
    Eigen::VectorXd t = (ps.matrix().col(neuron).cast<double>().array() + 1.0) / 2.0;
    return NeuronTargets{std::move(t)};
  }

  int size() const noexcept { return static_cast<int>(t.size()); }
};

/// All neurons' targets as a P x N matrix of {0, 1}.
inline Eigen::MatrixXd target_matrix(const PatternSet& ps) {
  return (ps.matrix().cast<double>().array() + 1.0) / 2.0;
}

namespace detail {
inline void check_dims(const Eigen::VectorXd& alpha_col, const GramMatrix& k, const char* who) {
  if (alpha_col.size() != k.size())
    throw DimensionError(std::string(who) + ": alpha has length " + std::to_string(alpha_col.size()) +
                         " but K is " + std::to_string(k.size()) + "x" + std::to_string(k.size()));
}
inline void check_dims(const Eigen::VectorXd& alpha_col, const GramMatrix& k,
                       const NeuronTargets& targets, const char* who) {
  check_dims(alpha_col, k, who);
  if (targets.size() != k.size())
    throw DimensionError(std::string(who) + ": targets have length " + std::to_string(targets.size()));
}
}  // namespace detail

inline Eigen::VectorXd predict_probs(const Eigen::VectorXd& alpha_col, const GramMatrix& k) {
  detail::check_dims(alpha_col, k, "predict_probs");
  const Eigen::VectorXd h = k.values() * alpha_col;
  return h.unaryExpr([](double v) { return sigmoid(v); });
}

/// -sum_mu [t log p + (1 - t) log(1 - p)] + (lambda / 2) alpha^T K alpha,
/// evaluated as sum_mu [softplus(h) - t h] so saturated probabilities never hit log(0).
inline double loss(const Eigen::VectorXd& alpha_col, const GramMatrix& k,
                   const NeuronTargets& targets, double lambda) {
  detail::check_dims(alpha_col, k, targets, "loss");
  if (lambda < 0.0) throw ArgumentError("lambda must be >= 0");
  const Eigen::VectorXd h = k.values() * alpha_col;
  double total = 0.0;
  for (int mu = 0; mu < h.size(); ++mu) total += softplus(h[mu]) - targets.t[mu] * h[mu];
  return total + 0.5 * lambda * alpha_col.dot(h);
}

/// K (p - t) + lambda K alpha.
inline Eigen::VectorXd loss_gradient(const Eigen::VectorXd& alpha_col, const GramMatrix& k,
                                     const NeuronTargets& targets, double lambda) {
  detail::check_dims(alpha_col, k, targets, "loss_gradient");
  if (lambda < 0.0) throw ArgumentError("lambda must be >= 0");
  const Eigen::VectorXd p = predict_probs(alpha_col, k);
  return k.values() * (p - targets.t + lambda * alpha_col);
}

enum class StepRule {
  fixed,      // step = learning_rate
  lipschitz,  // step = learning_rate / (0.25 lambda_max(K)^2 + lambda lambda_max(K))
};

struct TrainConfig {
  double lambda = 1e-4;
  double learning_rate = 0.1;
  long max_epochs = 100000;
  double grad_tol = 1e-6;
  StepRule step_rule = StepRule::fixed;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be >= 0 and finite");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ArgumentError("learning_rate must be positive and finite");
    if (max_epochs < 1) throw ArgumentError("max_epochs must be >= 1");
    if (!(grad_tol > 0.0)) throw ArgumentError("grad_tol must be positive");
  }
};

/// Upper bound on the loss Hessian K D K + lambda K over all alpha (D <= 1/4).
inline double curvature_bound(const GramMatrix& k, double lambda) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.values(), Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  return 0.25 * top * top + lambda * top;
}

/// The step size a run with this configuration uses on Gram matrix k.
inline double step_size(const GramMatrix& k, const TrainConfig& cfg) {
  if (cfg.step_rule == StepRule::fixed) return cfg.learning_rate;
  return cfg.learning_rate / curvature_bound(k, cfg.lambda);
}

/// alpha in R^{P x N}; column i holds neuron i's dual weights.
struct DualWeights {
  Eigen::MatrixXd alpha;
  double gamma = 0.0;
  double lambda = 0.0;
  long trained_epochs = 0;

  int num_patterns() const noexcept { return static_cast<int>(alpha.rows()); }
  int num_neurons() const noexcept { return static_cast<int>(alpha.cols()); }
  Eigen::VectorXd column(int neuron) const { return alpha.col(neuron); }
};

namespace detail {
// Per-column sum_mu softplus(h) - t h + (lambda / 2) alpha . h
inline Eigen::RowVectorXd column_losses(const Eigen::MatrixXd& h, const Eigen::MatrixXd& t,
                                        const Eigen::MatrixXd& alpha, double lambda) {
  const Eigen::MatrixXd sp = h.unaryExpr([](double v) { return softplus(v); });
  return (sp.array() - t.array() * h.array() + 0.5 * lambda * alpha.array() * h.array())
      .colwise()
      .sum();
}
}  // namespace detail

/// Full-batch gradient descent on every neuron at once, from alpha = 0.
///
/// Stops when the largest per-neuron gradient norm drops below grad_tol or after
/// max_epochs updates. Throws DivergenceError naming the first offending neuron
/// and epoch if an update produces a non-finite loss or raises a neuron's loss
/// by more than 1e-12.
inline DualWeights train(const PatternSet& patterns, const GramMatrix& k, const TrainConfig& cfg) {
  cfg.validate();
  if (k.size() != patterns.num_patterns())
    throw DimensionError("train: Gram matrix does not match pattern count");
  const Eigen::MatrixXd& km = k.values();
  const Eigen::MatrixXd t = target_matrix(patterns);
  const double eta = step_size(k, cfg);
  const double lambda = cfg.lambda;

  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(patterns.num_patterns(), patterns.num_neurons());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(alpha.rows(), alpha.cols());
  Eigen::RowVectorXd current = detail::column_losses(h, t, alpha, lambda);
  Eigen::MatrixXd residual(alpha.rows(), alpha.cols());
  Eigen::MatrixXd grad(alpha.rows(), alpha.cols());

  long epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    residual = h.unaryExpr([](double v) { return sigmoid(v); }) - t + lambda * alpha;
    grad.noalias() = km * residual;
    if (grad.colwise().norm().maxCoeff() < cfg.grad_tol) break;
    alpha -= eta * grad;
    h.noalias() = km * alpha;
    const Eigen::RowVectorXd next = detail::column_losses(h, t, alpha, lambda);
    for (int i = 0; i < next.size(); ++i) {
      if (!std::isfinite(next[i]))
        throw DivergenceError("training diverged: non-finite loss for neuron " + std::to_string(i) +
                                  " at epoch " + std::to_string(epoch + 1),
                              i, epoch + 1);
      if (next[i] > current[i] + 1e-12)
        throw DivergenceError("training diverged: loss increased for neuron " + std::to_string(i) +
                                  " at epoch " + std::to_string(epoch + 1),
                              i, epoch + 1);
    }
    current = next;
  }
  return DualWeights{std::move(alpha), k.gamma(), lambda, epoch};
}

inline DualWeights train(const PatternSet& patterns, const KernelConfig& kcfg, const TrainConfig& tcfg) {
  return train(patterns, gram(patterns, kcfg), tcfg);
}

// Text format: header "P N gamma lambda epochs", then P lines of N values
// printed as the shortest text that reads back exactly.

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline void write_weights(std::ostream& os, const DualWeights& w) {
  os << w.num_patterns() << ' ' << w.num_neurons() << ' ' << format_double(w.gamma) << ' '
     << format_double(w.lambda) << ' ' << w.trained_epochs << '\n';
  for (int mu = 0; mu < w.num_patterns(); ++mu) {
    for (int i = 0; i < w.num_neurons(); ++i) {
      if (i) os << ' ';
      os << format_double(w.alpha(mu, i));
    }
    os << '\n';
  }
}

inline DualWeights read_weights(std::istream& is) {
  std::string line;
  int line_no = 1;
  if (!std::getline(is, line)) throw ConfigError("weights file is empty", 1);
  std::istringstream header(line);
  long long p = 0, n = 0;
  DualWeights w;
  if (!(header >> p >> n >> w.gamma >> w.lambda >> w.trained_epochs) || p < 1 || n < 1)
    throw ConfigError("weights header must be 'P N gamma lambda epochs'", line_no);
  w.alpha.resize(p, n);
  for (long long mu = 0; mu < p; ++mu) {
    ++line_no;
    if (!std::getline(is, line)) throw ConfigError("missing weights row", line_no);
    std::istringstream row(line);
    for (long long i = 0; i < n; ++i) {
      double v = 0.0;
      if (!(row >> v) || !std::isfinite(v)) throw ConfigError("malformed weight value", line_no);
      w.alpha(mu, i) = v;
    }
  }
  return w;
}

}  // namespace ridge
