#pragma once

// Fisher-information geometry of one neuron's dual weights.
//
// G = K D K with D = diag(p (1 - p)); no 1/P averaging, so an averaged
// convention would divide every eigenvalue by P. The natural gradient is the
// spectral pseudo-inverse of G applied to the Euclidean gradient, restricted to
// modes above rel_cutoff * lambda_1.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ridge/error.hpp"
#include "ridge/kernel_core.hpp"
#include "ridge/klr.hpp"

namespace ridge {

inline constexpr double kDefaultRelCutoff = 1e-10;

struct FisherMatrix {
  Eigen::MatrixXd values;
  int neuron_index = 0;
  double source_gamma = 0.0;

  int size() const noexcept { return static_cast<int>(values.rows()); }
};

inline FisherMatrix fisher_matrix(const Eigen::VectorXd& alpha_col, const GramMatrix& k,
                                  int neuron_index = 0) {
  detail::check_dims(alpha_col, k, "fisher_matrix");
  const Eigen::MatrixXd& km = k.values();
  const Eigen::VectorXd h = km * alpha_col;
  const Eigen::VectorXd d = h.unaryExpr([](double v) { return bernoulli_variance(v); });
  Eigen::MatrixXd g = km * d.asDiagonal() * km;
  g = 0.5 * (g + g.transpose()).eval();
  return FisherMatrix{std::move(g), neuron_index, k.gamma()};
}

/// Expectation of the score outer product, enumerated outcome by outcome.
///
/// For pattern mu the Bernoulli log-likelihood log p(s | alpha) with s in {0, 1}
/// has score (s - p_mu) k_mu, where k_mu is column mu of K. Both outcomes are
/// weighted by their probabilities and the patterns are summed uniformly.
inline FisherMatrix fim_empirical_oracle(const Eigen::VectorXd& alpha_col, const GramMatrix& k,
                                         int neuron_index = 0) {
  detail::check_dims(alpha_col, k, "fim_empirical_oracle");
  const int n = k.size();
  const Eigen::VectorXd p = predict_probs(alpha_col, k);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int mu = 0; mu < n; ++mu) {
    const Eigen::VectorXd k_mu = k.values().col(mu);
    for (int s = 0; s <= 1; ++s) {
      const double prob = s == 1 ? p[mu] : 1.0 - p[mu];
      const Eigen::VectorXd score = (s - p[mu]) * k_mu;
      g.noalias() += prob * score * score.transpose();
    }
  }
  return FisherMatrix{std::move(g), neuron_index, k.gamma()};
}

/// (sum lambda)^2 / sum lambda^2 over a nonnegative spectrum.
inline double effective_dimension(const Eigen::VectorXd& eigenvalues) {
  if ((eigenvalues.array() < 0.0).any()) throw ArgumentError("effective_dimension: negative eigenvalue");
  const double sum = eigenvalues.sum();
  const double sum_sq = eigenvalues.squaredNorm();
  if (!(sum_sq > 0.0)) throw DegenerateSpectrumError("effective_dimension: all-zero spectrum");
  return sum * sum / sum_sq;
}

struct FisherSpectrum {
  Eigen::VectorXd eigenvalues;   // descending, clamped at 0
  Eigen::MatrixXd eigenvectors;  // column k pairs with eigenvalues[k]
  double lambda_max = 0.0;
  double d_eff = 0.0;       // 0 when degenerate
  double ratio_2_1 = 0.0;   // lambda_2 / lambda_1, 0 for P = 1
  double ratio_tail = 0.0;  // lambda_P / lambda_1
  bool degenerate = false;  // no strictly positive eigenvalue

  int size() const noexcept { return static_cast<int>(eigenvalues.size()); }
};

inline FisherSpectrum spectrum(const FisherMatrix& g) {
  if (!g.values.allFinite()) throw NumericError("spectrum: Fisher matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.values);
  if (es.info() != Eigen::Success) throw NumericError("spectrum: eigendecomposition failed");
  const int n = g.size();
  FisherSpectrum out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors = es.eigenvectors().rowwise().reverse();
  const double top = out.eigenvalues[0];
  if (!(top > 0.0)) {
    out.eigenvalues.setZero();
    out.degenerate = true;
    return out;
  }
  if (out.eigenvalues[n - 1] < -1e-10 * top)
    throw NumericError("spectrum: Fisher matrix is not positive semidefinite");
  out.eigenvalues = out.eigenvalues.cwiseMax(0.0);
  out.lambda_max = top;
  out.d_eff = effective_dimension(out.eigenvalues);
  out.ratio_2_1 = n > 1 ? out.eigenvalues[1] / top : 0.0;
  out.ratio_tail = out.eigenvalues[n - 1] / top;
  return out;
}

struct NaturalGradient {
  Eigen::VectorXd direction;
  int retained_modes = 0;
};

/// sum over modes with lambda_k > rel_cutoff * lambda_1 of lambda_k^-1 (v_k . grad) v_k.
inline NaturalGradient natural_gradient(const Eigen::VectorXd& grad, const FisherSpectrum& spec,
                                        double rel_cutoff = kDefaultRelCutoff) {
  if (grad.size() != spec.size()) throw DimensionError("natural_gradient: gradient/spectrum size mismatch");
  if (!(rel_cutoff > 0.0 && rel_cutoff < 1.0)) throw ArgumentError("rel_cutoff must lie in (0, 1)");
  if (spec.degenerate || !(spec.lambda_max > 0.0))
    throw DegenerateSpectrumError("natural_gradient: lambda_1 is zero");
  const double floor = rel_cutoff * spec.lambda_max;
  NaturalGradient out{Eigen::VectorXd::Zero(grad.size()), 0};
  for (int k = 0; k < spec.size() && spec.eigenvalues[k] > floor; ++k) {
    const auto v = spec.eigenvectors.col(k);
    out.direction += (v.dot(grad) / spec.eigenvalues[k]) * v;
    ++out.retained_modes;
  }
  return out;
}

struct GradientReport {
  double euclid_norm_sq = 0.0;   // |grad L|^2
  double riemann_norm_sq = 0.0;  // grad L^T G^+ grad L over retained modes
  double rank1_residual = 0.0;   // |grad L - lambda_1 (v_1 . nat) v_1| / max(|grad L|, 1e-30)
  double nat_grad_norm = 0.0;
  double cutoff_used = kDefaultRelCutoff;
  int retained_modes = 0;
  bool degenerate = false;
};

/// Norms of a given gradient under the metric described by `spec`. With a
/// degenerate spectrum the natural gradient is taken as zero.
inline GradientReport gradient_report(const Eigen::VectorXd& grad, const FisherSpectrum& spec,
                                      double rel_cutoff = kDefaultRelCutoff) {
  GradientReport r;
  r.cutoff_used = rel_cutoff;
  r.euclid_norm_sq = grad.squaredNorm();
  const double grad_norm = std::sqrt(r.euclid_norm_sq);
  if (spec.degenerate) {
    if (!(rel_cutoff > 0.0 && rel_cutoff < 1.0)) throw ArgumentError("rel_cutoff must lie in (0, 1)");
    r.degenerate = true;
    r.rank1_residual = grad_norm / std::max(grad_norm, 1e-30);
    return r;
  }
  const NaturalGradient nat = natural_gradient(grad, spec, rel_cutoff);
  r.retained_modes = nat.retained_modes;
  r.nat_grad_norm = nat.direction.norm();
  for (int k = 0; k < nat.retained_modes; ++k) {
    const double c = spec.eigenvectors.col(k).dot(grad);
    r.riemann_norm_sq += c * c / spec.eigenvalues[k];
  }
  const auto v1 = spec.eigenvectors.col(0);
  const Eigen::VectorXd amplified = spec.eigenvalues[0] * v1.dot(nat.direction) * v1;
  r.rank1_residual = (grad - amplified).norm() / std::max(grad_norm, 1e-30);
  return r;
}

/// Full pipeline for one neuron: gradient, Fisher matrix, spectrum, norms.
struct NeuronGeometry {
  FisherSpectrum spectrum;
  GradientReport report;
};

inline NeuronGeometry analyze_neuron(const Eigen::VectorXd& alpha_col, const GramMatrix& k,
                                     const NeuronTargets& targets, double lambda,
                                     double rel_cutoff = kDefaultRelCutoff, int neuron_index = 0) {
  const Eigen::VectorXd grad = loss_gradient(alpha_col, k, targets, lambda);
  FisherSpectrum spec = spectrum(fisher_matrix(alpha_col, k, neuron_index));
  GradientReport report = gradient_report(grad, spec, rel_cutoff);
  return NeuronGeometry{std::move(spec), report};
}

inline GradientReport gradient_report(const Eigen::VectorXd& alpha_col, const GramMatrix& k,
                                      const NeuronTargets& targets, double lambda,
                                      double rel_cutoff = kDefaultRelCutoff) {
  return analyze_neuron(alpha_col, k, targets, lambda, rel_cutoff).report;
}

/// Geometry of every neuron of a trained network, in neuron order.
inline std::vector<NeuronGeometry> analyze_network(const PatternSet& patterns, const GramMatrix& k,
                                                   const DualWeights& w,
                                                   double rel_cutoff = kDefaultRelCutoff) {
  if (w.num_patterns() != patterns.num_patterns() || w.num_neurons() != patterns.num_neurons())
    throw DimensionError("analyze_network: weights do not match patterns");
  std::vector<NeuronGeometry> out;
  out.reserve(w.num_neurons());
  for (int i = 0; i < w.num_neurons(); ++i)
    out.push_back(analyze_neuron(w.column(i), k, NeuronTargets::for_neuron(patterns, i), w.lambda,
                                 rel_cutoff, i));
  return out;
}

// CSV exports.

inline void write_spectrum_csv(std::ostream& os, const std::vector<NeuronGeometry>& neurons) {
  os << "neuron,k,lambda_k,lambda_k_over_lambda_1\n";
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    const FisherSpectrum& s = neurons[i].spectrum;
    for (int k = 0; k < s.size(); ++k) {
      const double ratio = s.degenerate ? std::nan("") : s.eigenvalues[k] / s.lambda_max;
      os << i << ',' << (k + 1) << ',' << format_double(s.eigenvalues[k]) << ',' << format_double(ratio)
         << '\n';
    }
  }
}

inline void write_report_csv(std::ostream& os, const std::vector<NeuronGeometry>& neurons) {
  os << "neuron,euclid_norm_sq,riemann_norm_sq,nat_grad_norm,rank1_residual,lambda_max,d_eff,"
        "retained_modes,cutoff\n";
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    const GradientReport& r = neurons[i].report;
    const FisherSpectrum& s = neurons[i].spectrum;
    os << i << ',' << format_double(r.euclid_norm_sq) << ',' << format_double(r.riemann_norm_sq) << ','
       << format_double(r.nat_grad_norm) << ',' << format_double(r.rank1_residual) << ','
       << format_double(s.lambda_max) << ',' << format_double(s.d_eff) << ',' << r.retained_modes << ','
       << format_double(r.cutoff_used) << '\n';
  }
}

}  // namespace ridge
