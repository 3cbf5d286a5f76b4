#pragma once

// Synchronous threshold recall on a trained kernel Hopfield network.
//
// Neuron i sees the field h_i = sum_nu alpha[nu][i] K(s, xi_nu) and moves to
// sign(h_i); a zero field keeps the current value. This is the maximum-
// probability decision of the logistic model (p > 1/2 iff h > 0).

#include <algorithm>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "ridge/error.hpp"
#include "ridge/kernel_core.hpp"
#include "ridge/klr.hpp"

namespace ridge {

inline double overlap(const State& state, const State& pattern) {
  if (state.size() != pattern.size()) throw DimensionError("overlap: length mismatch");
  return static_cast<double>(state.dot(pattern)) / static_cast<double>(state.size());
}

/// Kernel similarities between a probe and every stored pattern.
inline Eigen::VectorXd kernel_row(const State& state, const PatternSet& patterns, const KernelConfig& kcfg) {
  if (state.size() != patterns.num_neurons())
    throw DimensionError("probe length " + std::to_string(state.size()) + " does not match N = " +
                         std::to_string(patterns.num_neurons()));
  const Eigen::VectorXi inner = patterns.matrix() * state;
  const double n = patterns.num_neurons();
  return (-kcfg.gamma * 2.0 * (n - inner.cast<double>().array())).exp().matrix();
}

inline Eigen::VectorXd local_field(const State& state, const PatternSet& patterns, const DualWeights& weights,
                                   const KernelConfig& kcfg) {
  if (weights.num_patterns() != patterns.num_patterns() || weights.num_neurons() != patterns.num_neurons())
    throw DimensionError("local_field: weights do not match patterns");
  return weights.alpha.transpose() * kernel_row(state, patterns, kcfg);
}

struct StepResult {
  State state;
  int changed = 0;
};

inline StepResult step(const State& state, const PatternSet& patterns, const DualWeights& weights,
                       const KernelConfig& kcfg) {
  const Eigen::VectorXd h = local_field(state, patterns, weights, kcfg);
  StepResult out{state, 0};
  for (int i = 0; i < h.size(); ++i) {
    const int next = h[i] > 0.0 ? 1 : (h[i] < 0.0 ? -1 : state[i]);
    if (next != state[i]) {
      out.state[i] = next;
      ++out.changed;
    }
  }
  return out;
}

struct RecallResult {
  State final_state;
  double overlap = 0.0;
  bool converged = false;
  int steps = 0;
  bool success = false;
};

inline constexpr double kDefaultSuccessThreshold = 0.95;

/// Iterates step() until a fixed point, a 2-cycle, or max_steps updates.
/// On a 2-cycle the state of the pair with the higher overlap is reported and
/// converged is false.
inline RecallResult recall(const State& cue, int target_index, const PatternSet& patterns,
                           const DualWeights& weights, const KernelConfig& kcfg, int max_steps,
                           double success_threshold = kDefaultSuccessThreshold) {
  if (max_steps < 1) throw ArgumentError("max_steps must be >= 1");
  if (!(success_threshold > 0.0 && success_threshold <= 1.0))
    throw ArgumentError("success_threshold must lie in (0, 1]");
  if (target_index < 0 || target_index >= patterns.num_patterns())
    throw ArgumentError("target index out of range");
  const State target = patterns.pattern(target_index);

  RecallResult r;
  State previous;
  State current = cue;
  for (r.steps = 1; r.steps <= max_steps; ++r.steps) {
    StepResult next = step(current, patterns, weights, kcfg);
    if (next.changed == 0) {
      r.converged = true;
      break;
    }
    if (previous.size() == next.state.size() && next.state == previous) {
      if (overlap(current, target) > overlap(next.state, target)) next.state = current;
      current = std::move(next.state);
      break;
    }
    previous = std::move(current);
    current = std::move(next.state);
  }
  r.steps = std::min(r.steps, max_steps);
  r.final_state = std::move(current);
  r.overlap = overlap(r.final_state, target);
  r.success = r.overlap >= success_threshold;
  return r;
}

struct RecallTrial {
  int trial = 0;
  int target = 0;
  double flip_fraction = 0.0;
  RecallResult result;
};

inline void write_recall_csv(std::ostream& os, const std::vector<RecallTrial>& trials) {
  os << "trial,target,flip_fraction,steps,converged,overlap,success\n";
  for (const auto& t : trials)
    os << t.trial << ',' << t.target << ',' << format_double(t.flip_fraction) << ',' << t.result.steps << ','
       << (t.result.converged ? 1 : 0) << ',' << format_double(t.result.overlap) << ','
       << (t.result.success ? 1 : 0) << '\n';
}

}  // namespace ridge
