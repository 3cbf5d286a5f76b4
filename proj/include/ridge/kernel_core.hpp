#pragma once

// Stored patterns, the RBF kernel over bipolar vectors, and Gram matrices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ridge/error.hpp"
#include "ridge/rng.hpp"

namespace ridge {

/// A network state or stored pattern: entries are exactly -1 or +1.
using State = Eigen::VectorXi;
using PatternMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool is_bipolar(const State& s) {
  return (s.array() == 1 || s.array() == -1).all();
}

/// P stored bipolar patterns of dimension N, one per row.
class PatternSet {
 public:
  static PatternSet from_matrix(PatternMatrix patterns, std::uint64_t seed) {
    if (patterns.rows() < 1 || patterns.cols() < 1)
      throw ArgumentError("pattern set needs P >= 1 and N >= 1");
    if (!(patterns.array() == 1 || patterns.array() == -1).all())
      throw ArgumentError("pattern entries must be -1 or +1");
    return PatternSet(std::move(patterns), seed);
  }

  int num_patterns() const noexcept { return static_cast<int>(patterns_.rows()); }
  int num_neurons() const noexcept { return static_cast<int>(patterns_.cols()); }
  std::uint64_t seed() const noexcept { return seed_; }
  const PatternMatrix& matrix() const noexcept { return patterns_; }
  State pattern(int mu) const { return patterns_.row(mu).transpose(); }

  friend bool operator==(const PatternSet& a, const PatternSet& b) {
    return a.seed_ == b.seed_ && a.patterns_.rows() == b.patterns_.rows() &&
           a.patterns_.cols() == b.patterns_.cols() && a.patterns_ == b.patterns_;
  }

 private:
  PatternSet(PatternMatrix p, std::uint64_t seed) : patterns_(std::move(p)), seed_(seed) {}

  PatternMatrix patterns_;
  std::uint64_t seed_;
};

enum class KernelKind { rbf };

/// K(x, y) = exp(-gamma * ||x - y||^2) on raw +-1 vectors, so ||x - y||^2 = 4 * Hamming(x, y).
struct KernelConfig {
  KernelKind kind = KernelKind::rbf;
  double gamma = 0.01;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw ArgumentError("gamma must be positive and finite");
  }
};

inline double kernel_eval(const State& x, const State& y, const KernelConfig& config) {
  if (x.size() != y.size())
    throw DimensionError("kernel_eval: vectors of length " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  if (!is_bipolar(x) || !is_bipolar(y)) throw ArgumentError("kernel_eval: entries must be -1 or +1");
  config.validate();
  const double dist_sq = static_cast<double>((x - y).squaredNorm());
  return std::exp(-config.gamma * dist_sq);
}

/// Symmetric positive-semidefinite P x P kernel matrix over stored patterns.
class GramMatrix {
 public:
  /// Wraps an arbitrary square symmetric matrix. Used for analytic test fixtures
  /// and for matrices built by gram().
  static GramMatrix from_values(Eigen::MatrixXd values, double gamma) {
    if (values.rows() != values.cols() || values.rows() < 1)
      throw DimensionError("Gram matrix must be square and nonempty");
    if (!values.allFinite()) throw NumericError("Gram matrix has non-finite entries");
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    if ((values - values.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ArgumentError("Gram matrix must be symmetric");
    Eigen::MatrixXd sym = 0.5 * (values + values.transpose());
    return GramMatrix(std::move(sym), gamma);
  }

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  double gamma() const noexcept { return gamma_; }
  int size() const noexcept { return static_cast<int>(values_.rows()); }
  double operator()(int mu, int nu) const { return values_(mu, nu); }

 private:
  GramMatrix(Eigen::MatrixXd v, double gamma) : values_(std::move(v)), gamma_(gamma) {}

  Eigen::MatrixXd values_;
  double gamma_;
};

/// K[mu][nu] = exp(-gamma * 2 * (N - <xi_mu, xi_nu>)). The integer inner products
/// make the result exactly symmetric with an exact unit diagonal.
inline GramMatrix gram(const PatternSet& patterns, const KernelConfig& config) {
  config.validate();
  const PatternMatrix& x = patterns.matrix();
  const Eigen::MatrixXi inner = x * x.transpose();
  const double n = patterns.num_neurons();
  Eigen::MatrixXd k = (2.0 * (n - inner.cast<double>().array())).matrix();
  k = (-config.gamma * k.array()).exp().matrix();
  return GramMatrix::from_values(std::move(k), config.gamma);
}

/// Entries are the top bit of successive std::mt19937_64 draws seeded with
/// `seed`, row-major: 1 -> +1, 0 -> -1.
inline PatternSet generate_patterns(int num_patterns, int num_neurons, std::uint64_t seed) {
  if (num_patterns < 1 || num_neurons < 1)
    throw ArgumentError("generate_patterns: P and N must be >= 1");
  Engine eng(seed);
  PatternMatrix m(num_patterns, num_neurons);
  for (int mu = 0; mu < num_patterns; ++mu)
    for (int i = 0; i < num_neurons; ++i) m(mu, i) = (eng() >> 63) ? 1 : -1;
  return PatternSet::from_matrix(std::move(m), seed);
}

/// Number of positions corrupt() flips for a vector of length n.
inline int flip_count(double flip_fraction, int n) {
  return static_cast<int>(std::lround(flip_fraction * n));
}

/// Flips exactly round(flip_fraction * N) distinct positions. The positions depend
/// only on (N, flip_fraction, seed): a partial Fisher-Yates shuffle driven by
/// std::mt19937_64(seed).
inline State corrupt(const State& pattern, double flip_fraction, std::uint64_t seed) {
  if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0))
    throw ArgumentError("flip_fraction must lie in [0, 1]");
  const int n = static_cast<int>(pattern.size());
  const int flips = flip_count(flip_fraction, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Engine eng(seed);
  State out = pattern;
  for (int j = 0; j < flips; ++j) {
    const auto pick = j + static_cast<int>(uniform_below(eng, static_cast<std::uint64_t>(n - j)));
    std::swap(order[j], order[pick]);
    out[order[j]] = -out[order[j]];
  }
  return out;
}

// Text format: header "P N seed", then P lines of N space-separated +-1 integers.

inline void write_patterns(std::ostream& os, const PatternSet& ps) {
  os << ps.num_patterns() << ' ' << ps.num_neurons() << ' ' << ps.seed() << '\n';
  for (int mu = 0; mu < ps.num_patterns(); ++mu) {
    for (int i = 0; i < ps.num_neurons(); ++i) {
      if (i) os << ' ';
      os << ps.matrix()(mu, i);
    }
    os << '\n';
  }
}

inline PatternSet read_patterns(std::istream& is) {
  std::string line;
  int line_no = 1;
  if (!std::getline(is, line)) throw ConfigError("pattern file is empty", 1);
  std::istringstream header(line);
  long long p = 0, n = 0;
  std::uint64_t seed = 0;
  if (!(header >> p >> n >> seed) || p < 1 || n < 1)
    throw ConfigError("pattern header must be 'P N seed' with P, N >= 1", line_no);
  PatternMatrix m(p, n);
  for (long long mu = 0; mu < p; ++mu) {
    ++line_no;
    if (!std::getline(is, line)) throw ConfigError("missing pattern row", line_no);
    std::istringstream row(line);
    for (long long i = 0; i < n; ++i) {
      int v = 0;
      if (!(row >> v) || (v != 1 && v != -1))
        throw ConfigError("pattern entries must be -1 or +1", line_no);
      m(mu, i) = v;
    }
    std::string extra;
    if (row >> extra) throw ConfigError("too many entries in pattern row", line_no);
  }
  return PatternSet::from_matrix(std::move(m), seed);
}

}  // namespace ridge
