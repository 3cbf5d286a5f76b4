#pragma once

// Phase-diagram sweeps over the (gamma, P/N) plane.
//
// Every cell trains `trials_per_cell` independent networks and reports the mean
// over neurons, then over trials, of each geometric metric. Seeds are derived
// from configuration values (not grid positions), so adding or removing axis
// values never changes the other cells:
//
//   pattern seed (trial t) = mix_seed({base_seed, bits(load), t})
//   cell seed              = mix_seed({base_seed, bits(gamma), bits(load)})
//   recall cue seed        = mix_seed({cell seed, t, mu})
//
// Pattern seeds do not depend on gamma: every cell in one load row sees the
// same memories, so differences along a row come from the kernel alone.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ridge/config.hpp"
#include "ridge/dynamics.hpp"
#include "ridge/error.hpp"
#include "ridge/infogeo.hpp"
#include "ridge/kernel_core.hpp"
#include "ridge/klr.hpp"
#include "ridge/rng.hpp"

namespace ridge {

enum class Metric { lambda_max, d_eff, euclid_norm_sq, riemann_norm_sq, rank1_residual, recall_rate };

inline constexpr Metric kAllMetrics[] = {Metric::lambda_max,      Metric::d_eff,
                                         Metric::euclid_norm_sq,  Metric::riemann_norm_sq,
                                         Metric::rank1_residual,  Metric::recall_rate};

inline std::string metric_name(Metric m) {
  switch (m) {
    case Metric::lambda_max: return "lambda_max";
    case Metric::d_eff: return "d_eff";
    case Metric::euclid_norm_sq: return "euclid_norm_sq";
    case Metric::riemann_norm_sq: return "riemann_norm_sq";
    case Metric::rank1_residual: return "rank1_residual";
    case Metric::recall_rate: return "recall_rate";
  }
  return "";
}

inline std::optional<Metric> parse_metric(const std::string& name) {
  for (Metric m : kAllMetrics)
    if (metric_name(m) == name) return m;
  return std::nullopt;
}

struct GridConfig {
  std::vector<double> gamma_values;
  std::vector<double> load_values;
  int num_neurons = 64;
  int trials_per_cell = 3;
  std::uint64_t base_seed = 1;
  TrainConfig train;
  double rel_cutoff = kDefaultRelCutoff;
  std::vector<Metric> metrics{Metric::lambda_max, Metric::d_eff, Metric::euclid_norm_sq,
                              Metric::riemann_norm_sq, Metric::rank1_residual};
  // Metrics rendered on a log10 color scale.
  std::vector<Metric> log10_metrics{Metric::lambda_max, Metric::euclid_norm_sq, Metric::riemann_norm_sq};
  double recall_flip_fraction = 0.1;
  int recall_max_steps = 20;
  double success_threshold = kDefaultSuccessThreshold;

  bool wants(Metric m) const { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); }
  bool log_scaled(Metric m) const {
    return std::find(log10_metrics.begin(), log10_metrics.end(), m) != log10_metrics.end();
  }

  void validate() const {
    if (gamma_values.empty() || load_values.empty()) throw ArgumentError("grid axes must be nonempty");
    for (std::size_t i = 0; i < gamma_values.size(); ++i) {
      if (!(gamma_values[i] > 0.0) || !std::isfinite(gamma_values[i]))
        throw ArgumentError("gamma values must be positive and finite");
      if (i && !(gamma_values[i] > gamma_values[i - 1])) throw ArgumentError("gamma values must ascend");
    }
    for (std::size_t i = 0; i < load_values.size(); ++i) {
      if (!(load_values[i] > 0.0 && load_values[i] <= 1.0)) throw ArgumentError("loads must lie in (0, 1]");
      if (i && !(load_values[i] > load_values[i - 1])) throw ArgumentError("load values must ascend");
    }
    if (num_neurons < 1) throw ArgumentError("num_neurons must be >= 1");
    if (std::lround(load_values.front() * num_neurons) < 1)
      throw ArgumentError("smallest load gives P = 0 for this num_neurons");
    if (trials_per_cell < 1) throw ArgumentError("trials_per_cell must be >= 1");
    if (!(rel_cutoff > 0.0 && rel_cutoff < 1.0)) throw ArgumentError("rel_cutoff must lie in (0, 1)");
    if (!(recall_flip_fraction >= 0.0 && recall_flip_fraction <= 1.0))
      throw ArgumentError("recall_flip_fraction must lie in [0, 1]");
    if (recall_max_steps < 1) throw ArgumentError("recall_max_steps must be >= 1");
    if (!(success_threshold > 0.0 && success_threshold <= 1.0))
      throw ArgumentError("success_threshold must lie in (0, 1]");
    train.validate();
  }
};

inline int patterns_for_load(double load, int num_neurons) {
  return static_cast<int>(std::lround(load * num_neurons));
}

/// One pixel of a phase diagram. Metrics are means over neurons then trials;
/// NaN marks a metric with no defined value (every trial diverged, every
/// neuron degenerate, or recall not requested).
struct SweepCell {
  double gamma = 0.0;
  double load = 0.0;
  int P = 0;
  int N = 0;
  std::uint64_t seed = 0;
  int trials = 0;
  double lambda_max_mean = 0.0;
  double lambda_max_sd = 0.0;
  double d_eff_mean = 0.0;
  double d_eff_sd = 0.0;
  double euclid_norm_sq_mean = 0.0;
  double riemann_norm_sq_mean = 0.0;
  double rank1_residual_mean = 0.0;
  double recall_rate = std::numeric_limits<double>::quiet_NaN();
  // In memory only; not part of the grid CSV.
  double ratio_2_1_mean = 0.0;
  double ratio_tail_mean = 0.0;
  long degenerate_count = 0;  // neuron-trials with an all-zero Fisher spectrum
  long divergence_count = 0;  // trials whose training diverged

  bool flagged() const noexcept { return degenerate_count > 0 || divergence_count > 0; }

  double metric(Metric m) const {
    switch (m) {
      case Metric::lambda_max: return lambda_max_mean;
      case Metric::d_eff: return d_eff_mean;
      case Metric::euclid_norm_sq: return euclid_norm_sq_mean;
      case Metric::riemann_norm_sq: return riemann_norm_sq_mean;
      case Metric::rank1_residual: return rank1_residual_mean;
      case Metric::recall_rate: return recall_rate;
    }
    return std::nan("");
  }
};

inline std::uint64_t cell_seed(std::uint64_t base_seed, double gamma, double load) {
  return mix_seed({base_seed, double_bits(gamma), double_bits(load)});
}

inline std::uint64_t pattern_seed(std::uint64_t base_seed, double load, int trial) {
  return mix_seed({base_seed, double_bits(load), static_cast<std::uint64_t>(trial)});
}

namespace detail {

// Running mean and sample standard deviation over trial-level values.
struct TrialStats {
  std::vector<double> values;
  void add(double v) {
    if (std::isfinite(v)) values.push_back(v);
  }
  double mean() const {
    if (values.empty()) return std::nan("");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  double sd() const {
    if (values.empty()) return std::nan("");
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
  }
};

// Mean over the values accumulated for one trial.
struct NeuronMean {
  double sum = 0.0;
  long count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  double value() const { return count ? sum / static_cast<double>(count) : std::nan(""); }
};

}  // namespace detail

inline SweepCell run_cell(double gamma, double load, const GridConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SweepCell cell;
  cell.gamma = gamma;
  cell.load = load;
  cell.N = cfg.num_neurons;
  cell.P = patterns_for_load(load, cfg.num_neurons);
  cell.seed = seed;
  cell.trials = cfg.trials_per_cell;
  if (cell.P < 1) throw ArgumentError("run_cell: load gives P = 0");
  const KernelConfig kcfg{KernelKind::rbf, gamma};
  kcfg.validate();

  detail::TrialStats lambda_max, d_eff, euclid, riemann, residual, ratio21, ratio_tail;
  long recall_hits = 0, recall_total = 0;

  for (int t = 0; t < cfg.trials_per_cell; ++t) {
    const PatternSet patterns =
        generate_patterns(cell.P, cfg.num_neurons, pattern_seed(cfg.base_seed, load, t));
    const GramMatrix k = gram(patterns, kcfg);
    DualWeights w;
    try {
      w = train(patterns, k, cfg.train);
    } catch (const DivergenceError&) {
      ++cell.divergence_count;
      continue;
    }
    detail::NeuronMean lm, de, eu, ri, res, r21, rt;
    for (const NeuronGeometry& g : analyze_network(patterns, k, w, cfg.rel_cutoff)) {
      lm.add(g.spectrum.lambda_max);
      eu.add(g.report.euclid_norm_sq);
      if (g.spectrum.degenerate) {
        ++cell.degenerate_count;
        continue;
      }
      de.add(g.spectrum.d_eff);
      ri.add(g.report.riemann_norm_sq);
      res.add(g.report.rank1_residual);
      r21.add(g.spectrum.ratio_2_1);
      rt.add(g.spectrum.ratio_tail);
    }
    lambda_max.add(lm.value());
    d_eff.add(de.value());
    euclid.add(eu.value());
    riemann.add(ri.value());
    residual.add(res.value());
    ratio21.add(r21.value());
    ratio_tail.add(rt.value());

    if (cfg.wants(Metric::recall_rate)) {
      for (int mu = 0; mu < cell.P; ++mu) {
        const State cue = corrupt(patterns.pattern(mu), cfg.recall_flip_fraction,
                                  mix_seed({seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(mu)}));
        const RecallResult r = recall(cue, mu, patterns, w, kcfg, cfg.recall_max_steps, cfg.success_threshold);
        recall_hits += r.success ? 1 : 0;
        ++recall_total;
      }
    }
  }

  cell.lambda_max_mean = lambda_max.mean();
  cell.lambda_max_sd = lambda_max.sd();
  cell.d_eff_mean = d_eff.mean();
  cell.d_eff_sd = d_eff.sd();
  cell.euclid_norm_sq_mean = euclid.mean();
  cell.riemann_norm_sq_mean = riemann.mean();
  cell.rank1_residual_mean = residual.mean();
  cell.ratio_2_1_mean = ratio21.mean();
  cell.ratio_tail_mean = ratio_tail.mean();
  if (recall_total > 0) cell.recall_rate = static_cast<double>(recall_hits) / static_cast<double>(recall_total);
  return cell;
}

inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Every (gamma, load) cell, ordered by load then gamma. Cells run on up to
/// `workers` threads; the result does not depend on the thread count.
inline std::vector<SweepCell> run_grid(const GridConfig& cfg, unsigned workers = 1) {
  cfg.validate();
  struct Job {
    double gamma, load;
  };
  std::vector<Job> jobs;
  for (double load : cfg.load_values)
    for (double gamma : cfg.gamma_values) jobs.push_back({gamma, load});

  std::vector<SweepCell> cells(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        cells[j] = run_cell(jobs[j].gamma, jobs[j].load, cfg, cell_seed(cfg.base_seed, jobs[j].gamma, jobs[j].load));
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return cells;
}

// Grid CSV.

inline constexpr const char* kGridCsvHeader =
    "gamma,load,P,N,seed,trials,lambda_max_mean,lambda_max_sd,d_eff_mean,d_eff_sd,"
    "euclid_norm_sq_mean,riemann_norm_sq_mean,rank1_residual_mean,recall_rate,degenerate_count,"
    "divergence_count";

inline void write_grid_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << kGridCsvHeader << '\n';
  for (const SweepCell& c : cells) {
    os << format_double(c.gamma) << ',' << format_double(c.load) << ',' << c.P << ',' << c.N << ',' << c.seed
       << ',' << c.trials << ',' << format_double(c.lambda_max_mean) << ',' << format_double(c.lambda_max_sd)
       << ',' << format_double(c.d_eff_mean) << ',' << format_double(c.d_eff_sd) << ','
       << format_double(c.euclid_norm_sq_mean) << ',' << format_double(c.riemann_norm_sq_mean) << ','
       << format_double(c.rank1_residual_mean) << ',' << format_double(c.recall_rate) << ','
       << c.degenerate_count << ',' << c.divergence_count << '\n';
  }
}

inline std::vector<SweepCell> read_grid_csv(std::istream& is) {
  std::string line;
  int line_no = 1;
  if (!std::getline(is, line)) throw ConfigError("grid CSV is empty", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kGridCsvHeader) throw ConfigError("unexpected grid CSV header", 1);
  std::vector<SweepCell> cells;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
    if (f.size() != 16) throw ConfigError("expected 16 columns", line_no);
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0') throw ConfigError("malformed number '" + s + "'", line_no);
      return v;
    };
    auto integer = [&](const std::string& s) {
      char* end = nullptr;
      const long long v = std::strtoll(s.c_str(), &end, 10);
      if (s.empty() || *end != '\0') throw ConfigError("malformed integer '" + s + "'", line_no);
      return v;
    };
    SweepCell c;
    c.gamma = num(f[0]);
    c.load = num(f[1]);
    c.P = static_cast<int>(integer(f[2]));
    c.N = static_cast<int>(integer(f[3]));
    {
      char* end = nullptr;
      c.seed = std::strtoull(f[4].c_str(), &end, 10);
      if (f[4].empty() || *end != '\0') throw ConfigError("malformed seed", line_no);
    }
    c.trials = static_cast<int>(integer(f[5]));
    c.lambda_max_mean = num(f[6]);
    c.lambda_max_sd = num(f[7]);
    c.d_eff_mean = num(f[8]);
    c.d_eff_sd = num(f[9]);
    c.euclid_norm_sq_mean = num(f[10]);
    c.riemann_norm_sq_mean = num(f[11]);
    c.rank1_residual_mean = num(f[12]);
    c.recall_rate = num(f[13]);
    c.degenerate_count = integer(f[14]);
    c.divergence_count = integer(f[15]);
    cells.push_back(c);
  }
  return cells;
}

// Configuration files.

inline const std::set<std::string>& train_config_keys() {
  static const std::set<std::string> keys{"lambda", "learning_rate", "max_epochs", "grad_tol", "step_rule"};
  return keys;
}

inline TrainConfig train_config_from(const KeyValueConfig& kv) {
  TrainConfig t;
  t.lambda = kv.get_double("lambda", t.lambda);
  kv.require("lambda", t.lambda >= 0.0, "must be >= 0");
  t.learning_rate = kv.get_double("learning_rate", t.learning_rate);
  kv.require("learning_rate", t.learning_rate > 0.0, "must be > 0");
  t.max_epochs = static_cast<long>(kv.get_int("max_epochs", t.max_epochs));
  kv.require("max_epochs", t.max_epochs >= 1, "must be >= 1");
  t.grad_tol = kv.get_double("grad_tol", t.grad_tol);
  kv.require("grad_tol", t.grad_tol > 0.0, "must be > 0");
  const std::string rule = kv.get_string("step_rule", "fixed");
  kv.require("step_rule", rule == "fixed" || rule == "lipschitz", "must be 'fixed' or 'lipschitz'");
  t.step_rule = rule == "fixed" ? StepRule::fixed : StepRule::lipschitz;
  return t;
}

inline const std::set<std::string>& grid_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = train_config_keys();
    k.insert({"gamma_values", "gamma_min", "gamma_max", "gamma_count", "load_values", "load_min", "load_max",
              "load_count", "num_neurons", "trials_per_cell", "base_seed", "rel_cutoff", "metrics",
              "log10_metrics", "recall_flip_fraction", "recall_max_steps", "success_threshold"});
    return k;
  }();
  return keys;
}

namespace detail {

inline std::vector<Metric> metric_list(const KeyValueConfig& kv, const std::string& key,
                                       std::vector<Metric> fallback) {
  if (!kv.has(key)) return fallback;
  std::vector<Metric> out;
  for (const auto& name : kv.get_list(key)) {
    auto m = parse_metric(name);
    kv.require(key, m.has_value(), "has unknown metric '" + name + "'");
    if (std::find(out.begin(), out.end(), *m) == out.end()) out.push_back(*m);
  }
  return out;
}

// Either an explicit ascending list or (min, max, count) spacing.
inline std::vector<double> axis(const KeyValueConfig& kv, const std::string& name, bool log_spaced) {
  const std::string list_key = name + "_values";
  if (kv.has(list_key)) {
    for (const auto& suffix : {"_min", "_max", "_count"})
      kv.require(name + suffix, !kv.has(name + suffix), "cannot be combined with " + list_key);
    auto v = kv.get_double_list(list_key);
    kv.require(list_key, !v.empty(), "must not be empty");
    return v;
  }
  const std::string min_key = name + "_min", max_key = name + "_max", count_key = name + "_count";
  kv.require(list_key, kv.has(min_key) && kv.has(max_key) && kv.has(count_key),
             "is required (or give " + min_key + ", " + max_key + " and " + count_key + ")");
  const double lo = kv.get_double(min_key, 0.0);
  const double hi = kv.get_double(max_key, 0.0);
  const long long count = kv.get_int(count_key, 0);
  kv.require(count_key, count >= 1, "must be >= 1");
  kv.require(max_key, hi >= lo, "must be >= " + min_key);
  if (log_spaced) kv.require(min_key, lo > 0.0, "must be > 0 for a log-spaced axis");
  std::vector<double> v;
  for (long long i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    v.push_back(log_spaced ? std::pow(10.0, std::log10(lo) + f * (std::log10(hi) - std::log10(lo)))
                           : lo + f * (hi - lo));
  }
  return v;
}

}  // namespace detail

inline GridConfig grid_config_from(const KeyValueConfig& kv) {
  kv.require_known(grid_config_keys());
  GridConfig g;
  g.train = train_config_from(kv);
  g.gamma_values = detail::axis(kv, "gamma", true);
  for (std::size_t i = 0; i < g.gamma_values.size(); ++i) {
    kv.require("gamma_values", g.gamma_values[i] > 0.0, "must contain only positive values");
    if (i) kv.require("gamma_values", g.gamma_values[i] > g.gamma_values[i - 1], "must be strictly ascending");
  }
  g.load_values = detail::axis(kv, "load", false);
  for (std::size_t i = 0; i < g.load_values.size(); ++i) {
    kv.require("load_values", g.load_values[i] > 0.0 && g.load_values[i] <= 1.0, "must lie in (0, 1]");
    if (i) kv.require("load_values", g.load_values[i] > g.load_values[i - 1], "must be strictly ascending");
  }
  g.num_neurons = static_cast<int>(kv.get_int("num_neurons", g.num_neurons));
  kv.require("num_neurons", g.num_neurons >= 1, "must be >= 1");
  kv.require("load_values", patterns_for_load(g.load_values.front(), g.num_neurons) >= 1,
             "smallest load times num_neurons must round to at least 1 pattern");
  g.trials_per_cell = static_cast<int>(kv.get_int("trials_per_cell", g.trials_per_cell));
  kv.require("trials_per_cell", g.trials_per_cell >= 1, "must be >= 1");
  g.base_seed = kv.get_u64("base_seed", g.base_seed);
  g.rel_cutoff = kv.get_double("rel_cutoff", g.rel_cutoff);
  kv.require("rel_cutoff", g.rel_cutoff > 0.0 && g.rel_cutoff < 1.0, "must lie in (0, 1)");
  g.metrics = detail::metric_list(kv, "metrics", g.metrics);
  kv.require("metrics", !g.metrics.empty(), "must name at least one metric");
  g.log10_metrics = detail::metric_list(kv, "log10_metrics", g.log10_metrics);
  g.recall_flip_fraction = kv.get_double("recall_flip_fraction", g.recall_flip_fraction);
  kv.require("recall_flip_fraction", g.recall_flip_fraction >= 0.0 && g.recall_flip_fraction <= 1.0,
             "must lie in [0, 1]");
  g.recall_max_steps = static_cast<int>(kv.get_int("recall_max_steps", g.recall_max_steps));
  kv.require("recall_max_steps", g.recall_max_steps >= 1, "must be >= 1");
  g.success_threshold = kv.get_double("success_threshold", g.success_threshold);
  kv.require("success_threshold", g.success_threshold > 0.0 && g.success_threshold <= 1.0, "must lie in (0, 1]");
  g.validate();
  return g;
}

}  // namespace ridge
