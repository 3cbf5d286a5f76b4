// Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.
//
//   acceptance <grid config> <scratch dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ridge/cli.hpp"

using namespace ridge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

struct Random {
  std::mt19937_64 rng;
  explicit Random(std::uint64_t s) : rng(s) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  // Patterns, Gram matrix, weights and one neuron's targets with randomized scales.
  struct Instance {
    PatternSet patterns;
    GramMatrix k;
    Eigen::VectorXd alpha;
    NeuronTargets targets;
    double lambda;
  };
  Instance instance(int max_p) {
    const int p = integer(1, max_p);
    const int n = integer(8, 64);
    const double gamma = std::exp(uniform(std::log(1e-3), std::log(1.0)));
    PatternSet ps = generate_patterns(p, n, rng());
    GramMatrix k = gram(ps, {KernelKind::rbf, gamma});
    const double scale = std::exp(uniform(std::log(0.1), std::log(10.0)));
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd alpha(p);
    for (int i = 0; i < p; ++i) alpha[i] = normal(rng);
    auto t = NeuronTargets::for_neuron(ps, integer(0, n - 1));
    const double lambda = std::exp(uniform(std::log(1e-5), std::log(1.0)));
    return Instance{std::move(ps), std::move(k), std::move(alpha), std::move(t), lambda};
  }
};

Outcome fim_consistency() {
  Random r(101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto inst = r.instance(12);
    const auto a = fisher_matrix(inst.alpha, inst.k).values;
    const auto b = fim_empirical_oracle(inst.alpha, inst.k).values;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("200 instances, max abs difference %.3g (limit 1e-12)", worst)};
}

Outcome gradient_correctness() {
  Random r(102);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto inst = r.instance(16);
    const Eigen::VectorXd g = loss_gradient(inst.alpha, inst.k, inst.targets, inst.lambda);
    Eigen::VectorXd fd(g.size());
    for (int j = 0; j < g.size(); ++j) {
      Eigen::VectorXd up = inst.alpha, dn = inst.alpha;
      const double h = 1e-6 * std::max(1.0, std::abs(inst.alpha[j]));
      up[j] += h;
      dn[j] -= h;
      fd[j] = (loss(up, inst.k, inst.targets, inst.lambda) - loss(dn, inst.k, inst.targets, inst.lambda)) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-8));
  }
  return {worst < 1e-5, fmt("100 instances, max relative error %.3g (limit 1e-5)", worst)};
}

Outcome natural_gradient_identity() {
  Random r(103);
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    const auto inst = r.instance(16);
    const FisherMatrix g = fisher_matrix(inst.alpha, inst.k);
    const FisherSpectrum s = spectrum(g);
    const Eigen::VectorXd grad = loss_gradient(inst.alpha, inst.k, inst.targets, inst.lambda);
    if (s.degenerate || grad.norm() == 0.0) continue;
    const NaturalGradient nat = natural_gradient(grad, s);
    const auto v = s.eigenvectors.leftCols(nat.retained_modes);
    const Eigen::VectorXd projected = v * (v.transpose() * grad);
    if (projected.norm() == 0.0) continue;
    worst = std::max(worst, (g.values * nat.direction - projected).norm() / projected.norm());
    ++checked;
  }
  return {checked == 100 && worst <= 1e-8,
          fmt("%g of 100 instances usable, max relative error %.3g (limit 1e-8)", checked, worst)};
}

Outcome stable_rank(const std::vector<SweepCell>& cells) {
  const double a = effective_dimension(Eigen::Vector4d(1, 1, 1, 1));
  const double b = effective_dimension(Eigen::Vector4d(1, 0, 0, 0));
  const double c = effective_dimension(Eigen::Vector4d(1, 0.01, 0.01, 0.01));
  const bool hand = a == 4.0 && b == 1.0 && std::abs(c - 1.03 * 1.03 / 1.0003) <= 1e-9;
  int bad = 0;
  for (const auto& cell : cells)
    if (!(cell.d_eff_mean >= 1.0 - 1e-12 && cell.d_eff_mean <= cell.P + 1e-12)) ++bad;
  return {hand && bad == 0,
          fmt("hand values %g/%g/%.10g; ", a, b, c) + std::to_string(bad) + " of " +
              std::to_string(cells.size()) + " sweep cells outside [1, P]"};
}

// Cells of one load row, in ascending gamma.
std::vector<const SweepCell*> row(const std::vector<SweepCell>& cells, double load) {
  std::vector<const SweepCell*> out;
  for (const auto& c : cells)
    if (c.load == load) out.push_back(&c);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->gamma < b->gamma; });
  return out;
}

bool l_shaped(const SweepCell& c) {
  return !c.flagged() && c.ratio_2_1_mean < 1e-1 && c.ratio_tail_mean > 1e-6 && c.d_eff_mean <= 6.0;
}

Outcome spectral_concentration(const std::vector<SweepCell>& cells, const std::vector<double>& loads) {
  bool pass = true;
  std::ostringstream d;
  for (double load : loads) {
    const auto r = row(cells, load);
    int shaped = 0;
    for (auto* c : r) shaped += l_shaped(*c) ? 1 : 0;
    const SweepCell& small = *r.front();
    const bool small_ok = small.ratio_tail_mean > 0.1 && small.d_eff_mean >= 0.5 * small.P;
    pass = pass && shaped > 0 && small_ok;
    d << "load " << load << ": " << shaped << " L-shaped cells, smallest-gamma ratio_tail "
      << fmt("%.3g d_eff %.3g P %g", small.ratio_tail_mean, small.d_eff_mean, small.P) << "; ";
  }
  return {pass, d.str()};
}

Outcome edge_of_stability(const std::vector<SweepCell>& cells, const std::vector<double>& loads) {
  bool pass = true;
  std::ostringstream d;
  for (double load : loads) {
    const auto r = row(cells, load);
    double top = -1.0;
    for (auto* c : r)
      if (std::isfinite(c->lambda_max_mean)) top = std::max(top, c->lambda_max_mean);
    const double over_small = top / r.front()->lambda_max_mean;
    const double over_large = top / r.back()->lambda_max_mean;
    pass = pass && over_small >= 1e2 && over_large >= 1e6;
    d << "load " << load << fmt(": max/small-gamma %.3g, max/large-gamma %.3g; ", over_small, over_large);
  }
  return {pass, d.str()};
}

Outcome dual_equilibrium(const std::vector<SweepCell>& cells, const std::vector<double>& loads) {
  bool pass = true;
  std::ostringstream d;
  for (double load : loads) {
    const auto r = row(cells, load);
    int arg_e = -1, arg_r = -1;
    for (int i = 0; i < static_cast<int>(r.size()); ++i) {
      const SweepCell& c = *r[i];
      if (c.flagged() || !std::isfinite(c.riemann_norm_sq_mean) || !std::isfinite(c.euclid_norm_sq_mean)) continue;
      if (arg_e < 0 || c.euclid_norm_sq_mean > r[arg_e]->euclid_norm_sq_mean) arg_e = i;
      if (arg_r < 0 || c.riemann_norm_sq_mean < r[arg_r]->riemann_norm_sq_mean) arg_r = i;
    }
    const bool ok = arg_e >= 0 && arg_r >= 0 && std::abs(arg_e - arg_r) <= 2;
    pass = pass && ok;
    d << "load " << load << ": argmax euclid at column " << arg_e << ", argmin riemann at column " << arg_r << "; ";
  }
  return {pass, d.str()};
}

Outcome rank1_amplification(const std::vector<SweepCell>& cells) {
  int eligible = 0, bad = 0;
  double worst = 0.0;
  for (const auto& c : cells)
    if (c.ratio_2_1_mean < 1e-3) {
      ++eligible;
      worst = std::max(worst, c.rank1_residual_mean);
      if (!(c.rank1_residual_mean < 0.1)) ++bad;
    }
  return {bad == 0, fmt("%g cells with ratio_2_1 < 1e-3, %g with residual >= 0.1, worst residual %.3g", eligible,
                        bad, worst)};
}

Outcome memory_function(const std::vector<SweepCell>& cells, const GridConfig& cfg) {
  const double load = 0.25;
  // Ridge regime: an L-shaped cell whose d_eff lies in the 1.5 to 5 band; the
  // highest-curvature one if several qualify.
  const SweepCell* ridge_cell = nullptr;
  for (auto* c : row(cells, load))
    if (l_shaped(*c) && c->d_eff_mean >= 1.5 && c->d_eff_mean <= 5.0 &&
        (!ridge_cell || c->lambda_max_mean > ridge_cell->lambda_max_mean))
      ridge_cell = c;
  if (!ridge_cell) return {false, "no ridge-regime cell at load 0.25"};
  const KernelConfig kc{KernelKind::rbf, ridge_cell->gamma};
  const int p = patterns_for_load(load, cfg.num_neurons);
  long exact_ok = 0, noisy_ok = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const PatternSet ps = generate_patterns(p, cfg.num_neurons, mix_seed({cfg.base_seed, 0x9e11, std::uint64_t(trial)}));
    const DualWeights w = train(ps, kc, cfg.train);
    for (int mu = 0; mu < p; ++mu) {
      ++total;
      exact_ok += recall(ps.pattern(mu), mu, ps, w, kc, cfg.recall_max_steps).overlap == 1.0 ? 1 : 0;
      const State cue = corrupt(ps.pattern(mu), 0.1, mix_seed({cfg.base_seed, std::uint64_t(trial), std::uint64_t(mu)}));
      noisy_ok += recall(cue, mu, ps, w, kc, cfg.recall_max_steps, cfg.success_threshold).success ? 1 : 0;
    }
  }
  const double noisy_rate = static_cast<double>(noisy_ok) / static_cast<double>(total);
  return {exact_ok == total && noisy_rate >= 0.9,
          fmt("gamma %.4g: exact cues %g/", ridge_cell->gamma, exact_ok) + std::to_string(total) +
              fmt(", 10%% cues success rate %.4g (limit 0.9)", noisy_rate)};
}

Outcome reproducibility(const fs::path& config, const fs::path& scratch) {
  fs::remove_all(scratch);
  const unsigned many = std::max(2u, default_workers());
  std::ostringstream err;
  if (cli::cmd_phase(config, scratch / "one", 1, std::nullopt, {}, err) != 0 ||
      cli::cmd_phase(config, scratch / "many", many, std::nullopt, {}, err) != 0)
    return {false, "cmd_phase failed: " + err.str()};
  int files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(scratch / "one")) {
    const auto name = e.path().filename();
    if (name == "manifest.json") continue;
    ++files;
    if (!fs::exists(scratch / "many" / name) ||
        cli::read_file(e.path()) != cli::read_file(scratch / "many" / name))
      ++differ;
  }
  fs::remove_all(scratch);
  return {files > 0 && differ == 0,
          fmt("1 vs %g workers: %g files compared, %g differ", many, files, differ)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <grid config> <scratch dir>\n";
    return 2;
  }
  const fs::path config = argv[1], scratch = argv[2];
  const GridConfig cfg = grid_config_from(cli::load_config(config));
  const std::vector<double> loads{0.125, 0.25, 0.5};
  for (double load : loads)
    if (std::find(cfg.load_values.begin(), cfg.load_values.end(), load) == cfg.load_values.end()) {
      std::cerr << "acceptance grid must contain load " << load << '\n';
      return 2;
    }
  const std::vector<SweepCell> cells = run_grid(cfg, default_workers());

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"C1 fim consistency", fim_consistency},
      {"C2 gradient correctness", gradient_correctness},
      {"C3 natural gradient identity", natural_gradient_identity},
      {"C4 stable rank", [&] { return stable_rank(cells); }},
      {"C5 spectral concentration", [&] { return spectral_concentration(cells, loads); }},
      {"C6 edge of stability", [&] { return edge_of_stability(cells, loads); }},
      {"C7 dual equilibrium", [&] { return dual_equilibrium(cells, loads); }},
      {"C8 rank-1 amplification", [&] { return rank1_amplification(cells); }},
      {"C9 memory function", [&] { return memory_function(cells, cfg); }},
      {"C10 reproducibility", [&] { return reproducibility(config, scratch); }},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << '/' << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
