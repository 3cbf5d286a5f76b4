#pragma once

// Subcommands of the ridgelab tool, callable in-process.
//
// Every command writes only inside its output directory, finishes by writing
// manifest.json there, and returns an exit code:
//   0 success, 2 usage / configuration / missing artifacts, 3 numeric failure.
// Outputs other than the manifest are byte-identical for identical inputs.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ridge/config.hpp"
#include "ridge/dynamics.hpp"
#include "ridge/error.hpp"
#include "ridge/infogeo.hpp"
#include "ridge/kernel_core.hpp"
#include "ridge/klr.hpp"
#include "ridge/svg.hpp"
#include "ridge/sweep.hpp"

#ifndef RIDGE_VERSION
#define RIDGE_VERSION "0.0.0"
#endif

namespace ridge::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 2, kNumeric = 3 };

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects the files a command writes and produces the run manifest.
class OutputDir {
 public:
  OutputDir(fs::path dir, std::vector<std::string> command_line)
      : dir_(std::move(dir)), command_line_(std::move(command_line)), started_(utc_timestamp()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw ConfigError("cannot create output directory " + dir_.string());
  }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + (dir_ / name).string());
    out << bytes;
    if (!out) throw ConfigError("cannot write " + (dir_ / name).string());
    files_.emplace_back(name, sha256_hex(bytes));
  }

  /// Deletes everything written so far (used when a run fails midway).
  void discard() {
    for (const auto& [name, digest] : files_) {
      std::error_code ec;
      fs::remove(dir_ / name, ec);
    }
    files_.clear();
  }

  void finish(const nlohmann::ordered_json& config, const nlohmann::ordered_json& seeds) {
    nlohmann::ordered_json m;
    m["tool"] = "ridgelab";
    m["version"] = RIDGE_VERSION;
    m["command_line"] = command_line_;
    m["config"] = config;
    m["seeds"] = seeds;
    m["started_at"] = started_;
    m["finished_at"] = utc_timestamp();
    nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
    for (const auto& [name, digest] : files_) outputs[name] = {{"sha256", digest}};
    m["outputs"] = outputs;
    std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
    out << m.dump(2) << '\n';
    if (!out) throw ConfigError("cannot write manifest");
  }

  const fs::path& path() const noexcept { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> command_line_;
  std::string started_;
  std::vector<std::pair<std::string, std::string>> files_;
};

inline KeyValueConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return KeyValueConfig::parse(in);
}

inline nlohmann::ordered_json train_config_json(const TrainConfig& t) {
  return {{"lambda", t.lambda},
          {"learning_rate", t.learning_rate},
          {"max_epochs", t.max_epochs},
          {"grad_tol", t.grad_tol},
          {"step_rule", t.step_rule == StepRule::fixed ? "fixed" : "lipschitz"}};
}

/// Runs `body`, mapping library exceptions to exit codes and printing the
/// message to `err`.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DegenerateSpectrumError& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

// ---------------------------------------------------------------- train

struct TrainJob {
  int num_patterns = 0;
  int num_neurons = 0;
  std::uint64_t seed = 0;
  KernelConfig kernel;
  TrainConfig train;
};

inline TrainJob train_job_from(const KeyValueConfig& kv) {
  std::set<std::string> allowed = train_config_keys();
  allowed.insert({"num_patterns", "num_neurons", "seed", "gamma"});
  kv.require_known(allowed);
  TrainJob job;
  kv.require("num_patterns", kv.has("num_patterns"), "is required");
  kv.require("num_neurons", kv.has("num_neurons"), "is required");
  job.num_patterns = static_cast<int>(kv.get_int("num_patterns", 0));
  kv.require("num_patterns", job.num_patterns >= 1, "must be >= 1");
  job.num_neurons = static_cast<int>(kv.get_int("num_neurons", 0));
  kv.require("num_neurons", job.num_neurons >= 1, "must be >= 1");
  job.seed = kv.get_u64("seed", 0);
  job.kernel.gamma = kv.get_double("gamma", job.kernel.gamma);
  kv.require("gamma", job.kernel.gamma > 0.0, "must be > 0");
  job.train = train_config_from(kv);
  return job;
}

inline int cmd_train(const fs::path& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
                     const std::vector<std::string>& command_line, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    KeyValueConfig kv = load_config(config_path);
    if (seed) kv.set("seed", std::to_string(*seed));
    const TrainJob job = train_job_from(kv);
    OutputDir out(out_dir, command_line);
    const PatternSet patterns = generate_patterns(job.num_patterns, job.num_neurons, job.seed);
    std::ostringstream ps;
    write_patterns(ps, patterns);
    out.write("patterns.txt", ps.str());
    DualWeights w;
    try {
      w = train(patterns, job.kernel, job.train);
    } catch (const DivergenceError&) {
      out.discard();
      throw;
    }
    std::ostringstream ws;
    write_weights(ws, w);
    out.write("weights.txt", ws.str());
    nlohmann::ordered_json cfg = {{"num_patterns", job.num_patterns},
                                  {"num_neurons", job.num_neurons},
                                  {"gamma", job.kernel.gamma},
                                  {"train", train_config_json(job.train)},
                                  {"trained_epochs", w.trained_epochs}};
    out.finish(cfg, {{"patterns", job.seed}});
    return int(kOk);
  });
}

// ---------------------------------------------------------------- artifacts

struct TrainedNetwork {
  PatternSet patterns;
  DualWeights weights;
  KernelConfig kernel;
};

inline TrainedNetwork load_network(const fs::path& dir) {
  const fs::path pp = dir / "patterns.txt", wp = dir / "weights.txt";
  if (!fs::exists(pp) || !fs::exists(wp))
    throw ConfigError("missing trained artifacts in " + dir.string() + " (need patterns.txt and weights.txt)");
  std::istringstream pin(read_file(pp));
  PatternSet patterns = read_patterns(pin);
  std::istringstream win(read_file(wp));
  DualWeights weights = read_weights(win);
  if (weights.num_patterns() != patterns.num_patterns() || weights.num_neurons() != patterns.num_neurons())
    throw ConfigError("weights.txt does not match patterns.txt");
  KernelConfig k{KernelKind::rbf, weights.gamma};
  k.validate();
  return TrainedNetwork{std::move(patterns), std::move(weights), k};
}

// ---------------------------------------------------------------- spectrum

inline int cmd_spectrum(const fs::path& weights_dir, const fs::path& out_dir, double rel_cutoff, bool svg,
                        const std::vector<std::string>& command_line, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    if (!(rel_cutoff > 0.0 && rel_cutoff < 1.0)) throw ArgumentError("--cutoff must lie in (0, 1)");
    const TrainedNetwork net = load_network(weights_dir);
    const GramMatrix k = gram(net.patterns, net.kernel);
    const auto neurons = analyze_network(net.patterns, k, net.weights, rel_cutoff);
    OutputDir out(out_dir, command_line);
    std::ostringstream spec, report;
    write_spectrum_csv(spec, neurons);
    write_report_csv(report, neurons);
    out.write("spectrum.csv", spec.str());
    out.write("report.csv", report.str());
    if (svg) {
      std::ostringstream plot;
      render_spectrum_plot(plot, neurons);
      out.write("spectrum.svg", plot.str());
    }
    out.finish({{"weights_dir", weights_dir.string()}, {"rel_cutoff", rel_cutoff}, {"svg", svg}},
               {{"patterns", net.patterns.seed()}});
    return int(kOk);
  });
}

// ---------------------------------------------------------------- phase

inline void write_heatmaps(OutputDir& out, const std::vector<SweepCell>& cells, const std::vector<Metric>& metrics,
                           const std::vector<Metric>& log10_metrics) {
  for (Metric m : metrics) {
    const bool log_scale = std::find(log10_metrics.begin(), log10_metrics.end(), m) != log10_metrics.end();
    std::ostringstream os;
    render_heatmap(os, cells, m, log_scale);
    out.write(metric_name(m) + ".svg", os.str());
  }
}

inline nlohmann::ordered_json grid_config_json(const GridConfig& g) {
  auto names = [](const std::vector<Metric>& ms) {
    std::vector<std::string> v;
    for (Metric m : ms) v.push_back(metric_name(m));
    return v;
  };
  return {{"gamma_values", g.gamma_values},
          {"load_values", g.load_values},
          {"num_neurons", g.num_neurons},
          {"trials_per_cell", g.trials_per_cell},
          {"base_seed", g.base_seed},
          {"train", train_config_json(g.train)},
          {"rel_cutoff", g.rel_cutoff},
          {"metrics", names(g.metrics)},
          {"log10_metrics", names(g.log10_metrics)},
          {"recall_flip_fraction", g.recall_flip_fraction},
          {"recall_max_steps", g.recall_max_steps},
          {"success_threshold", g.success_threshold}};
}

inline int cmd_phase(const fs::path& config_path, const fs::path& out_dir, unsigned workers,
                     std::optional<std::uint64_t> seed, const std::vector<std::string>& command_line,
                     std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    KeyValueConfig kv = load_config(config_path);
    if (seed) kv.set("base_seed", std::to_string(*seed));
    const GridConfig cfg = grid_config_from(kv);
    const std::vector<SweepCell> cells = run_grid(cfg, workers);
    OutputDir out(out_dir, command_line);
    std::ostringstream csv;
    write_grid_csv(csv, cells);
    out.write("grid.csv", csv.str());
    write_heatmaps(out, cells, cfg.metrics, cfg.log10_metrics);
    long degenerate = 0, diverged = 0, flagged = 0;
    for (const auto& c : cells) {
      degenerate += c.degenerate_count;
      diverged += c.divergence_count;
      flagged += c.flagged() ? 1 : 0;
    }
    if (flagged > 0)
      err << "note: " << flagged << " of " << cells.size() << " cells flagged (" << degenerate
          << " degenerate neuron spectra, " << diverged << " diverged trials)\n";
    out.finish(grid_config_json(cfg), {{"base_seed", cfg.base_seed}});
    return int(kOk);
  });
}

// ---------------------------------------------------------------- recall

struct RecallOptions {
  std::vector<double> fractions;
  int trials = 20;
  int max_steps = 20;
  double success_threshold = kDefaultSuccessThreshold;
  std::uint64_t seed = 0;
};

inline std::uint64_t recall_cue_seed(std::uint64_t seed, double fraction, int trial, int target) {
  return mix_seed({seed, double_bits(fraction), static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(target)});
}

/// Corrupts every stored pattern at each fraction, `trials` times, and recalls it.
inline std::vector<RecallTrial> recall_batch(const TrainedNetwork& net, const RecallOptions& opt) {
  std::vector<RecallTrial> rows;
  for (double f : opt.fractions)
    for (int t = 0; t < opt.trials; ++t)
      for (int mu = 0; mu < net.patterns.num_patterns(); ++mu) {
        const State cue = corrupt(net.patterns.pattern(mu), f, recall_cue_seed(opt.seed, f, t, mu));
        rows.push_back({t, mu, f,
                        recall(cue, mu, net.patterns, net.weights, net.kernel, opt.max_steps, opt.success_threshold)});
      }
  return rows;
}

inline int cmd_recall(const fs::path& weights_dir, const RecallOptions& opt, const fs::path& out_dir,
                      const std::vector<std::string>& command_line, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    if (opt.fractions.empty()) throw ArgumentError("--fractions must list at least one flip fraction");
    for (double f : opt.fractions)
      if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("flip fractions must lie in [0, 1]");
    if (opt.trials < 1) throw ArgumentError("--trials must be >= 1");
    if (opt.max_steps < 1) throw ArgumentError("--max-steps must be >= 1");
    if (!(opt.success_threshold > 0.0 && opt.success_threshold <= 1.0))
      throw ArgumentError("--threshold must lie in (0, 1]");
    const TrainedNetwork net = load_network(weights_dir);
    const auto rows = recall_batch(net, opt);
    std::ostringstream csv;
    write_recall_csv(csv, rows);
    for (double f : opt.fractions) {
      long hits = 0, total = 0;
      for (const auto& r : rows)
        if (r.flip_fraction == f) {
          hits += r.result.success ? 1 : 0;
          ++total;
        }
      csv << "# flip_fraction=" << format_double(f) << " success_rate="
          << format_double(static_cast<double>(hits) / static_cast<double>(total)) << '\n';
    }
    OutputDir out(out_dir, command_line);
    out.write("recall.csv", csv.str());
    out.finish({{"weights_dir", weights_dir.string()},
                {"fractions", opt.fractions},
                {"trials", opt.trials},
                {"max_steps", opt.max_steps},
                {"success_threshold", opt.success_threshold}},
               {{"cues", opt.seed}});
    return int(kOk);
  });
}

// ---------------------------------------------------------------- render

inline int cmd_render(const fs::path& grid_csv, const fs::path& out_dir, const std::vector<std::string>& metric_names,
                      const std::vector<std::string>& log10_names, const std::vector<std::string>& command_line,
                      std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    auto parse_all = [](const std::vector<std::string>& names) {
      std::vector<Metric> out;
      for (const auto& n : names) {
        auto m = parse_metric(n);
        if (!m) throw ArgumentError("unknown metric '" + n + "'");
        out.push_back(*m);
      }
      return out;
    };
    const std::vector<Metric> metrics = parse_all(metric_names);
    if (metrics.empty()) throw ArgumentError("--metrics must name at least one metric");
    const std::vector<Metric> log10_metrics = parse_all(log10_names);
    std::istringstream in(read_file(grid_csv));
    const std::vector<SweepCell> cells = read_grid_csv(in);
    OutputDir out(out_dir, command_line);
    write_heatmaps(out, cells, metrics, log10_metrics);
    out.finish({{"grid_csv", grid_csv.string()}, {"metrics", metric_names}, {"log10_metrics", log10_names}},
               nlohmann::ordered_json::object());
    return int(kOk);
  });
}

}  // namespace ridge::cli
