#include <thread>

#include <CLI11.hpp>

#include "ridge/cli.hpp"

int main(int argc, char** argv) {
  using namespace ridge;
  std::vector<std::string> command_line(argv, argv + argc);

  CLI::App app{"ridgelab: kernel Hopfield networks and their Fisher geometry"};
  app.set_version_flag("--version", std::string(RIDGE_VERSION));
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  unsigned workers = default_workers();
  std::string out = "ridgelab-out";
  app.add_option("--seed", seed, "override the config seed (train: seed, phase: base_seed, recall: cue seed)");
  app.add_option("--workers", workers, "worker threads for grid sweeps")->check(CLI::Range(1u, 4096u));
  app.add_option("--out", out, "output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "generate patterns and train the network");
  std::string train_config;
  train->add_option("config", train_config, "key-value config file")->required();

  auto* spectrum = app.add_subcommand("spectrum", "per-neuron Fisher spectra and gradient report");
  std::string spectrum_dir;
  double cutoff = kDefaultRelCutoff;
  bool spectrum_svg = false;
  spectrum->add_option("weights_dir", spectrum_dir, "directory written by train")->required();
  spectrum->add_option("--cutoff", cutoff, "relative eigenvalue cutoff for the natural gradient")->capture_default_str();
  spectrum->add_flag("--svg", spectrum_svg, "also write spectrum.svg");

  auto* phase = app.add_subcommand("phase", "sweep the (gamma, load) grid");
  std::string phase_config;
  phase->add_option("config", phase_config, "key-value grid config file")->required();

  auto* recall = app.add_subcommand("recall", "recall stored patterns from corrupted cues");
  std::string recall_dir;
  cli::RecallOptions ropt;
  recall->add_option("weights_dir", recall_dir, "directory written by train")->required();
  recall->add_option("--fractions", ropt.fractions, "flip fractions")->delimiter(',');
  recall->add_option("--trials", ropt.trials, "trials per pattern and fraction")->capture_default_str();
  recall->add_option("--max-steps", ropt.max_steps, "synchronous update limit")->capture_default_str();
  recall->add_option("--threshold", ropt.success_threshold, "overlap counted as success")->capture_default_str();

  auto* render = app.add_subcommand("render", "re-render heatmaps from a grid CSV");
  std::string grid_csv;
  std::vector<std::string> metrics, log10_metrics;
  render->add_option("grid_csv", grid_csv, "grid.csv written by phase")->required();
  render->add_option("--metrics", metrics, "metrics to draw")->delimiter(',');
  render->add_option("--log10", log10_metrics, "metrics drawn on a log10 scale")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(cli::kUsage);
  }

  if (train->parsed()) return cli::cmd_train(train_config, out, seed, command_line);
  if (spectrum->parsed()) return cli::cmd_spectrum(spectrum_dir, out, cutoff, spectrum_svg, command_line);
  if (phase->parsed()) return cli::cmd_phase(phase_config, out, workers, seed, command_line);
  if (recall->parsed()) {
    ropt.seed = seed.value_or(0);
    return cli::cmd_recall(recall_dir, ropt, out, command_line);
  }
  if (metrics.empty()) {
    GridConfig defaults;
    for (Metric m : defaults.metrics) metrics.push_back(metric_name(m));
    if (log10_metrics.empty())
      for (Metric m : defaults.log10_metrics) log10_metrics.push_back(metric_name(m));
  }
  return cli::cmd_render(grid_csv, out, metrics, log10_metrics, command_line);
}
