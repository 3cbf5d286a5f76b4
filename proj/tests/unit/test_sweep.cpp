#include <gtest/gtest.h>

#include <sstream>

#include "ridge/config.hpp"
#include "ridge/svg.hpp"
#include "ridge/sweep.hpp"

using namespace ridge;

namespace {

GridConfig small_grid() {
  GridConfig g;
  g.gamma_values = {0.005, 0.05};
  g.load_values = {0.125, 0.25};
  g.num_neurons = 16;
  g.trials_per_cell = 2;
  g.base_seed = 9;
  g.train.step_rule = StepRule::lipschitz;
  g.train.learning_rate = 1.5;
  g.train.max_epochs = 2000;
  return g;
}

std::string csv(const std::vector<SweepCell>& cells) {
  std::ostringstream os;
  write_grid_csv(os, cells);
  return os.str();
}

}  // namespace

TEST(KeyValueConfig, ParsesAndReportsLines) {
  const auto kv = KeyValueConfig::parse_string("# c\n a = 1 \n\nlist = 1, 2,3 # tail\n");
  EXPECT_EQ(kv.get_int("a", 0), 1);
  EXPECT_EQ(kv.get_double_list("list"), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(kv.line_of("list"), 4);
  try {
    KeyValueConfig::parse_string("a = 1\nb = x\n").get_double("b", 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_THROW(KeyValueConfig::parse_string("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("novalue\n"), ConfigError);
}

TEST(GridConfigParse, ExplicitAndRangeAxes) {
  const auto g = grid_config_from(KeyValueConfig::parse_string(
      "gamma_min = 0.001\ngamma_max = 10\ngamma_count = 5\nload_values = 0.25, 0.5\nnum_neurons = 32\n"
      "metrics = d_eff, recall_rate\nstep_rule = lipschitz\n"));
  ASSERT_EQ(g.gamma_values.size(), 5u);
  EXPECT_NEAR(g.gamma_values[0], 0.001, 1e-18);
  EXPECT_NEAR(g.gamma_values[2], 0.1, 1e-15);
  EXPECT_EQ(g.gamma_values[4], 10.0);
  EXPECT_EQ(g.load_values, (std::vector<double>{0.25, 0.5}));
  EXPECT_EQ(g.num_neurons, 32);
  EXPECT_TRUE(g.wants(Metric::recall_rate));
  EXPECT_FALSE(g.wants(Metric::lambda_max));
  EXPECT_EQ(g.train.step_rule, StepRule::lipschitz);
}

TEST(GridConfigParse, Errors) {
  auto bad = [](const std::string& text, const std::string& needle) {
    try {
      grid_config_from(KeyValueConfig::parse_string(text));
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  bad("gamma_values = 0.1\nload_values = 0.5\nbogus = 1\n", "bogus");
  bad("gamma_values = -0.1\nload_values = 0.5\n", "gamma_values");
  bad("gamma_values = 0.1\nload_values = 1.5\n", "load_values");
  bad("gamma_values = 0.1\nload_values = 0.5\nmetrics = nope\n", "metrics");
  bad("gamma_values = 0.1\nload_values = 0.5\ntrials_per_cell = 0\n", "trials_per_cell");
  bad("load_values = 0.5\n", "gamma");
}

TEST(RunCell, SinglePatternHasUnitDimension) {
  GridConfig g = small_grid();
  g.num_neurons = 16;
  const SweepCell c = run_cell(0.05, 1.0 / 16, g, 3);
  EXPECT_EQ(c.P, 1);
  EXPECT_EQ(c.d_eff_mean, 1.0);
  EXPECT_EQ(c.d_eff_sd, 0.0);
}

TEST(RunCell, ConvergedGradientBelowTolerance) {
  GridConfig g = small_grid();
  g.train.max_epochs = 1000000;
  g.train.grad_tol = 1e-6;
  const SweepCell c = run_cell(0.05, 0.25, g, 4);
  EXPECT_LE(c.euclid_norm_sq_mean, 1e-12);
  EXPECT_EQ(c.divergence_count, 0);
}

TEST(RunCell, Deterministic) {
  const GridConfig g = small_grid();
  const SweepCell a = run_cell(0.005, 0.25, g, 5), b = run_cell(0.005, 0.25, g, 5);
  EXPECT_EQ(csv({a}), csv({b}));
  EXPECT_EQ(a.ratio_tail_mean, b.ratio_tail_mean);
}

TEST(RunCell, CountsDivergence) {
  GridConfig g = small_grid();
  g.train.step_rule = StepRule::fixed;
  g.train.learning_rate = 100.0;
  const SweepCell c = run_cell(0.001, 0.25, g, 6);
  EXPECT_EQ(c.divergence_count, g.trials_per_cell);
  EXPECT_TRUE(c.flagged());
  EXPECT_TRUE(std::isnan(c.lambda_max_mean));
}

TEST(RunCell, RecallOnlyWhenRequested) {
  GridConfig g = small_grid();
  EXPECT_TRUE(std::isnan(run_cell(0.05, 0.25, g, 7).recall_rate));
  g.metrics.push_back(Metric::recall_rate);
  const double r = run_cell(0.05, 0.25, g, 7).recall_rate;
  EXPECT_GE(r, 0.0);
  EXPECT_LE(r, 1.0);
}

TEST(RunGrid, SingleCellComposition) {
  GridConfig g = small_grid();
  g.gamma_values = {0.05};
  g.load_values = {0.25};
  const auto cells = run_grid(g);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(csv(cells), csv({run_cell(0.05, 0.25, g, cell_seed(g.base_seed, 0.05, 0.25))}));
}

TEST(RunGrid, WorkerCountDoesNotChangeBytes) {
  const GridConfig g = small_grid();
  const std::string one = csv(run_grid(g, 1));
  EXPECT_EQ(one, csv(run_grid(g, 3)));
  EXPECT_EQ(one, csv(run_grid(g, 16)));
}

TEST(RunGrid, PatternsSharedAcrossGamma) {
  EXPECT_EQ(pattern_seed(1, 0.25, 0), pattern_seed(1, 0.25, 0));
  EXPECT_NE(pattern_seed(1, 0.25, 0), pattern_seed(1, 0.25, 1));
  EXPECT_NE(cell_seed(1, 0.1, 0.25), cell_seed(1, 0.2, 0.25));
}

TEST(GridCsv, RoundTrip) {
  GridConfig g = small_grid();
  g.metrics.push_back(Metric::recall_rate);
  const auto cells = run_grid(g);
  std::istringstream in(csv(cells));
  EXPECT_EQ(csv(read_grid_csv(in)), csv(cells));
  std::istringstream bad("gamma,load\n1,2\n");
  EXPECT_THROW(read_grid_csv(bad), ConfigError);
}

TEST(Heatmap, ConstantField) {
  std::vector<SweepCell> cells(4);
  for (int i = 0; i < 4; ++i) {
    cells[i].gamma = i % 2 ? 0.1 : 0.01;
    cells[i].load = i / 2 ? 0.5 : 0.25;
    cells[i].d_eff_mean = 3.0;
  }
  std::ostringstream os;
  const ColorScale s = render_heatmap(os, cells, Metric::d_eff, false);
  EXPECT_EQ(s.min, s.max);
  const std::string doc = os.str();
  const std::string fill = "fill=\"" + svg::ramp(0.5) + "\"><title>";
  std::size_t count = 0;
  for (auto p = doc.find(fill); p != std::string::npos; p = doc.find(fill, p + 1)) ++count;
  EXPECT_EQ(count, 4u);
}

TEST(Heatmap, SingleCell) {
  std::vector<SweepCell> cells(1);
  cells[0].gamma = 0.1;
  cells[0].load = 0.5;
  cells[0].lambda_max_mean = 2.0;
  std::ostringstream os;
  render_heatmap(os, cells, Metric::lambda_max, true);
  const std::string doc = os.str();
  EXPECT_EQ(doc.rfind("<svg", 0), 0u);
  EXPECT_NE(doc.find("</svg>"), std::string::npos);
  EXPECT_EQ(doc.find("<title>", doc.find("<title>") + 1), std::string::npos);
}

TEST(Heatmap, LogRange) {
  std::vector<SweepCell> cells(2);
  cells[0].gamma = 0.1;
  cells[1].gamma = 1.0;
  cells[0].load = cells[1].load = 0.5;
  cells[0].euclid_norm_sq_mean = 1e-8;
  cells[1].euclid_norm_sq_mean = 1e2;
  std::ostringstream os;
  const ColorScale s = render_heatmap(os, cells, Metric::euclid_norm_sq, true);
  EXPECT_NEAR(s.min, -8.0, 1e-12);
  EXPECT_NEAR(s.max, 2.0, 1e-12);
}

TEST(Heatmap, Errors) {
  std::vector<SweepCell> cells(3);
  cells[0].gamma = 0.1;
  cells[1].gamma = 1.0;
  cells[2].gamma = 0.1;
  cells[2].load = 0.5;
  std::ostringstream os;
  EXPECT_THROW(render_heatmap(os, cells, Metric::d_eff, false), LayoutError);
  cells.pop_back();
  cells[0].d_eff_mean = std::nan("");
  EXPECT_THROW(render_heatmap(os, cells, Metric::d_eff, false), DataError);
  cells[0].divergence_count = 1;
  std::ostringstream ok;
  EXPECT_NO_THROW(render_heatmap(ok, cells, Metric::d_eff, false));
  EXPECT_NE(ok.str().find(svg::kFlaggedColor), std::string::npos);
}
