#pragma once

// Self-contained SVG figures: phase-diagram heatmaps and normalized Fisher
// spectra. Output is plain text with fixed number formatting, so identical
// inputs give identical bytes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ridge/error.hpp"
#include "ridge/infogeo.hpp"
#include "ridge/sweep.hpp"

namespace ridge {

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Rgb {
  double r, g, b;
};

// Anchors of the "inferno" colormap (black through purple and orange to pale yellow).
inline constexpr std::array<Rgb, 9> kInferno{{{0, 0, 4},
                                              {31, 12, 72},
                                              {85, 15, 109},
                                              {136, 34, 106},
                                              {186, 54, 85},
                                              {227, 89, 51},
                                              {249, 140, 10},
                                              {249, 201, 50},
                                              {252, 255, 164}}};

/// Reserved fill for cells whose metric is undefined because of a flag.
inline constexpr const char* kFlaggedColor = "#3fbfbf";

inline std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(c.r)),
                static_cast<int>(std::lround(c.g)), static_cast<int>(std::lround(c.b)));
  return buf;
}

/// Color at position t in [0, 1] along the ramp.
inline std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double x = t * (kInferno.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), kInferno.size() - 2);
  const double f = x - static_cast<double>(i);
  const Rgb& a = kInferno[i];
  const Rgb& b = kInferno[i + 1];
  return hex({a.r + f * (b.r - a.r), a.g + f * (b.g - a.g), a.b + f * (b.b - a.b)});
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace svg

/// Value range the heatmap color bar spans, after the optional log10 transform.
struct ColorScale {
  double min = 0.0;
  double max = 0.0;
};

/// Writes a heatmap of one metric: gamma (log-spaced) across, load upward.
///
/// Throws LayoutError unless the cells form a full rectangular gamma x load
/// grid, and DataError if a cell without flags has a non-finite value after the
/// transform. Flagged cells with undefined values get the reserved color.
inline ColorScale render_heatmap(std::ostream& os, const std::vector<SweepCell>& cells, Metric metric,
                                 bool log10_scale) {
  if (cells.empty()) throw LayoutError("heatmap needs at least one cell");
  std::vector<double> gammas, loads;
  for (const auto& c : cells) {
    gammas.push_back(c.gamma);
    loads.push_back(c.load);
  }
  std::sort(gammas.begin(), gammas.end());
  gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
  std::sort(loads.begin(), loads.end());
  loads.erase(std::unique(loads.begin(), loads.end()), loads.end());
  if (cells.size() != gammas.size() * loads.size())
    throw LayoutError("cells do not form a rectangular gamma x load grid");
  std::map<std::pair<std::size_t, std::size_t>, const SweepCell*> at;
  for (const auto& c : cells) {
    const auto gi = static_cast<std::size_t>(std::lower_bound(gammas.begin(), gammas.end(), c.gamma) - gammas.begin());
    const auto li = static_cast<std::size_t>(std::lower_bound(loads.begin(), loads.end(), c.load) - loads.begin());
    if (!at.emplace(std::make_pair(gi, li), &c).second)
      throw LayoutError("duplicate cell in heatmap grid");
  }

  auto transformed = [&](const SweepCell& c) {
    const double v = c.metric(metric);
    return log10_scale ? std::log10(v) : v;
  };
  ColorScale scale{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& c : cells) {
    const double v = transformed(c);
    if (std::isfinite(v)) {
      scale.min = std::min(scale.min, v);
      scale.max = std::max(scale.max, v);
    } else if (!c.flagged()) {
      throw DataError("metric " + metric_name(metric) + " is not finite at gamma=" + svg::num(c.gamma) +
                      ", load=" + svg::num(c.load) + " and the cell carries no flag");
    }
  }
  const bool any_finite = scale.min <= scale.max;
  if (!any_finite) scale = {0.0, 0.0};

  const double cw = 40, ch = 28, left = 80, top = 40, bottom = 70, bar_gap = 30, bar_w = 18, right = 110;
  const double plot_w = cw * gammas.size(), plot_h = ch * loads.size();
  const double width = left + plot_w + bar_gap + bar_w + right;
  const double height = top + plot_h + bottom;
  const std::string label = (log10_scale ? "log10 " : "") + metric_name(metric);

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(width) << "\" height=\""
     << svg::num(height) << "\" viewBox=\"0 0 " << svg::num(width) << ' ' << svg::num(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << svg::num(left) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
     << svg::escape(label) << "</text>\n";

  for (std::size_t li = 0; li < loads.size(); ++li) {
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      const SweepCell& c = *at.at({gi, li});
      const double v = transformed(c);
      std::string fill = svg::kFlaggedColor;
      if (std::isfinite(v)) {
        const double span = scale.max - scale.min;
        fill = svg::ramp(span > 0.0 ? (v - scale.min) / span : 0.5);
      }
      const double x = left + cw * gi;
      const double y = top + plot_h - ch * (li + 1);
      os << "<rect x=\"" << svg::num(x) << "\" y=\"" << svg::num(y) << "\" width=\"" << svg::num(cw)
         << "\" height=\"" << svg::num(ch) << "\" fill=\"" << fill << "\"><title>gamma=" << svg::num(c.gamma)
         << " load=" << svg::num(c.load) << " value=" << svg::num(c.metric(metric)) << "</title></rect>\n";
    }
  }

  // Axes.
  os << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const double x = left + cw * (gi + 0.5);
    os << "<text x=\"" << svg::num(x) << "\" y=\"" << svg::num(top + plot_h + 14)
       << "\" text-anchor=\"end\" transform=\"rotate(-45 " << svg::num(x) << ' ' << svg::num(top + plot_h + 14)
       << ")\">" << svg::num(gammas[gi]) << "</text>\n";
  }
  for (std::size_t li = 0; li < loads.size(); ++li) {
    const double y = top + plot_h - ch * (li + 0.5) + 4;
    os << "<text x=\"" << svg::num(left - 6) << "\" y=\"" << svg::num(y) << "\" text-anchor=\"end\">"
       << svg::num(loads[li]) << "</text>\n";
  }
  os << "<text x=\"" << svg::num(left + plot_w / 2) << "\" y=\"" << svg::num(height - 8)
     << "\" text-anchor=\"middle\" font-size=\"12\">gamma (log scale)</text>\n";
  os << "<text x=\"16\" y=\"" << svg::num(top + plot_h / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 16 " << svg::num(top + plot_h / 2) << ")\">P/N</text>\n";
  os << "</g>\n";

  // Color bar.
  const double bx = left + plot_w + bar_gap;
  os << "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
  for (std::size_t i = 0; i < svg::kInferno.size(); ++i) {
    const double t = static_cast<double>(i) / (svg::kInferno.size() - 1);
    os << "<stop offset=\"" << svg::num(t) << "\" stop-color=\"" << svg::hex(svg::kInferno[i]) << "\"/>\n";
  }
  os << "</linearGradient></defs>\n";
  os << "<rect x=\"" << svg::num(bx) << "\" y=\"" << svg::num(top) << "\" width=\"" << svg::num(bar_w)
     << "\" height=\"" << svg::num(plot_h) << "\" fill=\"url(#ramp)\"/>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<text x=\"" << svg::num(bx + bar_w + 4) << "\" y=\"" << svg::num(top + 8) << "\">max "
     << svg::num(scale.max) << "</text>\n";
  os << "<text x=\"" << svg::num(bx + bar_w + 4) << "\" y=\"" << svg::num(top + plot_h) << "\">min "
     << svg::num(scale.min) << "</text>\n";
  os << "<rect x=\"" << svg::num(bx) << "\" y=\"" << svg::num(top + plot_h + 12) << "\" width=\"10\" height=\"10\" fill=\""
     << svg::kFlaggedColor << "\"/>\n";
  os << "<text x=\"" << svg::num(bx + 14) << "\" y=\"" << svg::num(top + plot_h + 21) << "\">flagged</text>\n";
  os << "</g>\n</svg>\n";
  return scale;
}

/// log10(lambda_k / lambda_1) against k, one polyline per non-degenerate neuron
/// plus the neuron mean in bold. Zero ratios are drawn at the floor value.
inline void render_spectrum_plot(std::ostream& os, const std::vector<NeuronGeometry>& neurons,
                                 double floor_log10 = -16.0) {
  int modes = 0;
  for (const auto& n : neurons) modes = std::max(modes, n.spectrum.size());
  const double left = 70, top = 30, plot_w = 480, plot_h = 300, width = left + plot_w + 30, height = top + plot_h + 60;
  auto x_of = [&](int k) { return left + (modes > 1 ? plot_w * (k - 1) / (modes - 1) : plot_w / 2); };
  auto y_of = [&](double v) { return top + plot_h * (v / floor_log10); };
  auto ratio_log = [&](const FisherSpectrum& s, int k) {
    const double r = s.eigenvalues[k - 1] / s.lambda_max;
    return r > 0.0 ? std::max(std::log10(r), floor_log10) : floor_log10;
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(width) << "\" height=\""
     << svg::num(height) << "\" viewBox=\"0 0 " << svg::num(width) << ' ' << svg::num(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  os << "<rect x=\"" << svg::num(left) << "\" y=\"" << svg::num(top) << "\" width=\"" << svg::num(plot_w)
     << "\" height=\"" << svg::num(plot_h) << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  std::vector<double> mean(static_cast<std::size_t>(modes), 0.0);
  int used = 0;
  for (const auto& n : neurons) {
    const FisherSpectrum& s = n.spectrum;
    if (s.degenerate || s.size() != modes) continue;
    ++used;
    os << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-opacity=\"0.25\" points=\"";
    for (int k = 1; k <= modes; ++k) {
      const double v = ratio_log(s, k);
      mean[static_cast<std::size_t>(k - 1)] += v;
      os << (k > 1 ? " " : "") << svg::num(x_of(k)) << ',' << svg::num(y_of(v));
    }
    os << "\"/>\n";
  }
  if (used > 0) {
    os << "<polyline fill=\"none\" stroke=\"#000000\" stroke-width=\"2\" points=\"";
    for (int k = 1; k <= modes; ++k)
      os << (k > 1 ? " " : "") << svg::num(x_of(k)) << ',' << svg::num(y_of(mean[static_cast<std::size_t>(k - 1)] / used));
    os << "\"/>\n";
  }
  os << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int d = 0; d >= static_cast<int>(floor_log10); d -= 4)
    os << "<text x=\"" << svg::num(left - 6) << "\" y=\"" << svg::num(y_of(d) + 3) << "\" text-anchor=\"end\">"
       << d << "</text>\n";
  os << "<text x=\"" << svg::num(x_of(1)) << "\" y=\"" << svg::num(top + plot_h + 14) << "\" text-anchor=\"middle\">1</text>\n";
  if (modes > 1)
    os << "<text x=\"" << svg::num(x_of(modes)) << "\" y=\"" << svg::num(top + plot_h + 14) << "\" text-anchor=\"middle\">"
       << modes << "</text>\n";
  os << "<text x=\"" << svg::num(left + plot_w / 2) << "\" y=\"" << svg::num(height - 12)
     << "\" text-anchor=\"middle\" font-size=\"12\">mode k</text>\n";
  os << "<text x=\"16\" y=\"" << svg::num(top + plot_h / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 16 " << svg::num(top + plot_h / 2) << ")\">log10(lambda_k / lambda_1)</text>\n";
  os << "</g>\n</svg>\n";
}

}  // namespace ridge
