#pragma once

// Static vector plots written by hand: a fixed-size SVG line chart with axes,
// legend, optional log-scale x, horizontal reference lines, error bars, and
// the plotted numbers embedded as a text block so the figure carries its own
// data. No timestamps or other run metadata — identical inputs give
// byte-identical files.

#include <string>
#include <vector>

namespace ranklab {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_err;  // empty, or one symmetric half-width per point
  std::string color;          // CSS color, e.g. "#1f77b4"
  bool markers = true;
};

struct SvgRefLine {
  double y = 0.0;
  std::string label;
  std::string color = "#d62728";
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;  // requires all x > 0
  std::vector<SvgSeries> series;
  std::vector<SvgRefLine> ref_lines;
};

void write_svg_plot(const std::string& path, const SvgPlot& plot);

}  // namespace ranklab
