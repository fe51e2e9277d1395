#include "ranklab/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ranklab/core/error.hpp"

namespace ranklab {

namespace {

constexpr double kWidth = 880.0;
constexpr double kHeight = 560.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 830.0;
constexpr double kTop = 60.0;
constexpr double kBottom = 470.0;

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

std::string px(double v) { return fmt(v, "%.2f"); }

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
};

// Tick spacing from the 1-2-5 ladder covering the span with 4-8 ticks.
std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
  for (double mult : {1.0, 2.0, 5.0, 10.0, 20.0}) {
    if (span / (step * mult) <= 8.0) {
      step *= mult;
      break;
    }
  }
  std::vector<double> ticks;
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + 1e-9 * span; t += step) {
    double v = t;
    if (std::abs(v) < 1e-12 * span) v = 0.0;
    ticks.push_back(v);
  }
  return ticks;
}

std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> ticks;
  const int e_lo = static_cast<int>(std::floor(std::log10(lo) - 1e-9));
  const int e_hi = static_cast<int>(std::ceil(std::log10(hi) + 1e-9));
  for (int e = e_lo; e <= e_hi; ++e) {
    for (double m : {1.0, 2.0, 5.0}) {
      const double v = m * std::pow(10.0, e);
      if (v >= lo * (1.0 - 1e-9) && v <= hi * (1.0 + 1e-9)) ticks.push_back(v);
    }
  }
  if (ticks.size() > 10) {
    std::vector<double> major;
    for (double v : ticks) {
      const double frac = v / std::pow(10.0, std::floor(std::log10(v) + 1e-9));
      if (std::abs(frac - 1.0) < 1e-6) major.push_back(v);
    }
    if (major.size() >= 2) return major;
  }
  return ticks;
}

}  // namespace

void write_svg_plot(const std::string& path, const SvgPlot& plot) {
  Range xr, yr;
  for (const SvgSeries& s : plot.series) {
    if (s.x.size() != s.y.size())
      throw DataError("svg series '" + s.label + "' has mismatched x/y sizes");
    if (!s.y_err.empty() && s.y_err.size() != s.y.size())
      throw DataError("svg series '" + s.label + "' has mismatched error bars");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (plot.log_x && s.x[i] <= 0.0)
        throw DataError("log-x plot requires positive x values");
      xr.add(s.x[i]);
      yr.add(s.y[i]);
      if (!s.y_err.empty()) {
        yr.add(s.y[i] - s.y_err[i]);
        yr.add(s.y[i] + s.y_err[i]);
      }
    }
  }
  for (const SvgRefLine& r : plot.ref_lines) yr.add(r.y);
  if (!xr.valid() || !yr.valid())
    throw DataError("svg plot '" + plot.title + "' has no finite data");
  if (xr.lo == xr.hi) {
    xr.lo -= plot.log_x ? 0.5 * xr.lo : 1.0;
    xr.hi += plot.log_x ? 0.5 * xr.hi : 1.0;
  }
  if (yr.lo == yr.hi) {
    yr.lo -= 1.0;
    yr.hi += 1.0;
  }
  {
    const double pad = 0.05 * (yr.hi - yr.lo);
    yr.lo -= pad;
    yr.hi += pad;
    if (!plot.log_x) {
      const double xpad = 0.03 * (xr.hi - xr.lo);
      xr.lo -= xpad;
      xr.hi += xpad;
    } else {
      xr.lo /= 1.15;
      xr.hi *= 1.15;
    }
  }

  const auto x_pos = [&](double v) {
    const double t = plot.log_x
                         ? (std::log(v) - std::log(xr.lo)) /
                               (std::log(xr.hi) - std::log(xr.lo))
                         : (v - xr.lo) / (xr.hi - xr.lo);
    return kLeft + t * (kRight - kLeft);
  };
  const auto y_pos = [&](double v) {
    const double t = (v - yr.lo) / (yr.hi - yr.lo);
    return kBottom - t * (kBottom - kTop);
  };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth)
      << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth)
      << " " << fmt(kHeight) << "\">\n";

  // Embedded data table: one line per point, so the plot is self-describing.
  out << "<desc>\n";
  for (const SvgSeries& s : plot.series) {
    out << escape_xml(s.label) << ":";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << " (" << fmt(s.x[i], "%.10g") << "," << fmt(s.y[i], "%.10g");
      if (!s.y_err.empty()) out << "+-" << fmt(s.y_err[i], "%.10g");
      out << ")";
    }
    out << "\n";
  }
  for (const SvgRefLine& r : plot.ref_lines)
    out << escape_xml(r.label) << ": y=" << fmt(r.y, "%.10g") << "\n";
  out << "</desc>\n";

  out << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << px((kLeft + kRight) / 2) << "\" y=\"30\" "
      << "font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">"
      << escape_xml(plot.title) << "</text>\n";

  // Grid and ticks.
  const std::vector<double> xticks =
      plot.log_x ? log_ticks(xr.lo, xr.hi) : linear_ticks(xr.lo, xr.hi);
  const std::vector<double> yticks = linear_ticks(yr.lo, yr.hi);
  out << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double t : xticks)
    out << "<line x1=\"" << px(x_pos(t)) << "\" y1=\"" << px(kTop)
        << "\" x2=\"" << px(x_pos(t)) << "\" y2=\"" << px(kBottom) << "\"/>\n";
  for (double t : yticks)
    out << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(y_pos(t))
        << "\" x2=\"" << px(kRight) << "\" y2=\"" << px(y_pos(t)) << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
  for (double t : xticks)
    out << "<text x=\"" << px(x_pos(t)) << "\" y=\"" << px(kBottom + 18)
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  for (double t : yticks)
    out << "<text x=\"" << px(kLeft - 8) << "\" y=\"" << px(y_pos(t) + 4)
        << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  out << "</g>\n";
  out << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\""
      << px(kRight - kLeft) << "\" height=\"" << px(kBottom - kTop)
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << px((kLeft + kRight) / 2) << "\" y=\""
      << px(kBottom + 42)
      << "\" font-family=\"sans-serif\" font-size=\"14\" "
         "text-anchor=\"middle\">"
      << escape_xml(plot.x_label) << "</text>\n";
  out << "<text x=\"22\" y=\"" << px((kTop + kBottom) / 2)
      << "\" font-family=\"sans-serif\" font-size=\"14\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 22 "
      << px((kTop + kBottom) / 2) << ")\">" << escape_xml(plot.y_label)
      << "</text>\n";

  for (const SvgRefLine& r : plot.ref_lines) {
    const double y = y_pos(r.y);
    out << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(y) << "\" x2=\""
        << px(kRight) << "\" y2=\"" << px(y) << "\" stroke=\"" << r.color
        << "\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    out << "<text x=\"" << px(kRight - 4) << "\" y=\"" << px(y - 6)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << r.color
        << "\" text-anchor=\"end\">" << escape_xml(r.label) << "</text>\n";
  }

  for (const SvgSeries& s : plot.series) {
    if (!s.y_err.empty()) {
      out << "<g stroke=\"" << s.color << "\" stroke-width=\"1\">\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double x = x_pos(s.x[i]);
        out << "<line x1=\"" << px(x) << "\" y1=\""
            << px(y_pos(s.y[i] - s.y_err[i])) << "\" x2=\"" << px(x)
            << "\" y2=\"" << px(y_pos(s.y[i] + s.y_err[i])) << "\"/>\n";
        out << "<line x1=\"" << px(x - 4) << "\" y1=\""
            << px(y_pos(s.y[i] - s.y_err[i])) << "\" x2=\"" << px(x + 4)
            << "\" y2=\"" << px(y_pos(s.y[i] - s.y_err[i])) << "\"/>\n";
        out << "<line x1=\"" << px(x - 4) << "\" y1=\""
            << px(y_pos(s.y[i] + s.y_err[i])) << "\" x2=\"" << px(x + 4)
            << "\" y2=\"" << px(y_pos(s.y[i] + s.y_err[i])) << "\"/>\n";
      }
      out << "</g>\n";
    }
    if (s.x.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i) out << ' ';
        out << px(x_pos(s.x[i])) << ',' << px(y_pos(s.y[i]));
      }
      out << "\"/>\n";
    }
    if (s.markers) {
      out << "<g fill=\"" << s.color << "\">\n";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << "<circle cx=\"" << px(x_pos(s.x[i])) << "\" cy=\""
            << px(y_pos(s.y[i])) << "\" r=\"3\"/>\n";
      out << "</g>\n";
    }
  }

  // Legend in the top-left corner of the plot area.
  double ly = kTop + 16;
  out << "<g font-family=\"sans-serif\" font-size=\"13\">\n";
  for (const SvgSeries& s : plot.series) {
    out << "<line x1=\"" << px(kLeft + 10) << "\" y1=\"" << px(ly - 4)
        << "\" x2=\"" << px(kLeft + 34) << "\" y2=\"" << px(ly - 4)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << px(kLeft + 40) << "\" y=\"" << px(ly) << "\">"
        << escape_xml(s.label) << "</text>\n";
    ly += 18;
  }
  out << "</g>\n";
  out << "</svg>\n";

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  file << out.str();
  file.flush();
  if (!file) throw IoError("write error on '" + path + "'");
}

}  // namespace ranklab
