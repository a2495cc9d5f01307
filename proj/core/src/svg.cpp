#include "edecoh/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace edecoh {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(hi >= lo)) lo = 0.0, hi = 1.0;
    if (hi == lo) {
      const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
      lo -= pad;
      hi += pad;
    }
  }
};

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title) << "</text>\n";
}

}  // namespace

std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotAxes& axes) {
  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v * axes.x_scale);
    for (double v : s.y) yr.add(v * axes.y_scale);
  }
  xr.finish();
  yr.finish();
  const double pad = 0.05 * (yr.hi - yr.lo);
  yr.lo -= pad;
  yr.hi += pad;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream out;
  header(out, axes.title);
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  const double xs = nice_step(xr.hi - xr.lo, 6);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-9 * xs; t += xs) {
    out << "<line x1=\"" << num(px(t)) << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << num(px(t))
        << "\" y2=\"" << kTop + plot_h + 5 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(px(t)) << "\" y=\"" << kTop + plot_h + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << num(t)
        << "</text>\n";
  }
  const double ys = nice_step(yr.hi - yr.lo, 6);
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-9 * ys; t += ys) {
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py(t)) << "\" x2=\"" << kLeft
        << "\" y2=\"" << num(py(t)) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(t) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << num(t)
        << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape(axes.x_label) << "</text>\n"
      << "<text transform=\"translate(20," << kTop + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape(axes.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::ostringstream points;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      const double x = s.x[i] * axes.x_scale;
      const double y = s.y[i] * axes.y_scale;
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      points << num(px(x)) << ',' << num(py(y)) << ' ';
      if (s.markers)
        out << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\""
            << s.color << "\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\""
        << points.str() << "\"/>\n";
    const double ly = kTop + 15 + 20.0 * static_cast<double>(k);
    out << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\""
        << kWidth - kRight + 30 << "\" y2=\"" << ly << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kWidth - kRight + 35 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_heatmap(const Diffractogram& gram, const std::string& title) {
  std::ostringstream out;
  header(out, title);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  Range xr;
  for (const auto& row : gram.rows)
    for (double x : row.x) xr.add(x);
  xr.finish();
  const std::size_t n = gram.rows.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& row = gram.rows[k];
    // Highest Y at the top.
    const double band = plot_h / static_cast<double>(n);
    const double y = kTop + plot_h - band * static_cast<double>(k + 1);
    for (std::size_t i = 0; i + 1 < row.x.size(); ++i) {
      const double v = std::clamp(row.values[i], 0.0, 1.0);
      const int level = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      const double x0 = kLeft + (row.x[i] - xr.lo) / (xr.hi - xr.lo) * plot_w;
      const double x1 = kLeft + (row.x[i + 1] - xr.lo) / (xr.hi - xr.lo) * plot_w;
      out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\"" << num(x1 - x0 + 0.3)
          << "\" height=\"" << num(band + 0.3) << "\" fill=\"rgb(" << level << ',' << level << ','
          << level << ")\"/>\n";
    }
  }
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (n > 0) {
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << kTop + plot_h
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">Y="
        << num(gram.rows.front().y * 1e6) << " um</text>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << kTop + 12
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">Y="
        << num(gram.rows.back().y * 1e6) << " um</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">x (um), "
      << num(xr.lo * 1e6) << " to " << num(xr.hi * 1e6) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace edecoh
