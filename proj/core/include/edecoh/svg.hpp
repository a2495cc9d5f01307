#pragma once

#include <string>
#include <vector>

#include "edecoh/analysis.hpp"

namespace edecoh {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = true;
};

struct PlotAxes {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_scale = 1.0;  // multiply data before labelling ticks
  double y_scale = 1.0;
};

/// Line plot with linear axes, ticks and a legend.
std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotAxes& axes);

/// Gray-scale heat map of a diffractogram, one band per row.
std::string svg_heatmap(const Diffractogram& gram, const std::string& title);

}  // namespace edecoh
