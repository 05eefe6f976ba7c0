#pragma once

#include "vsml/metrics.hpp"

namespace vsml {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label = "step";
  std::string y_label;
  int width = 800;
  int height = 480;
};

// Deterministic SVG line chart: fixed fonts and ids, values formatted with
// the shared writer, so identical inputs give byte-identical files.
std::string render_line_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec);

// Per-class output-probability lines with markers on the ground-truth class
// (square) and the predicted class (circle).
std::string render_introspection_plot(const MetricTrace& trace, const PlotSpec& spec);

}  // namespace vsml
