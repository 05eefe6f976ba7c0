#include "vsml/svg_plot.hpp"

#include <algorithm>
#include <sstream>

namespace vsml {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr int kPaletteSize = 10;

struct Frame {
  double x0, x1, y0, y1;   // data range
  int left, right, top, bottom;  // pixel margins
  int width, height;

  double px(double x) const {
    const double span = x1 - x0 == 0.0 ? 1.0 : x1 - x0;
    return left + (x - x0) / span * (width - left - right);
  }
  double py(double y) const {
    const double span = y1 - y0 == 0.0 ? 1.0 : y1 - y0;
    return height - bottom - (y - y0) / span * (height - top - bottom);
  }
};

void axes(std::ostringstream& svg, const Frame& f, const PlotSpec& spec) {
  svg << "<rect width=\"" << f.width << "\" height=\"" << f.height
      << "\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\""
      << f.width - f.right << "\" y2=\"" << f.height - f.bottom
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left
      << "\" y2=\"" << f.height - f.bottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double tx = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double ty = f.y0 + (f.y1 - f.y0) * i / 4.0;
    svg << "<text x=\"" << format_double(f.px(tx)) << "\" y=\"" << f.height - f.bottom + 16
        << "\" font-size=\"11\" font-family=\"monospace\" text-anchor=\"middle\">"
        << format_double(tx) << "</text>\n";
    svg << "<text x=\"" << f.left - 6 << "\" y=\"" << format_double(f.py(ty) + 4)
        << "\" font-size=\"11\" font-family=\"monospace\" text-anchor=\"end\">"
        << format_double(ty) << "</text>\n";
  }
  if (!spec.title.empty()) {
    svg << "<text x=\"" << f.width / 2 << "\" y=\"16\" font-size=\"14\""
        << " font-family=\"monospace\" text-anchor=\"middle\">" << spec.title
        << "</text>\n";
  }
  svg << "<text x=\"" << f.width / 2 << "\" y=\"" << f.height - 6
      << "\" font-size=\"12\" font-family=\"monospace\" text-anchor=\"middle\">"
      << spec.x_label << "</text>\n";
  if (!spec.y_label.empty()) {
    svg << "<text x=\"14\" y=\"" << f.height / 2
        << "\" font-size=\"12\" font-family=\"monospace\" text-anchor=\"middle\""
        << " transform=\"rotate(-90 14 " << f.height / 2 << ")\">" << spec.y_label
        << "</text>\n";
  }
}

Frame fit_frame(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  Frame f{0.0, 1.0, 0.0, 1.0, 56, 16, 28, 40, spec.width, spec.height};
  bool any = false;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        f.x0 = f.x1 = s.x[i];
        f.y0 = f.y1 = s.y[i];
        any = true;
      }
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  }
  if (f.y0 == f.y1) f.y1 = f.y0 + 1.0;
  if (f.x0 == f.x1) f.x1 = f.x0 + 1.0;
  return f;
}

}  // namespace

std::string render_line_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  std::ostringstream svg;
  const Frame f = fit_frame(series, spec);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width
      << "\" height=\"" << f.height << "\">\n";
  axes(svg, f, spec);
  for (size_t s = 0; s < series.size(); ++s) {
    if (series[s].x.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[s % kPaletteSize]
        << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < series[s].x.size(); ++i) {
      if (i > 0) svg << ' ';
      svg << format_double(f.px(series[s].x[i])) << ',' << format_double(f.py(series[s].y[i]));
    }
    svg << "\"/>\n";
  }
  // legend
  for (size_t s = 0; s < series.size(); ++s) {
    const int y = f.top + 14 * static_cast<int>(s);
    svg << "<rect x=\"" << f.width - f.right - 150 << "\" y=\"" << y
        << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % kPaletteSize]
        << "\"/>\n";
    svg << "<text x=\"" << f.width - f.right - 136 << "\" y=\"" << y + 9
        << "\" font-size=\"11\" font-family=\"monospace\">" << series[s].label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_introspection_plot(const MetricTrace& trace, const PlotSpec& spec) {
  std::vector<PlotSeries> series(static_cast<size_t>(trace.class_count));
  for (int c = 0; c < trace.class_count; ++c) {
    series[static_cast<size_t>(c)].label = "class " + std::to_string(c);
  }
  for (const auto& row : trace.rows) {
    for (int c = 0; c < trace.class_count; ++c) {
      series[static_cast<size_t>(c)].x.push_back(static_cast<double>(row.step));
      series[static_cast<size_t>(c)].y.push_back(row.probs[c]);
    }
  }
  std::ostringstream svg;
  const Frame f = fit_frame(series, spec);
  std::string body = render_line_plot(series, spec);
  body.erase(body.rfind("</svg>"));
  svg << body;
  for (const auto& row : trace.rows) {
    svg << "<rect x=\"" << format_double(f.px(static_cast<double>(row.step)) - 3)
        << "\" y=\"" << format_double(f.py(row.probs[row.label]) - 3)
        << "\" width=\"6\" height=\"6\" fill=\"none\" stroke=\""
        << kPalette[row.label % kPaletteSize] << "\"/>\n";
    svg << "<circle cx=\"" << format_double(f.px(static_cast<double>(row.step)))
        << "\" cy=\"" << format_double(f.py(row.probs[row.predicted])) << "\" r=\"4\""
        << " fill=\"none\" stroke=\"" << kPalette[row.predicted % kPaletteSize]
        << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace vsml
