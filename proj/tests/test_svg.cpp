#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsml/rng.hpp"

#include "vsml/experiment.hpp"
#include "vsml/svg_plot.hpp"

using namespace vsml;

TEST_CASE("no series renders an axes-only SVG") {
  PlotSpec spec;
  spec.title = "empty";
  const std::string svg = render_line_plot({}, spec);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<line") != std::string::npos);       // axes
  CHECK(svg.find("<polyline") == std::string::npos);   // no data
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("two series render two polylines with a legend") {
  PlotSeries a{"alpha", {0, 1, 2}, {0.1, 0.5, 0.9}};
  PlotSeries b{"beta", {0, 1, 2}, {0.9, 0.4, 0.2}};
  const std::string svg = render_line_plot({a, b}, PlotSpec{});
  size_t count = 0, at = 0;
  while ((at = svg.find("<polyline", at)) != std::string::npos) {
    ++count;
    ++at;
  }
  CHECK(count == 2);
  CHECK(svg.find(">alpha<") != std::string::npos);
  CHECK(svg.find(">beta<") != std::string::npos);
}

TEST_CASE("identical inputs give byte-identical SVGs") {
  PlotSeries a{"series", {0, 1, 2, 3}, {0.25, 0.5, 0.125, 0.75}};
  PlotSpec spec;
  spec.title = "determinism";
  CHECK(render_line_plot({a}, spec) == render_line_plot({a}, spec));
}

TEST_CASE("introspection plots mark truth and prediction per step") {
  MetricTrace trace;
  trace.class_count = 3;
  for (int t = 0; t < 4; ++t) {
    MetricRow row;
    row.step = t;
    row.label = t % 3;
    row.predicted = (t + 1) % 3;
    row.probs = Vec::Constant(3, 1.0 / 3.0);
    trace.rows.push_back(row);
  }
  const std::string svg = render_introspection_plot(trace, PlotSpec{});
  size_t rects = 0, circles = 0, at = 0;
  while ((at = svg.find("<rect x=", at)) != std::string::npos) {
    ++rects;
    ++at;
  }
  at = 0;
  while ((at = svg.find("<circle", at)) != std::string::npos) {
    ++circles;
    ++at;
  }
  CHECK(rects >= 4);  // one truth marker per step (plus legend boxes)
  CHECK(circles == 4);
}

TEST_CASE("metric traces round-trip through their CSV form") {
  MetricTrace trace;
  trace.class_count = 2;
  Rng rng(6);
  for (int t = 0; t < 5; ++t) {
    MetricRow row;
    row.step = t;
    row.loss = std::abs(rng.normal());
    row.correct = t % 2;
    row.predicted = t % 2;
    row.label = 1;
    row.probs = Vec(2);
    row.probs << 0.25, 0.75;
    trace.rows.push_back(row);
  }
  std::stringstream ss;
  write_metric_csv(ss, trace);
  const MetricTrace back = read_metric_csv(ss);
  REQUIRE(back.rows.size() == 5);
  CHECK(back.class_count == 2);
  for (int t = 0; t < 5; ++t) {
    CHECK(back.rows[static_cast<size_t>(t)].predicted ==
          trace.rows[static_cast<size_t>(t)].predicted);
    CHECK(back.rows[static_cast<size_t>(t)].probs[1] == doctest::Approx(0.75));
  }
}

TEST_CASE("render-plot command validates its input schema") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "vsml_svg_test").string();
  fs::create_directories(dir);

  SUBCASE("valid learning-curve CSV renders deterministically") {
    const std::string csv = dir + "/curve.csv";
    {
      std::ofstream out(csv);
      out << "step,mean_cum_acc\n0,0.5\n1,0.625\n2,0.75\n";
    }
    const std::string out1 = dir + "/a.svg";
    const std::string out2 = dir + "/b.svg";
    CHECK(cmd_render_plot(csv, "learning-curve", out1, "curve") == kExitOk);
    CHECK(cmd_render_plot(csv, "learning-curve", out2, "curve") == kExitOk);
    std::ifstream f1(out1), f2(out2);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {});
    const std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(!s1.empty());
    CHECK(s1 == s2);
  }

  SUBCASE("rows with missing columns are named in the error") {
    const std::string csv = dir + "/short.csv";
    {
      std::ofstream out(csv);
      out << "step,loss,acc\n0,0.5\n";
    }
    CHECK_THROWS_WITH_AS(cmd_render_plot(csv, "learning-curve", dir + "/c.svg", ""),
                         doctest::Contains("missing column 'acc'"), ConfigError);
  }

  fs::remove_all(dir);
}
