#include "vsml/metrics.hpp"

#include <cstdio>
#include <istream>
#include <sstream>

#include "vsml/tasks.hpp"

namespace vsml {

std::vector<int> MetricTrace::correctness() const {
  std::vector<int> c;
  c.reserve(rows.size());
  for (const auto& r : rows) c.push_back(r.correct);
  return c;
}

double MetricTrace::final_cumulative_accuracy() const {
  if (rows.empty()) return 0.0;
  return cumulative_accuracy(correctness()).back();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_metric_csv(std::ostream& out, const MetricTrace& trace) {
  out << "step,loss,correct,predicted,label";
  for (int c = 0; c < trace.class_count; ++c) out << ",prob_" << c;
  out << "\n";
  for (const auto& r : trace.rows) {
    out << r.step << ',' << format_double(r.loss) << ',' << r.correct << ','
        << r.predicted << ',' << r.label;
    for (Eigen::Index c = 0; c < r.probs.size(); ++c) {
      out << ',' << format_double(r.probs[c]);
    }
    out << "\n";
  }
  if (trace.fault) out << "# numeric fault at step " << trace.fault_step << "\n";
}

MetricTrace read_metric_csv(std::istream& in) {
  MetricTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("metric csv: empty file");
  int columns = 1;
  for (char ch : line) {
    if (ch == ',') ++columns;
  }
  trace.class_count = columns - 5;
  if (trace.class_count < 0 || line.rfind("step,loss,correct,predicted,label", 0) != 0) {
    throw ConfigError("metric csv: unexpected header '" + line + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string field;
    MetricRow row;
    std::getline(ss, field, ',');
    row.step = std::stol(field);
    std::getline(ss, field, ',');
    row.loss = std::stod(field);
    std::getline(ss, field, ',');
    row.correct = std::stoi(field);
    std::getline(ss, field, ',');
    row.predicted = std::stoi(field);
    std::getline(ss, field, ',');
    row.label = std::stoi(field);
    row.probs.resize(trace.class_count);
    for (int c = 0; c < trace.class_count; ++c) {
      std::getline(ss, field, ',');
      row.probs[c] = std::stod(field);
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

}  // namespace vsml
