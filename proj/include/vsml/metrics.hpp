#pragma once

#include <ostream>

#include "vsml/common.hpp"

namespace vsml {

// One online-learning step: the prediction made when the example was fed.
struct MetricRow {
  long step = 0;
  double loss = 0.0;
  int correct = 0;
  int predicted = -1;
  int label = -1;
  Vec probs;
};

struct MetricTrace {
  std::vector<MetricRow> rows;
  int class_count = 0;
  bool fault = false;    // trace truncated by a numeric fault
  long fault_step = -1;

  std::vector<int> correctness() const;
  double final_cumulative_accuracy() const;
};

// Columns: step,loss,correct,predicted,label,prob_0..prob_{B-1}.
void write_metric_csv(std::ostream& out, const MetricTrace& trace);
MetricTrace read_metric_csv(std::istream& in);

// Deterministic float formatting shared by all CSV and SVG writers.
std::string format_double(double v);

}  // namespace vsml
