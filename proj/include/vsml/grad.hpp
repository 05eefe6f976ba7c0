#pragma once

#include <functional>

#include "vsml/common.hpp"

namespace vsml {

struct AdamConfig {
  double lr = 0.025;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators plus the step counter.
struct AdamState {
  Vec m;
  Vec v;
  long t = 0;

  static AdamState init(Eigen::Index n) {
    return AdamState{Vec::Zero(n), Vec::Zero(n), 0};
  }
};

// Standard bias-corrected Adam update, in place.
void adam_step(Vec& params, const Vec& grad, AdamState& state, const AdamConfig& cfg);

// Central finite differences of a scalar function.
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& at,
                double step = 1e-5);

// Worst relative deviation between an analytic gradient and central
// differences, with an absolute floor of 1e-8 in the denominator.
double fd_check(const std::function<double(const Vec&)>& f, const Vec& at,
                const Vec& analytic, double step = 1e-5);

// Named gradient checks over seeded random instances; used by the
// `grad-check` CLI subcommand and the test suite.
struct GradCheckResult {
  std::string name;
  int instances = 0;
  double worst = 0.0;
  bool passed = false;
};
std::vector<GradCheckResult> run_grad_check_suite(int instances_per_check,
                                                  double tolerance, uint64_t seed);

}  // namespace vsml
