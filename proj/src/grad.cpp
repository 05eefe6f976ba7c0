#include "vsml/grad.hpp"

#include "vsml/baselines.hpp"
#include "vsml/cloning.hpp"
#include "vsml/grid.hpp"
#include "vsml/lstm_cell.hpp"
#include "vsml/rng.hpp"

namespace vsml {

void adam_step(Vec& params, const Vec& grad, AdamState& state, const AdamConfig& cfg) {
  if (grad.size() != params.size() || state.m.size() != params.size()) {
    throw ConfigError("adam_step: shape mismatch");
  }
  if (!grad.allFinite()) throw NumericFault("adam_step gradient");
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const Vec m_hat = state.m / bc1;
  const Vec v_hat = state.v / bc2;
  params -= cfg.lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                                          Vec::Constant(params.size(), cfg.eps));
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& at,
                double step) {
  Vec g(at.size());
  Vec x = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double fd_check(const std::function<double(const Vec&)>& f, const Vec& at,
                const Vec& analytic, double step) {
  const Vec numeric = fd_gradient(f, at, step);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    if (diff <= 1e-8) continue;  // absolute floor
    const double denom = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    worst = std::max(worst, diff / denom);
  }
  return worst;
}

namespace {

// Scalar objective through one taped LSTM tick: weighted sum of [z'; h'].
// The parameter vector covers cell weights, states, and message inputs so
// every gradient path of lstm_cell_backward is exercised.
struct CellProbe {
  CellDims dims;
  Vec weight_z, weight_h;

  Eigen::Index var_count() const {
    const Eigen::Index p =
        4 * dims.state * dims.msg_in() + 4 * dims.state * dims.state + 4 * dims.state;
    return p + 2 * dims.state + dims.msg_in();
  }

  void split(const Vec& vars, LstmCellParams& p, Vec& z, Vec& h, Vec& fwd,
             Vec& bwd) const {
    p = LstmCellParams::zeros(dims);
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < p.w_input.rows(); ++r)
      for (Eigen::Index c = 0; c < p.w_input.cols(); ++c) p.w_input(r, c) = vars[at++];
    for (Eigen::Index r = 0; r < p.w_recurrent.rows(); ++r)
      for (Eigen::Index c = 0; c < p.w_recurrent.cols(); ++c)
        p.w_recurrent(r, c) = vars[at++];
    p.bias = vars.segment(at, 4 * dims.state);
    at += 4 * dims.state;
    z = vars.segment(at, dims.state);
    at += dims.state;
    h = vars.segment(at, dims.state);
    at += dims.state;
    fwd = vars.segment(at, dims.fwd_msg);
    at += dims.fwd_msg;
    bwd = vars.segment(at, dims.bwd_msg);
  }

  double value(const Vec& vars) const {
    LstmCellParams p;
    Vec z, h, fwd, bwd, z_out, h_out;
    split(vars, p, z, h, fwd, bwd);
    lstm_cell_step(p, z, h, fwd, bwd, z_out, h_out);
    return weight_z.dot(z_out) + weight_h.dot(h_out);
  }

  Vec analytic(const Vec& vars) const {
    LstmCellParams p;
    Vec z, h, fwd, bwd, z_out, h_out;
    split(vars, p, z, h, fwd, bwd);
    CellTape tape;
    lstm_cell_step_taped(p, z, h, fwd, bwd, tape, z_out, h_out);
    CellGrads acc = CellGrads::zeros(dims);
    Vec dz, dh, dmsg;
    lstm_cell_backward(p, tape, weight_z, weight_h, acc, dz, dh, dmsg);

    Vec g(var_count());
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < acc.w_input.rows(); ++r)
      for (Eigen::Index c = 0; c < acc.w_input.cols(); ++c) g[at++] = acc.w_input(r, c);
    for (Eigen::Index r = 0; r < acc.w_recurrent.rows(); ++r)
      for (Eigen::Index c = 0; c < acc.w_recurrent.cols(); ++c)
        g[at++] = acc.w_recurrent(r, c);
    g.segment(at, 4 * dims.state) = acc.bias;
    at += 4 * dims.state;
    g.segment(at, dims.state) = dz;
    at += dims.state;
    g.segment(at, dims.state) = dh;
    at += dims.state;
    g.segment(at, dims.msg_in()) = dmsg;
    return g;
  }
};

GradCheckResult check_lstm_cell(int instances, double tol, uint64_t seed) {
  GradCheckResult res{"lstm-cell", instances, 0.0, false};
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, {1, static_cast<uint64_t>(inst)}));
    CellProbe probe;
    probe.dims = CellDims{3, 2, 2};
    probe.weight_z = Vec(3);
    probe.weight_h = Vec(3);
    rng.fill_normal(probe.weight_z);
    rng.fill_normal(probe.weight_h);
    Vec vars(probe.var_count());
    rng.fill_normal(vars);
    vars *= 0.7;
    const double dev = fd_check([&](const Vec& v) { return probe.value(v); }, vars,
                                probe.analytic(vars));
    res.worst = std::max(res.worst, dev);
  }
  res.passed = res.worst < tol;
  return res;
}

GradCheckResult check_softmax_ce(int instances, double tol, uint64_t seed) {
  GradCheckResult res{"softmax-cross-entropy", instances, 0.0, false};
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, {2, static_cast<uint64_t>(inst)}));
    const int classes = 2 + rng.uniform_int(8);
    Vec logits(classes);
    rng.fill_normal(logits);
    const int label = rng.uniform_int(classes);
    const Vec analytic = softmax_cross_entropy(logits, label).grad;
    const double dev = fd_check(
        [&](const Vec& v) { return softmax_cross_entropy(v, label).loss; }, logits,
        analytic, 1e-6);
    res.worst = std::max(res.worst, dev);
  }
  res.passed = res.worst < tol;
  return res;
}

GradCheckResult check_clone_unroll(int instances, double tol, uint64_t seed) {
  GradCheckResult res{"clone-unroll", instances, 0.0, false};
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, {3, static_cast<uint64_t>(inst)}));
    const CellDims dims{4, 2, 2};
    MetaParams params = MetaParams::init(dims, rng.next_u64());
    const double x = rng.normal();
    const double e = rng.normal();
    const double w = rng.normal();
    const double b = rng.normal();
    // A mild alpha keeps the 1/alpha^2 loss terms well conditioned for the
    // finite-difference probe; the backward code path is alpha-independent.
    const double alpha = 0.5;
    const CloningTargets targets = make_targets(x, w, b, e, alpha);
    CloningConfig cfg;
    cfg.dims = dims;
    cfg.alpha = alpha;

    auto loss_of = [&](const Vec& flat) {
      const MetaParams p = MetaParams::unflatten(dims, flat);
      return clone_sample_loss(p, cfg, x, w, b, e, targets);
    };
    ParamGrads grads = ParamGrads::zeros(dims);
    clone_sample_backward(params, cfg, x, w, b, e, targets, grads);
    const double dev = fd_check(loss_of, params.flatten(), grads.flatten());
    res.worst = std::max(res.worst, dev);
  }
  res.passed = res.worst < tol;
  return res;
}

GradCheckResult check_sgd_learner(int instances, double tol, uint64_t seed,
                                  bool deep) {
  GradCheckResult res{deep ? "sgd-deep-net" : "sgd-shallow-net", instances, 0.0,
                      false};
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, {4, static_cast<uint64_t>(deep), static_cast<uint64_t>(inst)}));
    SgdConfig cfg;
    cfg.input_dim = 5;
    cfg.n_classes = 3;
    cfg.hidden = 4;
    cfg.arch = deep ? SgdConfig::Arch::deep : SgdConfig::Arch::shallow;
    SgdLearner learner(cfg, rng.next_u64());
    Vec x(cfg.input_dim);
    rng.fill_normal(x);
    const int label = rng.uniform_int(cfg.n_classes);
    const Vec flat = learner.flatten();
    const Vec analytic = learner.gradient(x, label);
    auto loss_of = [&](const Vec& v) {
      SgdLearner probe(cfg, 0);
      probe.unflatten(v);
      return probe.forward_loss(x, label);
    };
    const double dev = fd_check(loss_of, flat, analytic);
    res.worst = std::max(res.worst, dev);
  }
  res.passed = res.worst < tol;
  return res;
}

GradCheckResult check_linear(int instances, double tol, uint64_t seed) {
  GradCheckResult res{"linear-function", instances, 0.0, false};
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, {5, static_cast<uint64_t>(inst)}));
    Vec coeff(6), at(6);
    rng.fill_normal(coeff);
    rng.fill_normal(at);
    const double dev =
        fd_check([&](const Vec& v) { return coeff.dot(v); }, at, coeff);
    res.worst = std::max(res.worst, dev);
  }
  res.passed = res.worst < 1e-8 && res.worst < tol;  // exact for linear
  return res;
}

}  // namespace

std::vector<GradCheckResult> run_grad_check_suite(int instances_per_check,
                                                  double tolerance, uint64_t seed) {
  std::vector<GradCheckResult> out;
  out.push_back(check_linear(instances_per_check, tolerance, seed));
  out.push_back(check_softmax_ce(instances_per_check, tolerance, seed));
  out.push_back(check_lstm_cell(instances_per_check, tolerance, seed));
  out.push_back(check_clone_unroll(instances_per_check, tolerance, seed));
  out.push_back(check_sgd_learner(instances_per_check, tolerance, seed, false));
  out.push_back(check_sgd_learner(instances_per_check, tolerance, seed, true));
  return out;
}

}  // namespace vsml
