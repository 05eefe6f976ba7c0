#include "vsml/baselines.hpp"

namespace vsml {

namespace {

CellDims meta_rnn_dims(const MetaRnnConfig& cfg) {
  // Whole input arrives through the "forward" slot; no backward input.
  return CellDims{cfg.hidden, cfg.input_dim + cfg.n_classes, 0};
}

}  // namespace

MetaRnnLearner::MetaRnnLearner(const MetaRnnConfig& cfg) : cfg_(cfg) {
  if (cfg.input_dim < 1 || cfg.n_classes < 1 || cfg.hidden < 1) {
    throw ConfigError("meta-rnn: input_dim, n_classes, hidden must be positive");
  }
  cell_ = LstmCellParams::zeros(meta_rnn_dims(cfg));
  w_out_ = Mat::Zero(cfg.n_classes, cfg.hidden);
  b_out_ = Vec::Zero(cfg.n_classes);
  z_ = Vec::Zero(cfg.hidden);
  h_ = Vec::Zero(cfg.hidden);
  prev_error_ = Vec::Zero(cfg.n_classes);
}

int MetaRnnLearner::param_count(const MetaRnnConfig& cfg) {
  const CellDims d = meta_rnn_dims(cfg);
  return 4 * d.state * d.msg_in() + 4 * d.state * d.state + 4 * d.state +
         cfg.n_classes * cfg.hidden + cfg.n_classes;
}

Vec MetaRnnLearner::init_params(const MetaRnnConfig& cfg, uint64_t seed) {
  Rng rng(derive_seed(seed, {0x6d726e6e}));
  const LstmCellParams cell = LstmCellParams::init(meta_rnn_dims(cfg), rng);
  Mat w_out(cfg.n_classes, cfg.hidden);
  const double a = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  rng.fill_uniform(w_out, -a, a);

  Vec flat(param_count(cfg));
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < cell.w_input.rows(); ++r)
    for (Eigen::Index c = 0; c < cell.w_input.cols(); ++c) flat[at++] = cell.w_input(r, c);
  for (Eigen::Index r = 0; r < cell.w_recurrent.rows(); ++r)
    for (Eigen::Index c = 0; c < cell.w_recurrent.cols(); ++c)
      flat[at++] = cell.w_recurrent(r, c);
  flat.segment(at, cell.bias.size()) = cell.bias;
  at += cell.bias.size();
  for (Eigen::Index r = 0; r < w_out.rows(); ++r)
    for (Eigen::Index c = 0; c < w_out.cols(); ++c) flat[at++] = w_out(r, c);
  flat.segment(at, cfg.n_classes).setZero();
  return flat;
}

void MetaRnnLearner::set_params(const Vec& flat) {
  if (flat.size() != param_count()) throw ConfigError("meta-rnn: parameter size mismatch");
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < cell_.w_input.rows(); ++r)
    for (Eigen::Index c = 0; c < cell_.w_input.cols(); ++c) cell_.w_input(r, c) = flat[at++];
  for (Eigen::Index r = 0; r < cell_.w_recurrent.rows(); ++r)
    for (Eigen::Index c = 0; c < cell_.w_recurrent.cols(); ++c)
      cell_.w_recurrent(r, c) = flat[at++];
  cell_.bias = flat.segment(at, cell_.bias.size());
  at += cell_.bias.size();
  for (Eigen::Index r = 0; r < w_out_.rows(); ++r)
    for (Eigen::Index c = 0; c < w_out_.cols(); ++c) w_out_(r, c) = flat[at++];
  b_out_ = flat.segment(at, b_out_.size());
}

void MetaRnnLearner::reset(uint64_t seed) {
  Rng rng(derive_seed(seed, {0x737461746573}));
  rng.fill_normal(z_);
  rng.fill_normal(h_);
  prev_error_.setZero();
}

StepResult MetaRnnLearner::step(const Vec& x_padded, std::optional<int> label,
                                int task_classes) {
  if (x_padded.size() != cfg_.input_dim) {
    throw ConfigError("meta-rnn: input must be padded to " +
                      std::to_string(cfg_.input_dim));
  }
  if (task_classes < 1 || task_classes > cfg_.n_classes) {
    throw ConfigError("meta-rnn: task class count exceeds readout size");
  }
  Vec msg(cfg_.input_dim + cfg_.n_classes);
  msg << x_padded, prev_error_;
  Vec z_next(cfg_.hidden), h_next(cfg_.hidden);
  const Vec empty(0);
  lstm_cell_step(cell_, z_, h_, msg, empty, z_next, h_next);
  z_ = std::move(z_next);
  h_ = std::move(h_next);
  if (!z_.allFinite() || !h_.allFinite()) {
    throw NumericFault("meta-rnn state");
  }

  const Vec raw = w_out_ * h_ + b_out_;
  StepResult res;
  res.logits.resize(task_classes);
  for (int c = 0; c < task_classes; ++c) res.logits[c] = squash_logit(raw[c]);

  SoftmaxLoss sl = softmax_cross_entropy(res.logits, label.value_or(0));
  res.probs = sl.probs;
  if (label.has_value()) {
    res.loss = sl.loss;
    // Error input arrives one step delayed: the only causal option.
    prev_error_.setZero();
    prev_error_.head(task_classes) = sl.grad;
  } else {
    res.loss = std::numeric_limits<double>::quiet_NaN();
  }
  Eigen::Index arg = 0;
  res.logits.maxCoeff(&arg);
  res.predicted = static_cast<int>(arg);
  res.correct = label.has_value() && res.predicted == *label;
  return res;
}

MetaRnnEsObjective::MetaRnnEsObjective(MetaRnnConfig cfg, TaskDistribution tasks,
                                       const DatasetStore* store, int episode_length)
    : cfg_(cfg), tasks_(std::move(tasks)), store_(store), episode_length_(episode_length) {
  tasks_.validate();
}

int MetaRnnEsObjective::param_count() const { return MetaRnnLearner::param_count(cfg_); }

FitnessRecord MetaRnnEsObjective::evaluate(const Vec& flat, uint64_t episode_seed) const {
  const TaskSpec& task = tasks_.sample(episode_seed);
  const int in_dim = task.resolved_input_dim(store_);
  const int classes = task.resolved_class_count(store_);
  if (in_dim > cfg_.input_dim || classes > cfg_.n_classes) {
    throw ConfigError("meta-rnn: task dims (" + std::to_string(in_dim) + "," +
                      std::to_string(classes) + ") exceed the padded sizes (" +
                      std::to_string(cfg_.input_dim) + "," +
                      std::to_string(cfg_.n_classes) + "); the Meta RNN cannot re-shape");
  }

  MetaRnnLearner learner(cfg_);
  learner.set_params(flat);
  learner.reset(derive_seed(episode_seed, {0x696e6974}));
  EpisodeStream stream(task, store_, episode_seed);

  FitnessRecord rec;
  int correct = 0;
  Vec x_pad = Vec::Zero(cfg_.input_dim);
  for (int t = 0; t < episode_length_; ++t) {
    const Example ex = stream.next();
    x_pad.setZero();
    x_pad.head(ex.x.size()) = ex.x;
    try {
      const StepResult step = learner.step(x_pad, ex.label, classes);
      rec.loss += step.loss;
      correct += step.correct ? 1 : 0;
    } catch (const NumericFault&) {
      rec.diverged = true;
      rec.loss = std::numeric_limits<double>::infinity();
      break;
    }
  }
  rec.cum_acc =
      rec.diverged ? 0.0 : static_cast<double>(correct) / episode_length_;
  return rec;
}

// ---------------------------------------------------------------------------

SgdLearner::SgdLearner(const SgdConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.input_dim < 1 || cfg.n_classes < 2) {
    throw ConfigError("sgd: input_dim and n_classes must be positive");
  }
  Rng rng(derive_seed(seed, {0x736764}));
  if (cfg_.arch == SgdConfig::Arch::shallow) {
    w1_ = Mat::Zero(cfg.n_classes, cfg.input_dim);
    b1_ = Vec::Zero(cfg.n_classes);
    const double a = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));
    rng.fill_uniform(w1_, -a, a);
  } else {
    w1_ = Mat::Zero(cfg.hidden, cfg.input_dim);
    b1_ = Vec::Zero(cfg.hidden);
    w2_ = Mat::Zero(cfg.n_classes, cfg.hidden);
    b2_ = Vec::Zero(cfg.n_classes);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    rng.fill_uniform(w1_, -a1, a1);
    rng.fill_uniform(w2_, -a2, a2);
  }
  adam_ = AdamState::init(param_count());
}

int SgdLearner::param_count() const {
  if (cfg_.arch == SgdConfig::Arch::shallow) {
    return static_cast<int>(w1_.size() + b1_.size());
  }
  return static_cast<int>(w1_.size() + b1_.size() + w2_.size() + b2_.size());
}

Vec SgdLearner::flatten() const {
  Vec flat(param_count());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < w1_.rows(); ++r)
    for (Eigen::Index c = 0; c < w1_.cols(); ++c) flat[at++] = w1_(r, c);
  flat.segment(at, b1_.size()) = b1_;
  at += b1_.size();
  if (cfg_.arch == SgdConfig::Arch::deep) {
    for (Eigen::Index r = 0; r < w2_.rows(); ++r)
      for (Eigen::Index c = 0; c < w2_.cols(); ++c) flat[at++] = w2_(r, c);
    flat.segment(at, b2_.size()) = b2_;
  }
  return flat;
}

void SgdLearner::unflatten(const Vec& flat) {
  if (flat.size() != param_count()) throw ConfigError("sgd: parameter size mismatch");
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < w1_.rows(); ++r)
    for (Eigen::Index c = 0; c < w1_.cols(); ++c) w1_(r, c) = flat[at++];
  b1_ = flat.segment(at, b1_.size());
  at += b1_.size();
  if (cfg_.arch == SgdConfig::Arch::deep) {
    for (Eigen::Index r = 0; r < w2_.rows(); ++r)
      for (Eigen::Index c = 0; c < w2_.cols(); ++c) w2_(r, c) = flat[at++];
    b2_ = flat.segment(at, b2_.size());
  }
}

Vec SgdLearner::logits_of(const Vec& x) const {
  if (x.size() != cfg_.input_dim) throw ConfigError("sgd: input size mismatch");
  if (cfg_.arch == SgdConfig::Arch::shallow) return w1_ * x + b1_;
  const Vec hidden = (w1_ * x + b1_).array().tanh();
  return w2_ * hidden + b2_;
}

double SgdLearner::forward_loss(const Vec& x, int label) const {
  return softmax_cross_entropy(logits_of(x), label).loss;
}

Vec SgdLearner::gradient(const Vec& x, int label) const {
  Vec grad = Vec::Zero(param_count());
  Eigen::Index at = 0;
  if (cfg_.arch == SgdConfig::Arch::shallow) {
    const Vec d_logits = softmax_cross_entropy(logits_of(x), label).grad;
    for (Eigen::Index r = 0; r < w1_.rows(); ++r)
      for (Eigen::Index c = 0; c < w1_.cols(); ++c) grad[at++] = d_logits[r] * x[c];
    grad.segment(at, b1_.size()) = d_logits;
    return grad;
  }
  const Vec pre = w1_ * x + b1_;
  const Vec hidden = pre.array().tanh();
  const Vec d_logits = softmax_cross_entropy(w2_ * hidden + b2_, label).grad;
  const Vec d_hidden = w2_.transpose() * d_logits;
  const Vec d_pre = d_hidden.cwiseProduct((1.0 - hidden.array().square()).matrix());
  for (Eigen::Index r = 0; r < w1_.rows(); ++r)
    for (Eigen::Index c = 0; c < w1_.cols(); ++c) grad[at++] = d_pre[r] * x[c];
  grad.segment(at, b1_.size()) = d_pre;
  at += b1_.size();
  for (Eigen::Index r = 0; r < w2_.rows(); ++r)
    for (Eigen::Index c = 0; c < w2_.cols(); ++c) grad[at++] = d_logits[r] * hidden[c];
  grad.segment(at, b2_.size()) = d_logits;
  return grad;
}

StepResult SgdLearner::step(const Vec& x, int label) {
  const Vec logits = logits_of(x);
  SoftmaxLoss sl = softmax_cross_entropy(logits, label);
  StepResult res;
  res.logits = logits;
  res.probs = sl.probs;
  res.loss = sl.loss;
  Eigen::Index arg = 0;
  logits.maxCoeff(&arg);
  res.predicted = static_cast<int>(arg);
  res.correct = res.predicted == label;

  const Vec grad = gradient(x, label);
  if (!grad.allFinite()) throw NumericFault("sgd gradient");
  Vec flat = flatten();
  if (cfg_.opt == SgdConfig::Opt::sgd) {
    flat -= cfg_.lr * grad;
  } else {
    AdamConfig acfg;
    acfg.lr = cfg_.lr;
    adam_step(flat, grad, adam_, acfg);
  }
  unflatten(flat);
  return res;
}

}  // namespace vsml
