#include "vsml/grid.hpp"

#include <limits>

namespace vsml {

void LayerSpec::validate() const {
  if (layers.empty()) throw ConfigError("LayerSpec: at least one layer required");
  if (ticks_per_example < 1) throw ConfigError("LayerSpec: ticks_per_example must be >= 1");
  for (size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].inputs < 1 || layers[k].outputs < 1) {
      throw ConfigError("LayerSpec: layer sizes must be positive");
    }
    if (k > 0 && layers[k].inputs != layers[k - 1].outputs) {
      throw ConfigError("LayerSpec: A^(k) must equal B^(k-1) at layer " +
                        std::to_string(k + 1));
    }
  }
}

SubRnnGrid SubRnnGrid::zeros(const LayerSpec& spec, int n_state) {
  SubRnnGrid g;
  for (const auto& layer : spec.layers) {
    const int cells = layer.inputs * layer.outputs;
    g.z.push_back(Mat::Zero(cells, n_state));
    g.h.push_back(Mat::Zero(cells, n_state));
  }
  return g;
}

SubRnnGrid SubRnnGrid::random(const LayerSpec& spec, int n_state, uint64_t seed) {
  SubRnnGrid g = zeros(spec, n_state);
  Rng rng(derive_seed(seed, {0x737461746573}));  // states stream
  for (size_t k = 0; k < g.z.size(); ++k) {
    rng.fill_normal(g.z[k]);
    rng.fill_normal(g.h[k]);
  }
  return g;
}

SoftmaxLoss softmax_cross_entropy(const Vec& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw ConfigError("softmax_cross_entropy: label out of range");
  }
  SoftmaxLoss out;
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  const double sum = e.sum();
  out.probs = e / sum;
  out.loss = -(std::log(out.probs[label]));
  out.grad = out.probs;
  out.grad[label] -= 1.0;
  return out;
}

VsmlNetwork::VsmlNetwork(const MetaParams& params, LayerSpec spec)
    : params_(params), spec_(std::move(spec)) {
  spec_.validate();
  const CellDims d = params_.dims();
  grid_ = SubRnnGrid::zeros(spec_, d.state);
  for (int k = 0; k < spec_.depth(); ++k) {
    fwd_msg_.push_back(Mat::Zero(spec_.layers[static_cast<size_t>(k)].inputs, d.fwd_msg));
    bwd_msg_.push_back(Mat::Zero(spec_.layers[static_cast<size_t>(k)].outputs, d.bwd_msg));
  }
  fwd_msg_.push_back(Mat::Zero(spec_.output_dim(), d.fwd_msg));
}

void VsmlNetwork::init_states(uint64_t seed) {
  grid_ = SubRnnGrid::random(spec_, params_.dims().state, seed);
  if (clip_states) {
    for (size_t k = 0; k < grid_.z.size(); ++k) {
      grid_.z[k] = grid_.z[k].cwiseMax(-clip_value).cwiseMin(clip_value);
      grid_.h[k] = grid_.h[k].cwiseMax(-clip_value).cwiseMin(clip_value);
    }
  }
  for (auto& m : fwd_msg_) m.setZero();
  for (auto& m : bwd_msg_) m.setZero();
  current_step = -1;
}

void VsmlNetwork::feed_input(const Vec& x) {
  if (x.size() != spec_.input_dim()) {
    throw ConfigError("feed_input: expected " + std::to_string(spec_.input_dim()) +
                      " values, got " + std::to_string(x.size()));
  }
  fwd_msg_[0].setZero();
  fwd_msg_[0].col(0) = x;
}

void VsmlNetwork::feed_error(const Vec& e) {
  if (e.size() != spec_.output_dim()) {
    throw ConfigError("feed_error: expected " + std::to_string(spec_.output_dim()) +
                      " values, got " + std::to_string(e.size()));
  }
  auto& msg = bwd_msg_[static_cast<size_t>(spec_.depth()) - 1];
  msg.setZero();
  msg.col(0) = e;
}

void VsmlNetwork::layer_step(int k) {
  const auto size = spec_.layers[static_cast<size_t>(k) - 1];
  const int a_dim = size.inputs;
  const int b_dim = size.outputs;
  const int cells = a_dim * b_dim;
  const CellDims d = params_.dims();
  Mat& z = grid_.z[static_cast<size_t>(k) - 1];
  Mat& h = grid_.h[static_cast<size_t>(k) - 1];

  // Per-cell message input rows [fwd_a ; bwd_b], cell (a,b) at row a*B+b.
  Mat msg_in(cells, d.msg_in());
  const Mat& fwd = fwd_msg_[static_cast<size_t>(k) - 1];
  const Mat& bwd = bwd_msg_[static_cast<size_t>(k) - 1];
  for (int a = 0; a < a_dim; ++a) {
    for (int b = 0; b < b_dim; ++b) {
      msg_in.row(a * b_dim + b) << fwd.row(a), bwd.row(b);
    }
  }

  const int n = d.state;
  Mat pre = msg_in * params_.cell.w_input.transpose();
  pre.noalias() += h * params_.cell.w_recurrent.transpose();
  pre.rowwise() += params_.cell.bias.transpose();

  const Mat gi = (1.0 / (1.0 + (-pre.leftCols(n).array()).exp())).matrix();
  const Mat gf = (1.0 / (1.0 + (-pre.middleCols(n, n).array()).exp())).matrix();
  const Mat gg = pre.middleCols(2 * n, n).array().tanh().matrix();
  const Mat go = (1.0 / (1.0 + (-pre.rightCols(n).array()).exp())).matrix();

  z = gf.cwiseProduct(z) + gi.cwiseProduct(gg);
  h = go.cwiseProduct(z.array().tanh().matrix());
  if (clip_states) {
    z = z.cwiseMax(-clip_value).cwiseMin(clip_value);
    h = h.cwiseMax(-clip_value).cwiseMin(clip_value);
  }
  if (!z.allFinite() || !h.allFinite()) {
    for (int a = 0; a < a_dim; ++a) {
      for (int b = 0; b < b_dim; ++b) {
        const int r = a * b_dim + b;
        if (!z.row(r).allFinite() || !h.row(r).allFinite()) {
          throw NumericFault("layer " + std::to_string(k) + " cell (" +
                                 std::to_string(a) + "," + std::to_string(b) + ")",
                             current_step);
        }
      }
    }
  }

  // Outgoing messages are averaged over the emitting axis, not summed.
  Mat hp = h * params_.proj.forward.transpose();  // cells x N'
  Mat& fwd_out = fwd_msg_[static_cast<size_t>(k)];
  fwd_out.setZero();
  for (int a = 0; a < a_dim; ++a) {
    for (int b = 0; b < b_dim; ++b) fwd_out.row(b) += hp.row(a * b_dim + b);
  }
  fwd_out /= static_cast<double>(a_dim);
  if (designated_slots_only && fwd_out.cols() > 1) {
    fwd_out.rightCols(fwd_out.cols() - 1).setZero();
  }

  if (k >= 2) {
    Mat hb = h * params_.proj.backward.transpose();  // cells x N''
    Mat& bwd_out = bwd_msg_[static_cast<size_t>(k) - 2];
    bwd_out.setZero();
    for (int a = 0; a < a_dim; ++a) {
      for (int b = 0; b < b_dim; ++b) bwd_out.row(a) += hb.row(a * b_dim + b);
    }
    bwd_out /= static_cast<double>(b_dim);
    if (designated_slots_only && bwd_out.cols() > 1) {
      bwd_out.rightCols(bwd_out.cols() - 1).setZero();
    }
  }
}

void VsmlNetwork::tick() {
  for (int k = 1; k <= spec_.depth(); ++k) layer_step(k);
}

void VsmlNetwork::tick_reverse() {
  for (int k = spec_.depth(); k >= 1; --k) layer_step(k);
}

Vec VsmlNetwork::read_output() const {
  const Mat& out = fwd_msg_.back();
  Vec logits(out.rows());
  for (Eigen::Index b = 0; b < out.rows(); ++b) logits[b] = squash_logit(out(b, 0));
  return logits;
}

StepResult VsmlNetwork::inner_step(const Vec& x, std::optional<int> label) {
  // The example is held at the input for ticks_per_example full iterations
  // of the read-output / feed-error loop; the recorded prediction is the one
  // made when the example was first fed.
  feed_input(x);
  StepResult res;
  for (int t = 0; t < spec_.ticks_per_example; ++t) {
    tick();
    const bool last = t == spec_.ticks_per_example - 1;
    if (t == 0) {
      res.logits = read_output();
      if (label.has_value()) {
        const SoftmaxLoss sl = softmax_cross_entropy(res.logits, *label);
        res.probs = sl.probs;
        res.loss = sl.loss;
      } else {
        res.probs = softmax_cross_entropy(res.logits, 0).probs;
        res.loss = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (label.has_value() && (error_every_tick || last)) {
      feed_error(softmax_cross_entropy(read_output(), *label).grad);
    }
  }
  Eigen::Index arg = 0;
  res.logits.maxCoeff(&arg);
  res.predicted = static_cast<int>(arg);
  res.correct = label.has_value() && res.predicted == *label;
  return res;
}

}  // namespace vsml
