#include "vsml/meta_params.hpp"

namespace vsml {

namespace {

// Row-major copy in/out of the flat vector.
void pack(const Mat& m, Vec& flat, Eigen::Index& at) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat[at++] = m(r, c);
}

void unpack(Mat& m, const Vec& flat, Eigen::Index& at) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[at++];
}

}  // namespace

MessageProjections MessageProjections::zeros(CellDims d) {
  MessageProjections p;
  p.forward = Mat::Zero(d.fwd_msg, d.state);
  p.backward = Mat::Zero(d.bwd_msg, d.state);
  return p;
}

MessageProjections MessageProjections::init(CellDims d, Rng& rng) {
  MessageProjections p = zeros(d);
  const double a = 1.0 / std::sqrt(static_cast<double>(d.state));
  rng.fill_uniform(p.forward, -a, a);
  rng.fill_uniform(p.backward, -a, a);
  return p;
}

MetaParams MetaParams::zeros(CellDims d) {
  MetaParams p;
  p.cell = LstmCellParams::zeros(d);
  p.proj = MessageProjections::zeros(d);
  return p;
}

MetaParams MetaParams::init(CellDims d, uint64_t seed) {
  Rng rng(derive_seed(seed, {0x6d657461}));  // meta-params stream
  MetaParams p;
  p.cell = LstmCellParams::init(d, rng);
  p.proj = MessageProjections::init(d, rng);
  return p;
}

Vec MetaParams::flatten() const {
  Vec flat(param_count());
  Eigen::Index at = 0;
  pack(cell.w_input, flat, at);
  pack(cell.w_recurrent, flat, at);
  flat.segment(at, cell.bias.size()) = cell.bias;
  at += cell.bias.size();
  pack(proj.forward, flat, at);
  pack(proj.backward, flat, at);
  return flat;
}

MetaParams MetaParams::unflatten(CellDims d, const Vec& flat) {
  MetaParams p = zeros(d);
  if (flat.size() != p.param_count()) {
    throw ConfigError("MetaParams::unflatten: expected " +
                      std::to_string(p.param_count()) + " values, got " +
                      std::to_string(flat.size()));
  }
  Eigen::Index at = 0;
  unpack(p.cell.w_input, flat, at);
  unpack(p.cell.w_recurrent, flat, at);
  p.cell.bias = flat.segment(at, p.cell.bias.size());
  at += p.cell.bias.size();
  unpack(p.proj.forward, flat, at);
  unpack(p.proj.backward, flat, at);
  return p;
}

ParamGrads ParamGrads::zeros(CellDims d) {
  ParamGrads g;
  g.cell = CellGrads::zeros(d);
  g.d_forward = Mat::Zero(d.fwd_msg, d.state);
  g.d_backward = Mat::Zero(d.bwd_msg, d.state);
  return g;
}

void ParamGrads::add(const ParamGrads& other) {
  cell.add_scaled(other.cell, 1.0);
  d_forward += other.d_forward;
  d_backward += other.d_backward;
}

Vec ParamGrads::flatten() const {
  Vec flat(cell.w_input.size() + cell.w_recurrent.size() + cell.bias.size() +
           d_forward.size() + d_backward.size());
  Eigen::Index at = 0;
  pack(cell.w_input, flat, at);
  pack(cell.w_recurrent, flat, at);
  flat.segment(at, cell.bias.size()) = cell.bias;
  at += cell.bias.size();
  pack(d_forward, flat, at);
  pack(d_backward, flat, at);
  return flat;
}

}  // namespace vsml
