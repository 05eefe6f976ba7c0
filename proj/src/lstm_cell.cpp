#include "vsml/lstm_cell.hpp"

namespace vsml {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_dims(const LstmCellParams& p, const Vec& z, const Vec& h,
                const Vec& fwd_in, const Vec& bwd_in) {
  const int n = p.dims.state;
  if (z.size() != n || h.size() != n || fwd_in.size() != p.dims.fwd_msg ||
      bwd_in.size() != p.dims.bwd_msg || p.w_input.rows() != 4 * n ||
      p.w_input.cols() != p.dims.msg_in() || p.w_recurrent.rows() != 4 * n ||
      p.w_recurrent.cols() != n || p.bias.size() != 4 * n) {
    throw ConfigError("lstm_cell_step: dimension mismatch");
  }
}

}  // namespace

LstmCellParams LstmCellParams::zeros(CellDims d) {
  LstmCellParams p;
  p.dims = d;
  p.w_input = Mat::Zero(4 * d.state, d.msg_in());
  p.w_recurrent = Mat::Zero(4 * d.state, d.state);
  p.bias = Vec::Zero(4 * d.state);
  return p;
}

LstmCellParams LstmCellParams::init(CellDims d, Rng& rng) {
  LstmCellParams p = zeros(d);
  const double a_in = 1.0 / std::sqrt(static_cast<double>(d.msg_in()));
  const double a_rec = 1.0 / std::sqrt(static_cast<double>(d.state));
  rng.fill_uniform(p.w_input, -a_in, a_in);
  rng.fill_uniform(p.w_recurrent, -a_rec, a_rec);
  p.gate_bias(1).setConstant(1.0);  // forget gate
  return p;
}

void lstm_cell_step(const LstmCellParams& p, const Vec& z, const Vec& h,
                    const Vec& fwd_in, const Vec& bwd_in, Vec& z_out, Vec& h_out) {
  CellTape tape;
  lstm_cell_step_taped(p, z, h, fwd_in, bwd_in, tape, z_out, h_out);
}

void lstm_cell_step_taped(const LstmCellParams& p, const Vec& z, const Vec& h,
                          const Vec& fwd_in, const Vec& bwd_in, CellTape& tape,
                          Vec& z_out, Vec& h_out) {
  check_dims(p, z, h, fwd_in, bwd_in);
  const int n = p.dims.state;

  tape.msg_in.resize(p.dims.msg_in());
  tape.msg_in << fwd_in, bwd_in;
  tape.h_in = h;
  tape.z_in = z;

  Vec pre = p.w_input * tape.msg_in + p.w_recurrent * h + p.bias;
  tape.gate_i = pre.segment(0, n).unaryExpr([](double v) { return sigmoid(v); });
  tape.gate_f = pre.segment(n, n).unaryExpr([](double v) { return sigmoid(v); });
  tape.gate_g = pre.segment(2 * n, n).array().tanh();
  tape.gate_o = pre.segment(3 * n, n).unaryExpr([](double v) { return sigmoid(v); });

  tape.z_out = tape.gate_f.cwiseProduct(z) + tape.gate_i.cwiseProduct(tape.gate_g);
  tape.tanh_z_out = tape.z_out.array().tanh();
  z_out = tape.z_out;
  h_out = tape.gate_o.cwiseProduct(tape.tanh_z_out);
}

CellGrads CellGrads::zeros(CellDims d) {
  CellGrads g;
  g.w_input = Mat::Zero(4 * d.state, d.msg_in());
  g.w_recurrent = Mat::Zero(4 * d.state, d.state);
  g.bias = Vec::Zero(4 * d.state);
  return g;
}

void CellGrads::add_scaled(const CellGrads& other, double scale) {
  w_input += scale * other.w_input;
  w_recurrent += scale * other.w_recurrent;
  bias += scale * other.bias;
}

void lstm_cell_backward(const LstmCellParams& p, const CellTape& tape,
                        const Vec& dz_out, const Vec& dh_out, CellGrads& acc,
                        Vec& dz_in, Vec& dh_in, Vec& dmsg_in) {
  const int n = p.dims.state;
  if (dz_out.size() != n || dh_out.size() != n) {
    throw ConfigError("lstm_cell_backward: upstream gradient shape mismatch");
  }

  // h' = o . tanh(z'), z' = f . z + i . g
  const Vec d_o = dh_out.cwiseProduct(tape.tanh_z_out);
  const Vec d_tanh = dh_out.cwiseProduct(tape.gate_o);
  const Vec dz_total =
      dz_out + d_tanh.cwiseProduct((1.0 - tape.tanh_z_out.array().square()).matrix());

  const Vec d_f = dz_total.cwiseProduct(tape.z_in);
  const Vec d_i = dz_total.cwiseProduct(tape.gate_g);
  const Vec d_g = dz_total.cwiseProduct(tape.gate_i);
  dz_in = dz_total.cwiseProduct(tape.gate_f);

  Vec d_pre(4 * n);
  d_pre.segment(0, n) =
      d_i.cwiseProduct(tape.gate_i.cwiseProduct((1.0 - tape.gate_i.array()).matrix()));
  d_pre.segment(n, n) =
      d_f.cwiseProduct(tape.gate_f.cwiseProduct((1.0 - tape.gate_f.array()).matrix()));
  d_pre.segment(2 * n, n) =
      d_g.cwiseProduct((1.0 - tape.gate_g.array().square()).matrix());
  d_pre.segment(3 * n, n) =
      d_o.cwiseProduct(tape.gate_o.cwiseProduct((1.0 - tape.gate_o.array()).matrix()));

  acc.w_input.noalias() += d_pre * tape.msg_in.transpose();
  acc.w_recurrent.noalias() += d_pre * tape.h_in.transpose();
  acc.bias += d_pre;

  dmsg_in.noalias() = p.w_input.transpose() * d_pre;
  dh_in.noalias() = p.w_recurrent.transpose() * d_pre;
}

}  // namespace vsml
