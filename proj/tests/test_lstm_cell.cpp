#include <doctest.h>

#include "vsml/lstm_cell.hpp"
#include "vsml/rng.hpp"

using namespace vsml;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Straight-line scalar re-implementation, kept independent of the library
// path: plain loops, no Eigen expressions.
void reference_lstm(const LstmCellParams& p, const Vec& z, const Vec& h,
                    const Vec& fwd, const Vec& bwd, Vec& z_out, Vec& h_out) {
  const int n = p.dims.state;
  const int m = p.dims.msg_in();
  std::vector<double> msg(static_cast<size_t>(m));
  for (int i = 0; i < p.dims.fwd_msg; ++i) msg[static_cast<size_t>(i)] = fwd[i];
  for (int i = 0; i < p.dims.bwd_msg; ++i) {
    msg[static_cast<size_t>(p.dims.fwd_msg + i)] = bwd[i];
  }
  z_out.resize(n);
  h_out.resize(n);
  for (int j = 0; j < n; ++j) {
    double pre[4];
    for (int g = 0; g < 4; ++g) {
      double acc = p.bias[g * n + j];
      for (int i = 0; i < m; ++i) acc += p.w_input(g * n + j, i) * msg[static_cast<size_t>(i)];
      for (int i = 0; i < n; ++i) acc += p.w_recurrent(g * n + j, i) * h[i];
      pre[g] = acc;
    }
    const double gi = sig(pre[0]);
    const double gf = sig(pre[1]);
    const double gg = std::tanh(pre[2]);
    const double go = sig(pre[3]);
    z_out[j] = gf * z[j] + gi * gg;
    h_out[j] = go * std::tanh(z_out[j]);
  }
}

}  // namespace

TEST_CASE("zero parameters and zero state give zero outputs") {
  const CellDims d{4, 3, 2};
  const LstmCellParams p = LstmCellParams::zeros(d);
  Vec z = Vec::Zero(4), h = Vec::Zero(4), fwd = Vec::Zero(3), bwd = Vec::Zero(2);
  Vec z_out, h_out;
  lstm_cell_step(p, z, h, fwd, bwd, z_out, h_out);
  CHECK(z_out.isZero(0.0));
  CHECK(h_out.isZero(0.0));
}

TEST_CASE("forget bias +1 decays the cell state by sigmoid(1)") {
  const CellDims d{5, 2, 2};
  LstmCellParams p = LstmCellParams::zeros(d);
  p.gate_bias(1).setConstant(1.0);
  Vec z = Vec::Ones(5), h = Vec::Zero(5), fwd = Vec::Zero(2), bwd = Vec::Zero(2);
  Vec z_out, h_out;
  lstm_cell_step(p, z, h, fwd, bwd, z_out, h_out);
  const double s1 = sig(1.0);
  for (int j = 0; j < 5; ++j) {
    CHECK(z_out[j] == doctest::Approx(s1).epsilon(1e-12));
    CHECK(std::abs(z_out[j] - 0.7311 * 1.0) < 1e-4);
    // output gate sigma(0) = 0.5
    CHECK(h_out[j] == doctest::Approx(0.5 * std::tanh(s1)).epsilon(1e-12));
  }
}

TEST_CASE("matches the straight-line reference on random instances") {
  for (int inst = 0; inst < 30; ++inst) {
    Rng rng(derive_seed(42, {static_cast<uint64_t>(inst)}));
    const CellDims d{2 + rng.uniform_int(8), 1 + rng.uniform_int(6), 1 + rng.uniform_int(6)};
    LstmCellParams p = LstmCellParams::init(d, rng);
    Vec z(d.state), h(d.state), fwd(d.fwd_msg), bwd(d.bwd_msg);
    rng.fill_normal(z);
    rng.fill_normal(h);
    rng.fill_normal(fwd);
    rng.fill_normal(bwd);

    Vec z_out, h_out, z_ref, h_ref;
    lstm_cell_step(p, z, h, fwd, bwd, z_out, h_out);
    reference_lstm(p, z, h, fwd, bwd, z_ref, h_ref);
    CHECK((z_out - z_ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((h_out - h_ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("taped forward replays bit-exactly and matches the untaped path") {
  Rng rng(7);
  const CellDims d{6, 3, 3};
  LstmCellParams p = LstmCellParams::init(d, rng);
  Vec z(6), h(6), fwd(3), bwd(3);
  rng.fill_normal(z);
  rng.fill_normal(h);
  rng.fill_normal(fwd);
  rng.fill_normal(bwd);

  Vec z1, h1, z2, h2;
  CellTape tape;
  lstm_cell_step(p, z, h, fwd, bwd, z1, h1);
  lstm_cell_step_taped(p, z, h, fwd, bwd, tape, z2, h2);
  CHECK(z1 == z2);
  CHECK(h1 == h2);

  Vec z3, h3;
  lstm_cell_step(p, tape.z_in, tape.h_in, fwd, bwd, z3, h3);
  CHECK(z3 == z2);
  CHECK(tape.z_out == z2);
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
  Rng rng(11);
  const CellDims d{4, 2, 2};
  LstmCellParams p = LstmCellParams::init(d, rng);
  Vec z(4), h(4), fwd(2), bwd(2);
  rng.fill_normal(z);
  rng.fill_normal(h);
  rng.fill_normal(fwd);
  rng.fill_normal(bwd);

  CellTape tape;
  Vec z_out, h_out;
  lstm_cell_step_taped(p, z, h, fwd, bwd, tape, z_out, h_out);
  CellGrads acc = CellGrads::zeros(d);
  Vec dz, dh, dmsg;
  lstm_cell_backward(p, tape, Vec::Zero(4), Vec::Zero(4), acc, dz, dh, dmsg);
  CHECK(acc.w_input.isZero(0.0));
  CHECK(acc.w_recurrent.isZero(0.0));
  CHECK(acc.bias.isZero(0.0));
  CHECK(dz.isZero(0.0));
  CHECK(dh.isZero(0.0));
  CHECK(dmsg.isZero(0.0));
}

TEST_CASE("forget-gate weight gradient vanishes on a zero cell state") {
  // With z = 0 the forget path contributes f*0, so d(sum outputs)/dWf = 0
  // for the cell-state part when all params are zero.
  const CellDims d{3, 2, 2};
  const LstmCellParams p = LstmCellParams::zeros(d);
  Vec z = Vec::Zero(3), h = Vec::Zero(3), fwd(2), bwd(2);
  fwd << 0.3, -0.4;
  bwd << 0.1, 0.2;

  CellTape tape;
  Vec z_out, h_out;
  lstm_cell_step_taped(p, z, h, fwd, bwd, tape, z_out, h_out);
  CellGrads acc = CellGrads::zeros(d);
  Vec dz, dh, dmsg;
  lstm_cell_backward(p, tape, Vec::Ones(3), Vec::Ones(3), acc, dz, dh, dmsg);
  // Rows of the forget block (gate 1) in w_input must be zero.
  CHECK(acc.w_input.middleRows(3, 3).isZero(0.0));
  CHECK(acc.w_recurrent.middleRows(3, 3).isZero(0.0));
}

TEST_CASE("initialization puts +1 on the forget bias and bounds the blocks") {
  Rng rng(3);
  const CellDims d{16, 8, 8};
  const LstmCellParams p = LstmCellParams::init(d, rng);
  CHECK((p.bias.segment(16, 16).array() == 1.0).all());
  CHECK(p.bias.segment(0, 16).isZero(0.0));
  const double a_in = 1.0 / std::sqrt(16.0);
  CHECK(p.w_input.cwiseAbs().maxCoeff() <= a_in);
  CHECK(p.param_count() == 4 * 16 * 16 + 4 * 16 * 16 + 4 * 16);
}

TEST_CASE("dimension mismatches are rejected") {
  const CellDims d{4, 3, 2};
  const LstmCellParams p = LstmCellParams::zeros(d);
  Vec z = Vec::Zero(4), h = Vec::Zero(4), bad_fwd = Vec::Zero(2), bwd = Vec::Zero(2);
  Vec z_out, h_out;
  CHECK_THROWS_AS(lstm_cell_step(p, z, h, bad_fwd, bwd, z_out, h_out), ConfigError);
}
