#pragma once

#include "vsml/common.hpp"
#include "vsml/rng.hpp"

namespace vsml {

// Sizes of one sub-RNN cell: state width and the widths of the incoming
// forward/backward message vectors.
struct CellDims {
  int state = 16;
  int fwd_msg = 8;
  int bwd_msg = 8;

  int msg_in() const { return fwd_msg + bwd_msg; }
  bool operator==(const CellDims&) const = default;
};

// Shared LSTM cell weights. Gate blocks are stacked along rows in the fixed
// order input, forget, candidate, output, so w_input is (4N x (N'+N'')),
// w_recurrent is (4N x N) and bias is (4N).
struct LstmCellParams {
  Mat w_input;
  Mat w_recurrent;
  Vec bias;
  CellDims dims;

  static LstmCellParams zeros(CellDims d);
  // Uniform +-1/sqrt(fan-in) per block, forget-gate bias +1.
  static LstmCellParams init(CellDims d, Rng& rng);

  int param_count() const {
    return static_cast<int>(w_input.size() + w_recurrent.size() + bias.size());
  }

  // Row block of gate g (0=input, 1=forget, 2=candidate, 3=output).
  auto gate_input(int g) { return w_input.middleRows(g * dims.state, dims.state); }
  auto gate_recurrent(int g) { return w_recurrent.middleRows(g * dims.state, dims.state); }
  auto gate_bias(int g) { return bias.segment(g * dims.state, dims.state); }
};

// One LSTM tick: z' = f.z + i.g, h' = o.tanh(z') with sigmoid gates and
// tanh candidate. Message inputs are concatenated [fwd; bwd].
void lstm_cell_step(const LstmCellParams& p, const Vec& z, const Vec& h,
                    const Vec& fwd_in, const Vec& bwd_in, Vec& z_out, Vec& h_out);

// Forward intermediates recorded for one cell tick, enough for an exact
// reverse sweep. Replaying the inputs reproduces the outputs bit-exactly.
struct CellTape {
  Vec msg_in;   // [fwd; bwd]
  Vec h_in;
  Vec z_in;
  Vec gate_i, gate_f, gate_g, gate_o;
  Vec z_out;
  Vec tanh_z_out;
};

void lstm_cell_step_taped(const LstmCellParams& p, const Vec& z, const Vec& h,
                          const Vec& fwd_in, const Vec& bwd_in, CellTape& tape,
                          Vec& z_out, Vec& h_out);

// Gradient accumulator matching LstmCellParams' layout.
struct CellGrads {
  Mat w_input;
  Mat w_recurrent;
  Vec bias;

  static CellGrads zeros(CellDims d);
  void add_scaled(const CellGrads& other, double scale);
};

// Reverse sweep for one tick. dz_out/dh_out are upstream gradients w.r.t.
// the tick outputs; parameter gradients accumulate into `acc`, and the
// gradients w.r.t. the tick inputs are written to dz_in/dh_in/dmsg_in.
void lstm_cell_backward(const LstmCellParams& p, const CellTape& tape,
                        const Vec& dz_out, const Vec& dh_out, CellGrads& acc,
                        Vec& dz_in, Vec& dh_in, Vec& dmsg_in);

}  // namespace vsml
