#pragma once

#include "vsml/lstm_cell.hpp"

namespace vsml {

// Linear maps from a cell's hidden state to the outgoing forward (N'xN) and
// backward (N''xN) message contributions. No bias.
struct MessageProjections {
  Mat forward;   // N' x N
  Mat backward;  // N'' x N

  static MessageProjections zeros(CellDims d);
  static MessageProjections init(CellDims d, Rng& rng);
  int param_count() const {
    return static_cast<int>(forward.size() + backward.size());
  }
};

// The full set of shared meta variables: one LSTM cell plus the two message
// projections. Every sub-RNN in every layer of a grid reads the same object.
struct MetaParams {
  LstmCellParams cell;
  MessageProjections proj;

  CellDims dims() const { return cell.dims; }
  int param_count() const { return cell.param_count() + proj.param_count(); }

  static MetaParams zeros(CellDims d);
  static MetaParams init(CellDims d, uint64_t seed);

  // Canonical flat layout: cell.w_input, cell.w_recurrent, cell.bias,
  // proj.forward, proj.backward, matrices row-major. Used by ES
  // perturbations, Adam, and checkpoints.
  Vec flatten() const;
  static MetaParams unflatten(CellDims d, const Vec& flat);
};

struct ParamGrads {
  CellGrads cell;
  Mat d_forward;
  Mat d_backward;

  static ParamGrads zeros(CellDims d);
  void add(const ParamGrads& other);
  Vec flatten() const;  // same layout as MetaParams::flatten
};

}  // namespace vsml
