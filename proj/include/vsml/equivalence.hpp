#pragma once

#include "vsml/common.hpp"
#include "vsml/rng.hpp"

namespace vsml {

// Vanilla (tanh, ungated) parameter-shared RNN on an A x A grid. W is the
// recurrent matrix, C the message matrix; this is the form the equivalence
// theorem is stated for, not the gated training path.
struct VanillaSharedRnn {
  Mat w;  // N x N
  Mat c;  // N x N
  int grid_dim = 1;  // A = B
};

// Entry rule for the single sparse shared matrix, evaluated from the
// four-case table. Indices c,d pick the source cell, i its state entry;
// a,b the destination cell, j its state entry.
double w_tilde_entry(const Mat& w, const Mat& c_mat, int c, int d, int i, int a,
                     int b, int j);

// The sparse shared matrix, materialized densely when A*B*N <= 64 and
// evaluated lazily from the case rule above that.
struct SparseSharedMatrix {
  Mat w;  // copies kept for lazy evaluation
  Mat c;
  int a_dim = 1;
  int b_dim = 1;
  int n = 1;
  bool dense = false;
  Mat dense_matrix;  // (ABN) x (ABN), row = (c,d,i), col = (a,b,j)

  double entry(int c, int d, int i, int a, int b, int j) const;
  long flat_dim() const { return static_cast<long>(a_dim) * b_dim * n; }
};

SparseSharedMatrix build_w_tilde(const Mat& w, const Mat& c, int a_dim, int b_dim);

// Number of structurally nonzero entries of the materialized matrix
// (counted from the case conditions alone, assuming generic W, C).
long structural_nonzero_count(int a_dim, int n);

// States are (A*B) x N matrices, cell (a,b) at row a*B+b.
// One update through the single-matrix route: s' = tanh(s_flat * W~).
Mat step_via_w_tilde(const Mat& states, const SparseSharedMatrix& wt);
// One update through the message-passing route:
// s'_{abj} = tanh(sum_i s_{abi} W_ij + sum_{c,i} s_{cai} C_ij).
Mat step_via_messages(const Mat& states, const Mat& w, const Mat& c);

struct EquivalenceReport {
  int trials = 0;
  double max_deviation = 0.0;
  std::vector<double> per_trial;
  bool passed(double tol) const { return max_deviation < tol; }
};

// Random (W, C, states) instances over A=B in {1..max_grid}, N in {1,2,4};
// reports the elementwise deviation between the two routes per trial.
EquivalenceReport verify_equivalence(int trials, int max_grid, uint64_t seed);

}  // namespace vsml
