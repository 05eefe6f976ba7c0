#include <doctest.h>

#include "vsml/equivalence.hpp"

using namespace vsml;

TEST_CASE("case table entries") {
  Mat w(2, 2), c(2, 2);
  w << 1.0, 2.0, 3.0, 4.0;
  c << 10.0, 20.0, 30.0, 40.0;

  // c=a, d=a, d=b: shared sum C_ij + W_ij
  CHECK(w_tilde_entry(w, c, 0, 0, 0, 0, 0, 1) == c(0, 1) + w(0, 1));
  // d=a but (d!=b or c!=a): C_ij
  CHECK(w_tilde_entry(w, c, 1, 0, 0, 0, 0, 1) == c(0, 1));
  CHECK(w_tilde_entry(w, c, 0, 1, 0, 1, 0, 1) == c(0, 1));
  // d!=a, d=b, c=a: W_ij
  CHECK(w_tilde_entry(w, c, 0, 1, 1, 0, 1, 0) == w(1, 0));
  // d!=a, d!=b: zero
  CHECK(w_tilde_entry(w, c, 0, 0, 0, 1, 1, 0) == 0.0);
}

TEST_CASE("A=B=1 collapses to the dense sum C + W") {
  Rng rng(4);
  Mat w(3, 3), c(3, 3);
  rng.fill_normal(w);
  rng.fill_normal(c);
  const SparseSharedMatrix wt = build_w_tilde(w, c, 1, 1);
  REQUIRE(wt.dense);
  CHECK((wt.dense_matrix - (c + w)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rectangular grids are rejected") {
  Mat w = Mat::Zero(2, 2), c = Mat::Zero(2, 2);
  CHECK_THROWS_AS(build_w_tilde(w, c, 2, 3), ConfigError);
}

TEST_CASE("the zero structure matches the analytic count") {
  Rng rng(9);
  for (int a_dim : {1, 2, 3}) {
    const int n = 2;
    Mat w(n, n), c(n, n);
    rng.fill_normal(w);
    rng.fill_normal(c);
    const SparseSharedMatrix wt = build_w_tilde(w, c, a_dim, a_dim);
    REQUIRE(wt.dense);
    long nonzero = 0;
    for (long r = 0; r < wt.dense_matrix.rows(); ++r)
      for (long col = 0; col < wt.dense_matrix.cols(); ++col)
        nonzero += wt.dense_matrix(r, col) != 0.0 ? 1 : 0;
    CHECK(nonzero == structural_nonzero_count(a_dim, n));
  }
}

TEST_CASE("C=0 decouples the cells into independent RNNs") {
  Rng rng(21);
  const int a_dim = 3, n = 2;
  Mat w(n, n);
  rng.fill_normal(w);
  const Mat c = Mat::Zero(n, n);
  Mat states(a_dim * a_dim, n);
  rng.fill_normal(states);

  const Mat stepped = step_via_messages(states, w, c);
  for (int cell = 0; cell < a_dim * a_dim; ++cell) {
    const Vec expected = (w.transpose() * states.row(cell).transpose()).array().tanh();
    CHECK((stepped.row(cell).transpose() - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("W=0 with one nonzero cell matches the hand-computed message term") {
  // N=1, A=B=2; states zero except cell (1,0) = 5. For destination (a,b):
  // message term sums s_{c,a} over c, so only a=0 picks up the 5.
  const Mat w = Mat::Zero(1, 1);
  Mat c(1, 1);
  c << 0.3;
  Mat states = Mat::Zero(4, 1);
  states(1 * 2 + 0, 0) = 5.0;  // cell (1,0)

  const Mat stepped = step_via_messages(states, w, c);
  const double expected = std::tanh(5.0 * 0.3);
  CHECK(stepped(0 * 2 + 0, 0) == doctest::Approx(expected).epsilon(1e-15));  // (0,0)
  CHECK(stepped(0 * 2 + 1, 0) == doctest::Approx(expected).epsilon(1e-15));  // (0,1)
  CHECK(stepped(1 * 2 + 0, 0) == doctest::Approx(std::tanh(0.0)).epsilon(1e-15));
  CHECK(stepped(1 * 2 + 1, 0) == doctest::Approx(std::tanh(0.0)).epsilon(1e-15));
}

TEST_CASE("zero states stay zero through both routes") {
  Mat w(2, 2), c(2, 2);
  w.setConstant(0.5);
  c.setConstant(-0.25);
  const Mat states = Mat::Zero(4, 2);
  const SparseSharedMatrix wt = build_w_tilde(w, c, 2, 2);
  CHECK(step_via_w_tilde(states, wt).isZero(0.0));
  CHECK(step_via_messages(states, w, c).isZero(0.0));
}

TEST_CASE("equivalence theorem: both routes agree over random trials") {
  const EquivalenceReport report = verify_equivalence(120, 3, 2024);
  CHECK(report.trials == 120);
  CHECK(report.max_deviation < 1e-10);
}

TEST_CASE("large grids switch to lazy evaluation and still agree") {
  Rng rng(33);
  const int a_dim = 3, n = 4;  // ABN = 36 dense; force lazy via a bigger grid
  Mat w(n, n), c(n, n);
  rng.fill_normal(w);
  rng.fill_normal(c);
  Mat states(a_dim * a_dim, n);
  rng.fill_normal(states);
  SparseSharedMatrix wt = build_w_tilde(w, c, a_dim, a_dim);
  wt.dense = false;  // evaluate from the case rule
  const Mat lazy = step_via_w_tilde(states, wt);
  const Mat via_msgs = step_via_messages(states, w, c);
  CHECK((lazy - via_msgs).cwiseAbs().maxCoeff() < 1e-10);

  const int big = 5;  // ABN = 100 > 64
  Mat big_states(big * big, n);
  rng.fill_normal(big_states);
  const SparseSharedMatrix wt_big = build_w_tilde(w, c, big, big);
  CHECK(!wt_big.dense);
  const Mat lazy_big = step_via_w_tilde(big_states, wt_big);
  const Mat msgs_big = step_via_messages(big_states, w, c);
  CHECK((lazy_big - msgs_big).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(verify_equivalence(0, 3, 1), ConfigError);
  CHECK_THROWS_AS(verify_equivalence(10, 0, 1), ConfigError);
}
