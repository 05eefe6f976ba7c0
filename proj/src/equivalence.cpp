#include "vsml/equivalence.hpp"

namespace vsml {

double w_tilde_entry(const Mat& w, const Mat& c_mat, int c, int d, int i, int a,
                     int b, int j) {
  const bool da = d == a;
  const bool db = d == b;
  const bool ca = c == a;
  if (da && db && ca) return c_mat(i, j) + w(i, j);
  if (da) return c_mat(i, j);
  if (db && ca) return w(i, j);
  return 0.0;
}

SparseSharedMatrix build_w_tilde(const Mat& w, const Mat& c, int a_dim, int b_dim) {
  if (a_dim != b_dim) {
    throw ConfigError("build_w_tilde: requires A = B (single recurrent layer form)");
  }
  if (w.rows() != w.cols() || c.rows() != c.cols() || w.rows() != c.rows()) {
    throw ConfigError("build_w_tilde: W and C must be square and same size");
  }
  SparseSharedMatrix wt;
  wt.w = w;
  wt.c = c;
  wt.a_dim = a_dim;
  wt.b_dim = b_dim;
  wt.n = static_cast<int>(w.rows());
  wt.dense = wt.flat_dim() <= 64;
  if (wt.dense) {
    const long dim = wt.flat_dim();
    wt.dense_matrix = Mat::Zero(dim, dim);
    for (int cc = 0; cc < a_dim; ++cc)
      for (int dd = 0; dd < b_dim; ++dd)
        for (int i = 0; i < wt.n; ++i)
          for (int a = 0; a < a_dim; ++a)
            for (int b = 0; b < b_dim; ++b)
              for (int j = 0; j < wt.n; ++j) {
                const long row = (static_cast<long>(cc) * b_dim + dd) * wt.n + i;
                const long col = (static_cast<long>(a) * b_dim + b) * wt.n + j;
                wt.dense_matrix(row, col) = w_tilde_entry(w, c, cc, dd, i, a, b, j);
              }
  }
  return wt;
}

double SparseSharedMatrix::entry(int c, int d, int i, int a, int b, int j) const {
  if (dense) {
    const long row = (static_cast<long>(c) * b_dim + d) * n + i;
    const long col = (static_cast<long>(a) * b_dim + b) * n + j;
    return dense_matrix(row, col);
  }
  return w_tilde_entry(w, this->c, c, d, i, a, b, j);
}

long structural_nonzero_count(int a_dim, int n) {
  // Case counts over (c,d,a,b) with A=B: d=a only: A^3-A blocks; d!=a,d=b,c=a:
  // A(A-1); all equal: A. Each block carries N^2 entries.
  const long a = a_dim;
  return (a * a * a + a * a - a) * static_cast<long>(n) * n;
}

Mat step_via_w_tilde(const Mat& states, const SparseSharedMatrix& wt) {
  const int a_dim = wt.a_dim;
  const int b_dim = wt.b_dim;
  const int n = wt.n;
  if (states.rows() != a_dim * b_dim || states.cols() != n) {
    throw ConfigError("step_via_w_tilde: state shape mismatch");
  }
  Mat out(states.rows(), n);
  if (wt.dense) {
    // Flatten (c,d,i) -> one row vector and apply the single big matrix.
    Eigen::RowVectorXd flat(wt.flat_dim());
    for (int c = 0; c < a_dim; ++c)
      for (int d = 0; d < b_dim; ++d)
        for (int i = 0; i < n; ++i)
          flat[(static_cast<long>(c) * b_dim + d) * n + i] = states(c * b_dim + d, i);
    const Eigen::RowVectorXd pre = flat * wt.dense_matrix;
    for (int a = 0; a < a_dim; ++a)
      for (int b = 0; b < b_dim; ++b)
        for (int j = 0; j < n; ++j)
          out(a * b_dim + b, j) =
              std::tanh(pre[(static_cast<long>(a) * b_dim + b) * n + j]);
    return out;
  }
  for (int a = 0; a < a_dim; ++a) {
    for (int b = 0; b < b_dim; ++b) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int c = 0; c < a_dim; ++c)
          for (int d = 0; d < b_dim; ++d)
            for (int i = 0; i < n; ++i)
              acc += states(c * b_dim + d, i) * wt.entry(c, d, i, a, b, j);
        out(a * b_dim + b, j) = std::tanh(acc);
      }
    }
  }
  return out;
}

Mat step_via_messages(const Mat& states, const Mat& w, const Mat& c) {
  const int n = static_cast<int>(w.rows());
  const long cells = states.rows();
  const int b_dim = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells))));
  if (static_cast<long>(b_dim) * b_dim != cells) {
    throw ConfigError("step_via_messages: grid must be square (A = B)");
  }
  const int a_dim = b_dim;
  Mat out(cells, n);
  for (int a = 0; a < a_dim; ++a) {
    // Message term sums states over the first axis with second index = a.
    Vec msg = Vec::Zero(n);
    for (int cc = 0; cc < a_dim; ++cc) msg += states.row(cc * b_dim + a).transpose();
    const Vec msg_j = c.transpose() * msg;
    for (int b = 0; b < b_dim; ++b) {
      const Vec rec = w.transpose() * states.row(a * b_dim + b).transpose();
      out.row(a * b_dim + b) = (rec + msg_j).array().tanh().transpose();
    }
  }
  return out;
}

EquivalenceReport verify_equivalence(int trials, int max_grid, uint64_t seed) {
  if (trials < 1 || max_grid < 1) {
    throw ConfigError("verify_equivalence: trials and max-dim must be positive");
  }
  const int n_choices[] = {1, 2, 4};
  EquivalenceReport report;
  Rng rng(derive_seed(seed, {0x6571}));
  for (int t = 0; t < trials; ++t) {
    const int a_dim = 1 + t % max_grid;
    const int n = n_choices[(t / max_grid) % 3];
    Mat w(n, n), c(n, n), states(a_dim * a_dim, n);
    rng.fill_normal(w);
    rng.fill_normal(c);
    rng.fill_normal(states);
    const SparseSharedMatrix wt = build_w_tilde(w, c, a_dim, a_dim);
    const Mat via_matrix = step_via_w_tilde(states, wt);
    const Mat via_messages = step_via_messages(states, w, c);
    const double dev = (via_matrix - via_messages).cwiseAbs().maxCoeff();
    report.per_trial.push_back(dev);
    report.max_deviation = std::max(report.max_deviation, dev);
  }
  report.trials = trials;
  return report;
}

}  // namespace vsml
