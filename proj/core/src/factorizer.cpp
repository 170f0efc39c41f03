#include "fta/factorizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "fta/rng.hpp"

namespace fta {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ColumnFit {
  std::vector<int> support;  // sorted ascending, size k
  VectorXd coeffs;
  double sse = 0.0;
};

VectorXd solve_ls(const MatrixXd& a, const VectorXd& w, bool* ridge_warning) {
  const MatrixXd g = a.transpose() * a;
  Eigen::LDLT<MatrixXd> ldlt(g);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      g.diagonal().minCoeff() > 0) {
    VectorXd x = ldlt.solve(a.transpose() * w);
    if (x.allFinite()) return x;
  }
  *ridge_warning = true;
  const double ridge = 1e-10 * (g.trace() / g.rows() + 1.0);
  MatrixXd g2 = g;
  g2.diagonal().array() += ridge;
  return g2.ldlt().solve(a.transpose() * w);
}

ColumnFit fit_support(const MatrixXd& ws, const VectorXd& w, std::vector<int> support,
                      bool* ridge_warning) {
  std::sort(support.begin(), support.end());
  MatrixXd a(ws.rows(), support.size());
  for (size_t j = 0; j < support.size(); ++j) a.col(j) = ws.col(support[j]);
  ColumnFit fit;
  fit.coeffs = solve_ls(a, w, ridge_warning);
  fit.sse = (w - a * fit.coeffs).squaredNorm();
  fit.support = std::move(support);
  return fit;
}

// Greedy OMP with the lowest-index tie rule; exactly k atoms, padding with
// the lowest unused atoms if the residual vanishes early.
ColumnFit omp_column(const MatrixXd& ws, const VectorXd& norms, const VectorXd& w,
                     int k, const std::vector<int>* prev_support, bool* ridge_warning) {
  const int h = static_cast<int>(ws.cols());
  std::vector<char> used(h, 0);
  std::vector<int> support;
  VectorXd r = w;
  for (int step = 0; step < k; ++step) {
    int best = -1;
    double best_score = -1.0;
    const VectorXd corr = ws.transpose() * r;
    for (int j = 0; j < h; ++j) {
      if (used[j]) continue;
      const double score = norms[j] > 0 ? std::abs(corr[j]) / norms[j] : 0.0;
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    used[best] = 1;
    support.push_back(best);
    MatrixXd a(ws.rows(), support.size());
    for (size_t j = 0; j < support.size(); ++j) a.col(j) = ws.col(support[j]);
    r = w - a * solve_ls(a, w, ridge_warning);
  }
  ColumnFit fit = fit_support(ws, w, support, ridge_warning);
  if (prev_support != nullptr && *prev_support != fit.support) {
    ColumnFit prev = fit_support(ws, w, *prev_support, ridge_warning);
    if (prev.sse < fit.sse) return prev;
  }
  return fit;
}

struct RunState {
  MatrixXd ws;
  MatrixXd d;  // h x C
  std::vector<std::vector<int>> supports;
  std::vector<double> trace;
  bool converged = false;
  bool ridge_warning = false;
};

RunState run_start(const MatrixXd& w_all, const MatrixXd& ws0, const FactorizationConfig& cfg) {
  const int h = cfg.hidden_width;
  const int c = static_cast<int>(w_all.cols());
  const double total = w_all.squaredNorm();
  RunState st;
  st.ws = ws0;
  st.supports.resize(c);
  std::vector<char> has_support(c, 0);
  double prev_rel = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iterations; ++it) {
    st.d = MatrixXd::Zero(h, c);
    const VectorXd norms = st.ws.colwise().norm();
    for (int col = 0; col < c; ++col) {
      ColumnFit fit = omp_column(st.ws, norms, w_all.col(col), cfg.nz_per_col,
                                 has_support[col] ? &st.supports[col] : nullptr,
                                 &st.ridge_warning);
      st.supports[col] = fit.support;
      has_support[col] = 1;
      for (size_t j = 0; j < fit.support.size(); ++j) {
        st.d(fit.support[j], col) = fit.coeffs[static_cast<Eigen::Index>(j)];
      }
    }
    const double obj = (w_all - st.ws * st.d).squaredNorm();
    st.trace.push_back(obj);
    const double rel = total > 0 ? std::sqrt(obj / total) : 0.0;
    if (prev_rel - rel < cfg.tolerance || obj <= total * 1e-24) {
      st.converged = true;
      break;
    }
    prev_rel = rel;
    if (it + 1 >= cfg.max_iterations) break;
    // dictionary step: Ws = W D^T (D D^T)^-1
    const MatrixXd g = st.d * st.d.transpose();
    Eigen::LDLT<MatrixXd> ldlt(g);
    bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
              g.diagonal().minCoeff() > 0;
    if (ok) {
      MatrixXd ws_new = ldlt.solve(st.d * w_all.transpose()).transpose();
      if (ws_new.allFinite()) {
        st.ws = ws_new;
        continue;
      }
    }
    st.ridge_warning = true;
    MatrixXd g2 = g;
    g2.diagonal().array() += 1e-10 * (g.trace() / h + 1.0);
    st.ws = g2.ldlt().solve(st.d * w_all.transpose()).transpose();
  }
  return st;
}

// Start 1: pick h data columns greedily, largest norm first, then repeatedly
// the column worst represented by the span of the picks so far.
MatrixXd greedy_column_init(const MatrixXd& w_all, int h) {
  const int c = static_cast<int>(w_all.cols());
  std::vector<int> picks;
  int next = 0;
  double best = -1.0;
  for (int j = 0; j < c; ++j) {
    const double n = w_all.col(j).squaredNorm();
    if (n > best) {
      best = n;
      next = j;
    }
  }
  MatrixXd ws(w_all.rows(), h);
  for (int step = 0; step < h; ++step) {
    picks.push_back(next);
    MatrixXd a(w_all.rows(), picks.size());
    for (size_t j = 0; j < picks.size(); ++j) a.col(j) = w_all.col(picks[j]);
    const Eigen::HouseholderQR<MatrixXd> qr(a);
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
    const MatrixXd resid = w_all - q * (q.transpose() * w_all);
    best = -1.0;
    for (int j = 0; j < c; ++j) {
      if (std::find(picks.begin(), picks.end(), j) != picks.end()) continue;
      const double n = resid.col(j).squaredNorm();
      if (n > best) {
        best = n;
        next = j;
      }
    }
  }
  for (int j = 0; j < h; ++j) {
    const double n = w_all.col(picks[j]).norm();
    ws.col(j) = n > 0 ? (w_all.col(picks[j]) / n).eval() : w_all.col(picks[j]);
  }
  return ws;
}

MatrixXd random_orthonormal(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
  }
  const Eigen::HouseholderQR<MatrixXd> qr(m);
  return qr.householderQ() * MatrixXd::Identity(rows, cols);
}

}  // namespace

RealMatrix densify_real(const RealSparse& s) {
  RealMatrix out(s.rows, s.cols);
  for (int c = 0; c < s.cols; ++c) {
    for (int j = 0; j < s.nz_per_col; ++j) out.at(s.idx(c, j), c) = s.val(c, j);
  }
  return out;
}

void FactorizationConfig::validate() const {
  require(hidden_width >= 1, "factorize: hidden width must be >= 1");
  require(nz_per_col >= 1 && nz_per_col <= hidden_width,
          "factorize: need hidden_width >= nz_per_col >= 1");
  require(tolerance > 0, "factorize: tolerance must be positive");
  require(max_iterations >= 1, "factorize: max_iterations must be >= 1");
  require(num_starts >= 1, "factorize: num_starts must be >= 1");
}

FactorizationResult factorize(const std::vector<RealMatrix>& w_list,
                              const FactorizationConfig& cfg) {
  cfg.validate();
  require(!w_list.empty(), "factorize: empty input list");
  const int d = w_list[0].rows;
  int c_total = 0;
  for (const RealMatrix& w : w_list) {
    require(w.rows == d, "factorize: all inputs must share the row dimension");
    require(w.cols > 0, "factorize: empty input matrix");
    c_total += w.cols;
  }
  MatrixXd w_all(d, c_total);
  {
    int col = 0;
    for (const RealMatrix& w : w_list) {
      for (int j = 0; j < w.cols; ++j, ++col) {
        for (int i = 0; i < d; ++i) w_all(i, col) = w.at(i, j);
      }
    }
  }
  const double total = w_all.squaredNorm();
  const int h = cfg.hidden_width;

  RunState best;
  int best_start = 0;
  int starts_run = 0;
  for (int s = 0; s < cfg.num_starts; ++s) {
    MatrixXd ws0;
    if (s == 0) {
      Eigen::BDCSVD<MatrixXd> svd(w_all, Eigen::ComputeThinU);
      const MatrixXd& u = svd.matrixU();
      if (u.cols() >= h) {
        ws0 = u.leftCols(h);
      } else {
        ws0 = MatrixXd(d, h);
        ws0.leftCols(u.cols()) = u;
        ws0.rightCols(h - u.cols()) = random_orthonormal(d, h - static_cast<int>(u.cols()),
                                                         cfg.seed).leftCols(h - u.cols());
      }
    } else if (s == 1) {
      ws0 = greedy_column_init(w_all, h);
    } else {
      ws0 = random_orthonormal(d, h, cfg.seed * 7919 + s);
    }
    RunState st = run_start(w_all, ws0, cfg);
    ++starts_run;
    if (starts_run == 1 || st.trace.back() < best.trace.back()) {
      best = std::move(st);
      best_start = s;
    }
    if (best.trace.back() <= total * 1e-22) break;
  }

  FactorizationResult res;
  res.starts_run = starts_run;
  res.selected_start = best_start;
  res.converged = best.converged;
  res.ridge_warning = best.ridge_warning;
  res.objective_trace = best.trace;
  res.ws = RealMatrix(d, h);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < h; ++j) res.ws.at(i, j) = best.ws(i, j);
  }
  int col = 0;
  for (const RealMatrix& w : w_list) {
    RealSparse sp;
    sp.rows = h;
    sp.cols = w.cols;
    sp.nz_per_col = cfg.nz_per_col;
    sp.row_idx.resize(static_cast<size_t>(w.cols) * cfg.nz_per_col);
    sp.values.resize(sp.row_idx.size());
    double sse = 0.0, ref = 0.0;
    for (int j = 0; j < w.cols; ++j, ++col) {
      const std::vector<int>& sup = best.supports[col];
      for (int t = 0; t < cfg.nz_per_col; ++t) {
        sp.row_idx[static_cast<size_t>(j) * cfg.nz_per_col + t] = sup[t];
        sp.values[static_cast<size_t>(j) * cfg.nz_per_col + t] = best.d(sup[t], j);
      }
      sse += (w_all.col(col) - best.ws * best.d.col(col)).squaredNorm();
      ref += w_all.col(col).squaredNorm();
    }
    res.residuals.push_back(ref > 0 ? std::sqrt(sse / ref) : 0.0);
    res.wd.push_back(std::move(sp));
  }
  return res;
}

QuantizedFactors quantize_result(const FactorizationResult& res, int frac_bits) {
  require(frac_bits >= 0 && frac_bits <= kMaxFracBits, "frac_bits out of range");
  const double scale = static_cast<double>(INT64_C(1) << frac_bits);
  QuantizedFactors out;
  out.ws = IntMatrix(res.ws.rows, res.ws.cols, 16);
  auto quantize = [&](double v) {
    const double r = std::nearbyint(v * scale);  // round half to even
    if (r > 32767.0 || r < -32768.0) ++out.saturation_count;
    return sat16(static_cast<int64_t>(r));
  };
  for (int i = 0; i < res.ws.rows; ++i) {
    for (int j = 0; j < res.ws.cols; ++j) out.ws.at(i, j) = quantize(res.ws.at(i, j));
  }
  for (const RealSparse& sp : res.wd) {
    SparseMatrixFixedNZ s(sp.rows, sp.cols, sp.nz_per_col);
    for (int c = 0; c < sp.cols; ++c) {
      for (int j = 0; j < sp.nz_per_col; ++j) {
        s.rec(c, j) = {static_cast<uint16_t>(sp.idx(c, j)), quantize(sp.val(c, j))};
      }
    }
    s.validate();
    out.wd.push_back(std::move(s));
  }
  return out;
}

}  // namespace fta
