#pragma once

#include <cstdint>
#include <vector>

#include "fta/matrix.hpp"

namespace fta {

// Row-major real matrix used only on the factorization side.
struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// Column-sparse real matrix with exactly k entries per column.
struct RealSparse {
  int rows = 0;
  int cols = 0;
  int nz_per_col = 0;
  std::vector<int> row_idx;      // col-major, k per column, strictly increasing
  std::vector<double> values;

  int idx(int col, int j) const { return row_idx[static_cast<size_t>(col) * nz_per_col + j]; }
  double val(int col, int j) const { return values[static_cast<size_t>(col) * nz_per_col + j]; }
};

RealMatrix densify_real(const RealSparse& s);

struct FactorizationConfig {
  int hidden_width = 0;
  int nz_per_col = 0;
  int max_iterations = 60;
  double tolerance = 1e-9;  // stop when the relative residual improves less
  uint64_t seed = 0;
  int num_starts = 4;       // svd init, greedy column init, then seeded random

  void validate() const;
};

struct FactorizationResult {
  RealMatrix ws;                        // d x h shared dictionary
  std::vector<RealSparse> wd;           // one per input matrix
  std::vector<double> residuals;        // per input, relative Frobenius error
  std::vector<double> objective_trace;  // selected start, sum of squared errors
  bool converged = false;
  bool ridge_warning = false;
  int starts_run = 0;
  int selected_start = 0;
};

// Alternating minimization: fix the sparse factors and solve the dictionary
// by least squares over the horizontally stacked system; fix the dictionary
// and re-solve every sparse column by orthogonal matching pursuit (k atoms,
// ties to the lowest column index, never worse than re-fitting the previous
// support). The objective is non-increasing across iterations except when
// the ridge fallback fires (reported via ridge_warning). Runs several
// deterministic starts and returns the best.
FactorizationResult factorize(const std::vector<RealMatrix>& w_list,
                              const FactorizationConfig& cfg);

struct QuantizedFactors {
  IntMatrix ws;
  std::vector<SparseMatrixFixedNZ> wd;
  int saturation_count = 0;
};

// Scale by 2^frac_bits, round to nearest even, saturate to 16b. Sparsity
// patterns are preserved exactly (rounded-to-zero values keep their slots).
QuantizedFactors quantize_result(const FactorizationResult& res, int frac_bits);

}  // namespace fta
