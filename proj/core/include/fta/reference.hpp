#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fta/afu_math.hpp"
#include "fta/matrix.hpp"
#include "fta/model.hpp"

namespace fta {

// Scalar reference implementations. Every simulator run is checked bit-exact
// against these; keep them free of any tiling, buffering or scheduling logic.

// C = (A * B) with exact wide accumulation, 32b accumulator saturation at
// readout, then arithmetic shift by frac_bits and 16b saturation.
IntMatrix matmul_ref(const IntMatrix& a, const IntMatrix& b, int frac_bits);

// (X * Ws) * Wd, both stages through matmul_ref.
IntMatrix sequential_ref(const IntMatrix& x, const IntMatrix& ws,
                         const SparseMatrixFixedNZ& wd, int frac_bits);

struct MacCounts {
  uint64_t sequential = 0;  // L*d*h + L*k*d_out
  uint64_t fused = 0;       // L*d*d_out, X times a precomputed product
  uint64_t original = 0;    // L*d*d_out, X times the dense weight
};

MacCounts mac_counts(uint64_t l, uint64_t d, uint64_t h, uint64_t d_out, uint64_t k);

// Weights as the oracle consumes them: dequantized dictionaries and decoded
// sparse factors, both in the original (unpermuted) index space.
struct DecodedWeights {
  std::map<std::string, IntMatrix> ws;   // per dict group
  std::vector<SparseMatrixFixedNZ> wd;   // per section, model.sections() order
};

// Golden pipeline: per layer, clamp activations to the layer's declared
// bitwidth, then run sub-ops in order. Matmuls go through sequential_ref;
// softmax/layernorm/gelu/residual apply the afu recipes row by row. The
// residual anchor starts at the layer input and re-anchors after each add.
IntMatrix reference_pipeline(const ModelSpec& model, const DecodedWeights& weights,
                             const IntMatrix& x, int frac_bits);

}  // namespace fta
