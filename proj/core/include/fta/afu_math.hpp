#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fta/fixed.hpp"

namespace fta::afu {

// Fixed-point recipes for the auxiliary function unit. These definitions are
// the single source of truth: the reference pipeline and the simulator both
// evaluate them, so the two routes can only differ in how matrix stages are
// computed, never in the elementwise math.
//
// LUT geometry:
//   exp:  256 entries over [-8, 0] (applied after max-subtraction), entry j
//         holds round(exp(-8 + 8j/255) * 2^14). Pure lookup, no interpolation.
//   gelu: 256 entries over [-4, 4], entry j holds round(gelu(-4 + 8j/255) * 2^F).
//         Inputs outside the domain clamp to the nearest end.
//
// Error bounds (checked against double-precision oracles in tests): the LUT
// input step is 8/255; both functions have |slope| <= ~1.13 on their domains,
// so 2*(8/255) bounds the absolute output error with margin.

inline constexpr int kLutSize = 256;
inline constexpr int kExpLutFracBits = 14;          // exp(0) -> 16384
inline constexpr double kExpDomain = 8.0;           // [-8, 0]
inline constexpr double kGeluDomain = 4.0;          // [-4, 4]
inline constexpr double kLutInputStep = 8.0 / 255.0;
inline constexpr double kSoftmaxAbsErrorBound = 2.0 * kLutInputStep;
inline constexpr double kGeluAbsErrorBound = 2.0 * kLutInputStep;

// IAU pass counts per row, the unit of the AFU cycle model.
inline constexpr int kSoftmaxPasses = 4;    // max, exp, sum, divide
inline constexpr int kLayernormPasses = 5;  // mean, center, square-sum, rsqrt, scale
inline constexpr int kGeluPasses = 1;
inline constexpr int kResidualPasses = 1;
inline constexpr int kIauLanes = 64;

using Lut = std::array<int16_t, kLutSize>;

Lut build_exp_lut();
Lut build_gelu_lut(int frac_bits);

// Softmax over one row: max-subtract, exp LUT, integer sum, rounded
// fixed-point divide. Output carries frac_bits fraction bits and sums to
// 1.0 within one LSB per element.
void softmax_row(std::span<int16_t> row, const Lut& exp_lut, int frac_bits);

// Layer normalization without affine parameters: subtract the rounded mean,
// divide by the floor-isqrt of the mean squared deviation.
void layernorm_row(std::span<int16_t> row, int frac_bits);

// GELU via table lookup.
void gelu_row(std::span<int16_t> row, const Lut& gelu_lut, int frac_bits);

// Saturating elementwise add of `other` into `row`.
void residual_row(std::span<int16_t> row, std::span<const int16_t> other);

// FAU stand-in: the divide step of softmax evaluated in BF16 instead of the
// integer pipeline. Selected per sub-op when a model asks for the float path.
void softmax_row_fau(std::span<int16_t> row, const Lut& exp_lut, int frac_bits);

}  // namespace fta::afu
