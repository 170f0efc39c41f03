#include "fta/afu_math.hpp"

#include <algorithm>
#include <cmath>

#include "fta/errors.hpp"

namespace fta::afu {
namespace {

int lut_index(int64_t x, int64_t lo, int64_t hi) {
  // round((x - lo) * 255 / (hi - lo)) with x clamped into [lo, hi]
  x = std::clamp(x, lo, hi);
  return static_cast<int>(div_round((x - lo) * (kLutSize - 1), hi - lo));
}

}  // namespace

Lut build_exp_lut() {
  Lut lut{};
  for (int j = 0; j < kLutSize; ++j) {
    const double x = -kExpDomain + kExpDomain * j / (kLutSize - 1);
    lut[j] = sat16(static_cast<int64_t>(std::lround(std::exp(x) * (1 << kExpLutFracBits))));
  }
  return lut;
}

Lut build_gelu_lut(int frac_bits) {
  Lut lut{};
  for (int j = 0; j < kLutSize; ++j) {
    const double x = -kGeluDomain + 2.0 * kGeluDomain * j / (kLutSize - 1);
    const double g = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    lut[j] = sat16(static_cast<int64_t>(std::lround(g * (1 << frac_bits))));
  }
  return lut;
}

void softmax_row(std::span<int16_t> row, const Lut& exp_lut, int frac_bits) {
  require(!row.empty(), "softmax: empty row");
  const int64_t one = INT64_C(1) << frac_bits;
  int16_t mx = row[0];
  for (int16_t v : row) mx = std::max(mx, v);
  int64_t sum = 0;
  std::vector<int32_t> exps(row.size());
  for (size_t i = 0; i < row.size(); ++i) {
    const int64_t e = static_cast<int64_t>(row[i]) - mx;  // <= 0
    const int idx = lut_index(e, -static_cast<int64_t>(kExpDomain) * one, 0);
    exps[i] = exp_lut[idx];
    sum += exps[i];
  }
  // sum >= exp(0) entry > 0
  for (size_t i = 0; i < row.size(); ++i) {
    row[i] = sat16(div_round(static_cast<int64_t>(exps[i]) << frac_bits, sum));
  }
}

void softmax_row_fau(std::span<int16_t> row, const Lut& exp_lut, int frac_bits) {
  require(!row.empty(), "softmax: empty row");
  const int64_t one = INT64_C(1) << frac_bits;
  int16_t mx = row[0];
  for (int16_t v : row) mx = std::max(mx, v);
  std::vector<uint16_t> exps(row.size());
  float sum = 0.0f;
  for (size_t i = 0; i < row.size(); ++i) {
    const int64_t e = static_cast<int64_t>(row[i]) - mx;
    const int idx = lut_index(e, -static_cast<int64_t>(kExpDomain) * one, 0);
    exps[i] = float_to_bf16(static_cast<float>(exp_lut[idx]));
    sum += bf16_to_float(exps[i]);
  }
  const uint16_t sum_bf = float_to_bf16(sum);
  for (size_t i = 0; i < row.size(); ++i) {
    const float q = bf16_to_float(exps[i]) / bf16_to_float(sum_bf);
    row[i] = sat16(static_cast<int64_t>(std::lround(
        static_cast<double>(bf16_to_float(float_to_bf16(q))) * one)));
  }
}

void layernorm_row(std::span<int16_t> row, int frac_bits) {
  require(!row.empty(), "layernorm: empty row");
  const int64_t n = static_cast<int64_t>(row.size());
  int64_t sum = 0;
  for (int16_t v : row) sum += v;
  const int64_t mean = div_round_signed(sum, n);
  int64_t sq = 0;
  for (int16_t v : row) {
    const int64_t c = v - mean;
    sq += c * c;
  }
  const int64_t var = div_round(sq, n);     // scale 2^(2F)
  int64_t denom = isqrt64(var);             // scale 2^F
  if (denom == 0) denom = 1;
  for (size_t i = 0; i < row.size(); ++i) {
    const int64_t c = row[i] - mean;
    row[i] = sat16(div_round_signed(c << frac_bits, denom));
  }
}

void gelu_row(std::span<int16_t> row, const Lut& gelu_lut, int frac_bits) {
  require(!row.empty(), "gelu: empty row");
  const int64_t one = INT64_C(1) << frac_bits;
  const int64_t dom = static_cast<int64_t>(kGeluDomain) * one;
  for (size_t i = 0; i < row.size(); ++i) {
    row[i] = gelu_lut[lut_index(row[i], -dom, dom)];
  }
}

void residual_row(std::span<int16_t> row, std::span<const int16_t> other) {
  require(row.size() == other.size(), "residual: width mismatch");
  for (size_t i = 0; i < row.size(); ++i) row[i] = sat_add16(row[i], other[i]);
}

}  // namespace fta::afu
