#pragma once

#include <bit>
#include <cstdint>
#include <cstring>

namespace fta {

// Global fixed-point convention: 16b signed values carry `frac_bits` fraction
// bits (default 8, i.e. 1.0 == 256 raw). Wide accumulators are exact; the 32b
// accumulator saturates at readout, and the shift back to 16b saturates
// instead of wrapping.

inline constexpr int kDefaultFracBits = 8;
inline constexpr int kMaxFracBits = 12;

constexpr int16_t sat16(int64_t v) {
  if (v > 32767) return 32767;
  if (v < -32768) return -32768;
  return static_cast<int16_t>(v);
}

constexpr int32_t sat32(int64_t v) {
  if (v > 2147483647LL) return 2147483647;
  if (v < -2147483648LL) return INT32_C(-2147483647) - 1;
  return static_cast<int32_t>(v);
}

// Accumulator readout: saturate to 32b, arithmetic shift by frac_bits,
// saturate to 16b.
constexpr int16_t requantize(int64_t acc, int frac_bits) {
  int64_t a = sat32(acc);
  return sat16(a >> frac_bits);
}

constexpr int16_t sat_add16(int16_t a, int16_t b) {
  return sat16(static_cast<int64_t>(a) + b);
}

constexpr int16_t sat_sub16(int16_t a, int16_t b) {
  return sat16(static_cast<int64_t>(a) - b);
}

// a*b at the shared scale: (a*b) >> frac_bits, saturated.
constexpr int16_t sat_mul16(int16_t a, int16_t b, int frac_bits) {
  return requantize(static_cast<int64_t>(a) * b, frac_bits);
}

// Rounded division of non-negative num by positive den.
constexpr int64_t div_round(int64_t num, int64_t den) {
  return (num + den / 2) / den;
}

// Round-half-away-from-zero for signed numerators.
constexpr int64_t div_round_signed(int64_t num, int64_t den) {
  if (num >= 0) return (num + den / 2) / den;
  return -((-num + den / 2) / den);
}

// Value range of a signed two's-complement bitwidth.
constexpr int16_t bitwidth_min(int bits) {
  return static_cast<int16_t>(-(1 << (bits - 1)));
}
constexpr int16_t bitwidth_max(int bits) {
  return static_cast<int16_t>((1 << (bits - 1)) - 1);
}

constexpr int16_t clamp_to_bits(int16_t v, int bits) {
  if (bits >= 16) return v;
  const int16_t lo = bitwidth_min(bits), hi = bitwidth_max(bits);
  if (v < lo) return lo;
  if (v > hi) return hi;
  return v;
}

constexpr bool fits_bits(int64_t v, int bits) {
  return v >= -(INT64_C(1) << (bits - 1)) && v <= (INT64_C(1) << (bits - 1)) - 1;
}

// Floor integer square root.
constexpr int64_t isqrt64(int64_t v) {
  if (v <= 0) return 0;
  int64_t x = v, y = (x + 1) / 2;
  while (y < x) {
    x = y;
    y = (x + v / x) / 2;
  }
  return x;
}

// BF16 conversions (round-to-nearest-even), the functional stand-in for the
// AFU float path and its INT32 converters.
inline uint16_t float_to_bf16(float f) {
  uint32_t bits = std::bit_cast<uint32_t>(f);
  const uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  return static_cast<uint16_t>(bits >> 16);
}

inline float bf16_to_float(uint16_t h) {
  const uint32_t bits = static_cast<uint32_t>(h) << 16;
  return std::bit_cast<float>(bits);
}

}  // namespace fta
