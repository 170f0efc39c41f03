#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fta/matrix.hpp"
#include "fta/model.hpp"
#include "fta/reference.hpp"

namespace fta {

// Compression pipeline and the pointer-free serialized container.
//
// Dictionary side: 16b-to-4b non-uniform quantization, one 16-entry codebook
// per dict group, dequantized by table lookup.
// Sparse side: shared row/column permutation to shrink index deltas, 8b-to-5b
// delta-encoded indices (first delta is the absolute first index) and
// 16b-to-6b uniform value quantization with per-section grid endpoints (m, M).
// Gaps wider than 31 are split by zero-valued filler records; the section's
// fixed per-column record count is raised uniformly so offsets stay
// computable as col*k*11 bits.

inline constexpr int kCodebookSize = 16;
inline constexpr int kDeltaBits = 5;
inline constexpr int kMaxDelta = 31;
inline constexpr int kValueBits = 6;
inline constexpr int kMaxValueCode = 63;
inline constexpr int kRecordBits = kDeltaBits + kValueBits;

struct NonUniformCodebook {
  std::array<int16_t, kCodebookSize> levels{};  // strictly increasing

  void validate() const;
};

struct WsQuantized {
  std::vector<uint8_t> codes;  // row-major, one 0..15 code per element
  NonUniformCodebook codebook;
};

// Scalar Lloyd-Max with deterministic quantile and uniform-grid starts; the
// best codebook seen across both runs is kept, so the reconstruction MSE
// never exceeds a 16-level uniform grid on the same data.
WsQuantized quantize_ws(const IntMatrix& ws);

IntMatrix dequantize_ws(const std::vector<uint8_t>& codes, int rows, int cols,
                        const NonUniformCodebook& codebook);

// perm[new_position] = original row. Shared by every layer of a group.
using Permutation = std::vector<uint16_t>;

Permutation identity_permutation(int rows);

// Greedy nearest-neighbor chaining on row occupancy: start at the densest
// row, append the unvisited row with the smallest summed per-column gap
// increase (ties to the lowest row), unoccupied rows last. Falls back to the
// identity if the chained order does not beat it.
Permutation find_permutation(const std::vector<const SparseMatrixFixedNZ*>& wd_list,
                             int rows);

uint64_t total_delta_sum(const std::vector<const SparseMatrixFixedNZ*>& wd_list,
                         const Permutation& perm);

struct EncodedSection {
  uint16_t cols = 0;
  uint16_t k = 0;                    // records per column, after any filler raise
  int16_t m = 0;                     // value grid endpoints; 63 divides (M - m)
  int16_t M = 0;
  std::vector<uint8_t> deltas;       // col-major, k per column, 0..31
  std::vector<uint8_t> value_codes;  // col-major, 0..63
  int fillers_added = 0;

  uint64_t payload_bytes() const;    // 4 (m, M) + bit-packed records padded to a byte
};

EncodedSection encode_wd(const SparseMatrixFixedNZ& wd, const Permutation& perm);

// Reconstructs absolute indices (prefix sums, then inverse permutation) and
// dequantizes values: decode(c) = m + round(c*(M-m)/63).
SparseMatrixFixedNZ decode_wd(const EncodedSection& sec, int rows, const Permutation& perm);

int16_t decode_value(uint8_t code, int16_t m, int16_t M);

struct PackageGroup {
  uint16_t in_width = 0;
  uint16_t hidden_width = 0;
  uint16_t base_k = 0;  // the model's k before any filler raise
  NonUniformCodebook codebook;
  Permutation perm;            // hidden_width entries
  std::vector<uint8_t> ws_codes;  // row-major over in_width x hidden_width, permuted columns
};

struct PackageSection {
  uint8_t group_id = 0;
  uint8_t layer = 0;
  uint8_t sub_op = 0;
  EncodedSection enc;
};

struct CompressedPackage {
  uint8_t version = 1;
  std::vector<PackageGroup> groups;
  std::vector<PackageSection> sections;

  uint64_t total_bytes() const;
  uint64_t ws_preload_bytes() const;  // everything except section payloads
  uint64_t wd_payload_bytes() const;
  uint64_t wd_layer_bytes(int layer) const;
  int layer_count() const;

  // Closed-form serialized size; serialization asserts against it.
  uint64_t formula_bits() const;

  void validate() const;
};

std::vector<uint8_t> serialize_package(const CompressedPackage& pkg);
CompressedPackage deserialize_package(const std::vector<uint8_t>& bytes);
void save_package(const std::filesystem::path& path, const CompressedPackage& pkg);
CompressedPackage load_package(const std::filesystem::path& path);

// Compress quantized factors against a model: one permutation and codebook
// per dict group, one encoded section per matmul sub-op.
CompressedPackage build_package(const ModelSpec& model,
                                const std::map<std::string, IntMatrix>& ws_by_group,
                                const std::vector<SparseMatrixFixedNZ>& wd_by_section);

// Oracle-side view: dequantized dictionaries and decoded sparse factors in
// the original index space.
DecodedWeights decode_package(const ModelSpec& model, const CompressedPackage& pkg);

void validate_package_against_model(const CompressedPackage& pkg, const ModelSpec& model);

// External-memory traffic: the dictionary side is preloaded once, sparse
// sections are reloaded once per batch group, plus optional per-inference
// activation spill.
uint64_t ema_bytes(const CompressedPackage& pkg, const ModelSpec& model,
                   uint64_t n_inferences, int batch,
                   uint64_t activation_bytes_per_inference = 0);

std::string format_package_stat(const CompressedPackage& pkg);

}  // namespace fta
