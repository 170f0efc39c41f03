#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fta/errors.hpp"
#include "fta/fixed.hpp"

namespace fta {

// Row-major signed integer matrix. `bitwidth` (4/8/16) declares the legal
// value range; storage is always int16.
struct IntMatrix {
  int rows = 0;
  int cols = 0;
  int bitwidth = 16;
  std::vector<int16_t> data;

  IntMatrix() = default;
  IntMatrix(int r, int c, int bits = 16)
      : rows(r), cols(c), bitwidth(bits), data(static_cast<size_t>(r) * c, 0) {}

  int16_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  int16_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool operator==(const IntMatrix& o) const = default;

  void validate() const;
};

struct SparseRecord {
  uint16_t row = 0;
  int16_t value = 0;
  bool operator==(const SparseRecord& o) const = default;
};

// Column-compressed sparse matrix with exactly `nz_per_col` records per
// column, rows strictly increasing within each column. Zero-valued records
// are legal fillers. rows <= 256 so a raw index fits 8 bits.
struct SparseMatrixFixedNZ {
  int rows = 0;
  int cols = 0;
  int nz_per_col = 0;
  std::vector<SparseRecord> records;  // column-major: col*nz_per_col + j

  SparseMatrixFixedNZ() = default;
  SparseMatrixFixedNZ(int r, int c, int k)
      : rows(r), cols(c), nz_per_col(k), records(static_cast<size_t>(c) * k) {}

  SparseRecord& rec(int col, int j) { return records[static_cast<size_t>(col) * nz_per_col + j]; }
  const SparseRecord& rec(int col, int j) const {
    return records[static_cast<size_t>(col) * nz_per_col + j];
  }

  bool operator==(const SparseMatrixFixedNZ& o) const = default;

  void validate() const;
};

inline constexpr int kMaxSparseRows = 256;

IntMatrix densify(const SparseMatrixFixedNZ& s);

// Inverse of densify for matrices with at most k nonzeros per column; columns
// with fewer are padded with zero-valued records at the lowest free rows.
SparseMatrixFixedNZ sparsify(const IntMatrix& dense, int nz_per_col);

// Binary blob round trip. 16-byte little-endian header (magic, rows, cols,
// bitwidth), then int16 payload; sparse blobs use a (row u16, value i16)
// record payload.
void save_matrix(const std::filesystem::path& path, const IntMatrix& m);
IntMatrix load_matrix(const std::filesystem::path& path);
void save_sparse(const std::filesystem::path& path, const SparseMatrixFixedNZ& s);
SparseMatrixFixedNZ load_sparse(const std::filesystem::path& path);

std::vector<uint8_t> matrix_to_bytes(const IntMatrix& m);
IntMatrix matrix_from_bytes(const std::vector<uint8_t>& bytes);

}  // namespace fta
