#include "fta/matrix.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fta {
namespace {

constexpr uint32_t kMatrixMagic = 0x4d415446;  // "FTAM"
constexpr uint32_t kSparseMagic = 0x53415446;  // "FTAS"

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_i16(std::vector<uint8_t>& out, int16_t v) {
  const uint16_t u = static_cast<uint16_t>(v);
  out.push_back(static_cast<uint8_t>(u & 0xff));
  out.push_back(static_cast<uint8_t>(u >> 8));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

int16_t get_i16(const uint8_t* p) {
  return static_cast<int16_t>(static_cast<uint16_t>(p[0]) |
                              (static_cast<uint16_t>(p[1]) << 8));
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open file for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), "short write: " + path.string());
}

}  // namespace

void IntMatrix::validate() const {
  require(rows > 0 && cols > 0, "matrix dims must be positive");
  require(bitwidth == 4 || bitwidth == 8 || bitwidth == 16,
          "bitwidth must be 4, 8 or 16");
  require(data.size() == static_cast<size_t>(rows) * cols,
          "matrix data length != rows*cols");
  const int16_t lo = bitwidth_min(bitwidth), hi = bitwidth_max(bitwidth);
  for (int16_t v : data) {
    require(v >= lo && v <= hi, "matrix element out of declared bitwidth range");
  }
}

void SparseMatrixFixedNZ::validate() const {
  require(rows > 0 && cols > 0, "sparse dims must be positive");
  require(rows <= kMaxSparseRows, "sparse rows must be <= 256");
  require(nz_per_col >= 1 && nz_per_col <= rows,
          "nz_per_col must be in [1, rows]");
  require(records.size() == static_cast<size_t>(cols) * nz_per_col,
          "sparse record count != cols*k");
  for (int c = 0; c < cols; ++c) {
    int prev = -1;
    for (int j = 0; j < nz_per_col; ++j) {
      const SparseRecord& r = rec(c, j);
      require(r.row < rows, "sparse row index out of range");
      require(static_cast<int>(r.row) > prev,
              "sparse row indices not strictly increasing");
      prev = r.row;
    }
  }
}

IntMatrix densify(const SparseMatrixFixedNZ& s) {
  IntMatrix out(s.rows, s.cols, 16);
  for (int c = 0; c < s.cols; ++c) {
    for (int j = 0; j < s.nz_per_col; ++j) {
      const SparseRecord& r = s.rec(c, j);
      out.at(r.row, c) = r.value;
    }
  }
  return out;
}

SparseMatrixFixedNZ sparsify(const IntMatrix& dense, int nz_per_col) {
  require(dense.rows <= kMaxSparseRows, "sparsify: rows must be <= 256");
  SparseMatrixFixedNZ out(dense.rows, dense.cols, nz_per_col);
  for (int c = 0; c < dense.cols; ++c) {
    std::vector<uint16_t> nz_rows;
    for (int r = 0; r < dense.rows; ++r) {
      if (dense.at(r, c) != 0) nz_rows.push_back(static_cast<uint16_t>(r));
    }
    require(static_cast<int>(nz_rows.size()) <= nz_per_col,
            "sparsify: column has more than k nonzeros");
    // pad with zero-valued fillers at the lowest free rows
    for (int r = 0; static_cast<int>(nz_rows.size()) < nz_per_col; ++r) {
      if (dense.at(r, c) == 0) nz_rows.push_back(static_cast<uint16_t>(r));
    }
    std::sort(nz_rows.begin(), nz_rows.end());
    for (int j = 0; j < nz_per_col; ++j) {
      out.rec(c, j) = {nz_rows[j], dense.at(nz_rows[j], c)};
    }
  }
  out.validate();
  return out;
}

std::vector<uint8_t> matrix_to_bytes(const IntMatrix& m) {
  m.validate();
  std::vector<uint8_t> out;
  out.reserve(16 + m.data.size() * 2);
  put_u32(out, kMatrixMagic);
  put_u32(out, static_cast<uint32_t>(m.rows));
  put_u32(out, static_cast<uint32_t>(m.cols));
  put_u32(out, static_cast<uint32_t>(m.bitwidth));
  for (int16_t v : m.data) put_i16(out, v);
  return out;
}

IntMatrix matrix_from_bytes(const std::vector<uint8_t>& bytes) {
  require(bytes.size() >= 16, "matrix blob too short");
  require(get_u32(bytes.data()) == kMatrixMagic, "bad matrix magic");
  IntMatrix m;
  m.rows = static_cast<int>(get_u32(bytes.data() + 4));
  m.cols = static_cast<int>(get_u32(bytes.data() + 8));
  m.bitwidth = static_cast<int>(get_u32(bytes.data() + 12));
  require(m.rows > 0 && m.cols > 0 && m.rows < (1 << 20) && m.cols < (1 << 20),
          "matrix blob dims implausible");
  const size_t n = static_cast<size_t>(m.rows) * m.cols;
  require(bytes.size() == 16 + n * 2, "matrix blob payload length mismatch");
  m.data.resize(n);
  for (size_t i = 0; i < n; ++i) m.data[i] = get_i16(bytes.data() + 16 + i * 2);
  m.validate();
  return m;
}

void save_matrix(const std::filesystem::path& path, const IntMatrix& m) {
  write_file(path, matrix_to_bytes(m));
}

IntMatrix load_matrix(const std::filesystem::path& path) {
  return matrix_from_bytes(read_file(path));
}

void save_sparse(const std::filesystem::path& path, const SparseMatrixFixedNZ& s) {
  s.validate();
  std::vector<uint8_t> out;
  out.reserve(16 + s.records.size() * 4);
  put_u32(out, kSparseMagic);
  put_u32(out, static_cast<uint32_t>(s.rows));
  put_u32(out, static_cast<uint32_t>(s.cols));
  put_u32(out, static_cast<uint32_t>(s.nz_per_col));
  for (const SparseRecord& r : s.records) {
    out.push_back(static_cast<uint8_t>(r.row & 0xff));
    out.push_back(static_cast<uint8_t>(r.row >> 8));
    put_i16(out, r.value);
  }
  write_file(path, out);
}

SparseMatrixFixedNZ load_sparse(const std::filesystem::path& path) {
  std::vector<uint8_t> bytes = read_file(path);
  require(bytes.size() >= 16, "sparse blob too short");
  require(get_u32(bytes.data()) == kSparseMagic, "bad sparse magic");
  SparseMatrixFixedNZ s;
  s.rows = static_cast<int>(get_u32(bytes.data() + 4));
  s.cols = static_cast<int>(get_u32(bytes.data() + 8));
  s.nz_per_col = static_cast<int>(get_u32(bytes.data() + 12));
  require(s.rows > 0 && s.cols > 0 && s.nz_per_col > 0, "sparse blob dims implausible");
  const size_t n = static_cast<size_t>(s.cols) * s.nz_per_col;
  require(bytes.size() == 16 + n * 4, "sparse blob payload length mismatch");
  s.records.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const uint8_t* p = bytes.data() + 16 + i * 4;
    s.records[i].row = static_cast<uint16_t>(p[0] | (p[1] << 8));
    s.records[i].value = get_i16(p + 2);
  }
  s.validate();
  return s;
}

}  // namespace fta
