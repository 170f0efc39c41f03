#include "fta/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "fta/bitstream.hpp"

namespace fta {
namespace {

constexpr uint32_t kPackageMagic = 0x50415446;  // "FTAP"
constexpr uint64_t kMaxValueStep = 1040;        // largest grid step that fits int16

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

// --- Lloyd-Max -------------------------------------------------------------

int assign_code(int16_t v, const std::array<int16_t, kCodebookSize>& levels) {
  int best = 0;
  int64_t best_d = std::abs(static_cast<int64_t>(v) - levels[0]);
  for (int j = 1; j < kCodebookSize; ++j) {
    const int64_t d = std::abs(static_cast<int64_t>(v) - levels[j]);
    if (d < best_d) {  // ties keep the lower level
      best_d = d;
      best = j;
    }
  }
  return best;
}

uint64_t codebook_sse(const std::vector<int16_t>& values,
                      const std::array<int16_t, kCodebookSize>& levels) {
  uint64_t sse = 0;
  for (int16_t v : values) {
    const int64_t d = static_cast<int64_t>(v) - levels[assign_code(v, levels)];
    sse += static_cast<uint64_t>(d * d);
  }
  return sse;
}

std::array<int16_t, kCodebookSize> snap_levels(const std::array<double, kCodebookSize>& cb) {
  std::array<int16_t, kCodebookSize> out{};
  for (int j = 0; j < kCodebookSize; ++j) {
    out[j] = sat16(static_cast<int64_t>(std::llround(cb[j])));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Runs Lloyd iterations from one start and returns the best snapped codebook
// seen at any iteration (integer SSE, exact comparisons).
void run_lloyd(const std::vector<int16_t>& values, std::array<double, kCodebookSize> cb,
               std::array<int16_t, kCodebookSize>* best, uint64_t* best_sse) {
  for (int iter = 0; iter < 100; ++iter) {
    const std::array<int16_t, kCodebookSize> snapped = snap_levels(cb);
    const uint64_t sse = codebook_sse(values, snapped);
    if (sse < *best_sse) {
      *best_sse = sse;
      *best = snapped;
    }
    std::array<double, kCodebookSize> sums{};
    std::array<int64_t, kCodebookSize> counts{};
    for (int16_t v : values) {
      const int j = assign_code(v, snapped);
      sums[j] += v;
      counts[j] += 1;
    }
    std::array<double, kCodebookSize> next = cb;
    for (int j = 0; j < kCodebookSize; ++j) {
      if (counts[j] > 0) next[j] = sums[j] / static_cast<double>(counts[j]);
    }
    std::sort(next.begin(), next.end());
    if (next == cb) break;
    cb = next;
  }
}

// Exactly 16 strictly increasing int16 levels; duplicates removed and the
// book padded outward.
NonUniformCodebook repair_codebook(std::array<int16_t, kCodebookSize> levels) {
  std::vector<int16_t> distinct(levels.begin(), levels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  while (distinct.size() < kCodebookSize) {
    if (distinct.back() < 32767) {
      distinct.push_back(static_cast<int16_t>(distinct.back() + 1));
    } else {
      distinct.insert(distinct.begin(), static_cast<int16_t>(distinct.front() - 1));
    }
  }
  NonUniformCodebook cb;
  std::copy(distinct.begin(), distinct.end(), cb.levels.begin());
  cb.validate();
  return cb;
}

// --- value quantization grid -------------------------------------------------

struct ValueGrid {
  int16_t m = 0;
  int16_t M = 0;
  int64_t step = 0;  // (M - m) / 63, 0 iff m == M
};

// Pick grid endpoints covering [vmin, vmax] with 63 | (M - m), so the decode
// formula lands exactly on the grid and the per-element error stays within
// (M - m) / 126.
ValueGrid choose_grid(int16_t vmin, int16_t vmax) {
  ValueGrid g;
  if (vmin == vmax) {
    g.m = g.M = vmin;
    return g;
  }
  const int64_t span = static_cast<int64_t>(vmax) - vmin;
  int64_t step = std::min<int64_t>(kMaxValueStep, ceil_div(span, 63));
  int64_t m = std::min<int64_t>(vmin, 32767 - 63 * step);
  m = std::max<int64_t>(m, -32768);
  g.m = static_cast<int16_t>(m);
  g.M = static_cast<int16_t>(m + 63 * step);
  g.step = step;
  return g;
}

uint8_t encode_value(int16_t v, const ValueGrid& g) {
  if (g.step == 0) return 0;
  const int64_t num = static_cast<int64_t>(v) - g.m;  // >= 0 except capped corner
  if (num <= 0) return 0;
  const int64_t c = div_round(num, g.step);
  return static_cast<uint8_t>(std::min<int64_t>(c, kMaxValueCode));
}

}  // namespace

void NonUniformCodebook::validate() const {
  for (int j = 1; j < kCodebookSize; ++j) {
    require(levels[j] > levels[j - 1], "codebook levels must be strictly increasing");
  }
}

WsQuantized quantize_ws(const IntMatrix& ws) {
  ws.validate();
  const std::vector<int16_t>& values = ws.data;
  std::vector<int16_t> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const int64_t n = static_cast<int64_t>(sorted.size());

  std::array<double, kCodebookSize> quantile_init{};
  std::array<double, kCodebookSize> uniform_init{};
  const double lo = sorted.front(), hi = sorted.back();
  for (int j = 0; j < kCodebookSize; ++j) {
    const int64_t pos = std::min<int64_t>(n - 1, (2 * j + 1) * n / (2 * kCodebookSize));
    quantile_init[j] = sorted[static_cast<size_t>(pos)];
    uniform_init[j] = lo + (hi - lo) * j / (kCodebookSize - 1);
  }

  std::array<int16_t, kCodebookSize> best{};
  uint64_t best_sse = UINT64_MAX;
  run_lloyd(values, quantile_init, &best, &best_sse);
  run_lloyd(values, uniform_init, &best, &best_sse);

  WsQuantized out;
  out.codebook = repair_codebook(best);
  out.codes.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out.codes[i] = static_cast<uint8_t>(assign_code(values[i], out.codebook.levels));
  }
  return out;
}

IntMatrix dequantize_ws(const std::vector<uint8_t>& codes, int rows, int cols,
                        const NonUniformCodebook& codebook) {
  codebook.validate();
  require(codes.size() == static_cast<size_t>(rows) * cols,
          "dequantize: code count != rows*cols");
  IntMatrix out(rows, cols, 16);
  for (size_t i = 0; i < codes.size(); ++i) {
    require(codes[i] < kCodebookSize, "dequantize: code out of range");
    out.data[i] = codebook.levels[codes[i]];
  }
  return out;
}

Permutation identity_permutation(int rows) {
  Permutation p(static_cast<size_t>(rows));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

uint64_t total_delta_sum(const std::vector<const SparseMatrixFixedNZ*>& wd_list,
                         const Permutation& perm) {
  std::vector<int> pos_of(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) pos_of[perm[i]] = static_cast<int>(i);
  uint64_t sum = 0;
  for (const SparseMatrixFixedNZ* wd : wd_list) {
    for (int c = 0; c < wd->cols; ++c) {
      int last = 0;
      for (int j = 0; j < wd->nz_per_col; ++j) {
        last = std::max(last, pos_of[wd->rec(c, j).row]);
      }
      sum += static_cast<uint64_t>(last);  // deltas telescope to the last position
    }
  }
  return sum;
}

Permutation find_permutation(const std::vector<const SparseMatrixFixedNZ*>& wd_list,
                             int rows) {
  require(rows >= 1 && rows <= kMaxSparseRows, "permutation: bad row count");
  int total_cols = 0;
  for (const SparseMatrixFixedNZ* wd : wd_list) {
    require(wd->rows == rows, "permutation: inputs must share the row count");
    total_cols += wd->cols;
  }
  std::vector<std::vector<int>> row_cols(static_cast<size_t>(rows));
  {
    int base = 0;
    for (const SparseMatrixFixedNZ* wd : wd_list) {
      for (int c = 0; c < wd->cols; ++c) {
        for (int j = 0; j < wd->nz_per_col; ++j) {
          row_cols[wd->rec(c, j).row].push_back(base + c);
        }
      }
      base += wd->cols;
    }
  }
  std::vector<int> occupied;
  for (int r = 0; r < rows; ++r) {
    if (!row_cols[r].empty()) occupied.push_back(r);
  }
  if (occupied.empty()) return identity_permutation(rows);

  int start = occupied[0];
  for (int r : occupied) {
    if (row_cols[r].size() > row_cols[start].size()) start = r;
  }
  Permutation perm;
  std::vector<char> placed(static_cast<size_t>(rows), 0);
  std::vector<int64_t> last_pos(static_cast<size_t>(total_cols), 0);
  perm.push_back(static_cast<uint16_t>(start));
  placed[start] = 1;
  while (perm.size() < occupied.size()) {
    const int64_t t = static_cast<int64_t>(perm.size());
    int best = -1;
    int64_t best_cost = 0;
    for (int r : occupied) {
      if (placed[r]) continue;
      int64_t cost = 0;
      for (int c : row_cols[r]) cost += t - last_pos[c];
      if (best < 0 || cost < best_cost) {
        best = r;
        best_cost = cost;
      }
    }
    perm.push_back(static_cast<uint16_t>(best));
    placed[best] = 1;
    for (int c : row_cols[best]) last_pos[c] = static_cast<int64_t>(perm.size()) - 1;
  }
  for (int r = 0; r < rows; ++r) {
    if (!placed[r]) perm.push_back(static_cast<uint16_t>(r));
  }
  const Permutation ident = identity_permutation(rows);
  if (total_delta_sum(wd_list, perm) > total_delta_sum(wd_list, ident)) {
    return ident;
  }
  return perm;
}

uint64_t EncodedSection::payload_bytes() const {
  return 4 + ceil_div(static_cast<uint64_t>(cols) * k * kRecordBits, 8);
}

EncodedSection encode_wd(const SparseMatrixFixedNZ& wd, const Permutation& perm) {
  wd.validate();
  require(perm.size() == static_cast<size_t>(wd.rows),
          "encode: permutation size != rows");
  std::vector<int> pos_of(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) pos_of[perm[i]] = static_cast<int>(i);

  struct Rec {
    int pos;
    int16_t value;
  };
  std::vector<std::vector<Rec>> columns(static_cast<size_t>(wd.cols));
  int fillers = 0;
  for (int c = 0; c < wd.cols; ++c) {
    std::vector<Rec> recs;
    recs.reserve(static_cast<size_t>(wd.nz_per_col));
    for (int j = 0; j < wd.nz_per_col; ++j) {
      recs.push_back({pos_of[wd.rec(c, j).row], wd.rec(c, j).value});
    }
    std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
      return a.pos < b.pos;
    });
    // split gaps wider than 31 with zero-valued fillers (greedy max step);
    // the first delta is the absolute first position.
    std::vector<Rec>& out = columns[static_cast<size_t>(c)];
    for (const Rec& r : recs) {
      while (r.pos - (out.empty() ? 0 : out.back().pos) > kMaxDelta) {
        out.push_back({(out.empty() ? 0 : out.back().pos) + kMaxDelta, 0});
        ++fillers;
      }
      out.push_back(r);
    }
  }
  size_t new_k = 0;
  for (const auto& col : columns) new_k = std::max(new_k, col.size());
  require(new_k <= static_cast<size_t>(wd.rows),
          "encode: column needs more fillers than rows available");
  // raise k uniformly: pad short columns with fillers at the lowest free
  // positions (adding records never widens a gap)
  for (auto& col : columns) {
    if (col.size() == new_k) continue;
    std::vector<char> occ(static_cast<size_t>(wd.rows), 0);
    for (const Rec& r : col) occ[static_cast<size_t>(r.pos)] = 1;
    for (int p = 0; p < wd.rows && col.size() < new_k; ++p) {
      if (!occ[p]) {
        col.push_back({p, 0});
        ++fillers;
      }
    }
    std::sort(col.begin(), col.end(), [](const Rec& a, const Rec& b) {
      return a.pos < b.pos;
    });
  }

  int16_t vmin = 0, vmax = 0;
  bool first = true;
  for (const auto& col : columns) {
    for (const Rec& r : col) {
      if (first) {
        vmin = vmax = r.value;
        first = false;
      } else {
        vmin = std::min(vmin, r.value);
        vmax = std::max(vmax, r.value);
      }
    }
  }
  const ValueGrid grid = choose_grid(vmin, vmax);

  EncodedSection sec;
  sec.cols = static_cast<uint16_t>(wd.cols);
  sec.k = static_cast<uint16_t>(new_k);
  sec.m = grid.m;
  sec.M = grid.M;
  sec.fillers_added = fillers;
  sec.deltas.reserve(columns.size() * new_k);
  sec.value_codes.reserve(columns.size() * new_k);
  for (const auto& col : columns) {
    int prev = 0;
    for (size_t j = 0; j < col.size(); ++j) {
      const int delta = j == 0 ? col[j].pos : col[j].pos - prev;
      check_invariant(delta >= 0 && delta <= kMaxDelta, "encode: delta out of range");
      check_invariant(j == 0 || delta >= 1, "encode: duplicate position");
      sec.deltas.push_back(static_cast<uint8_t>(delta));
      sec.value_codes.push_back(encode_value(col[j].value, grid));
      prev = col[j].pos;
    }
  }
  return sec;
}

int16_t decode_value(uint8_t code, int16_t m, int16_t M) {
  require(code <= kMaxValueCode, "decode: value code out of range");
  if (m == M) return m;
  const int64_t span = static_cast<int64_t>(M) - m;
  return sat16(m + div_round(static_cast<int64_t>(code) * span, 63));
}

SparseMatrixFixedNZ decode_wd(const EncodedSection& sec, int rows, const Permutation& perm) {
  require(perm.size() == static_cast<size_t>(rows), "decode: permutation size != rows");
  require(sec.cols >= 1 && sec.k >= 1, "decode: empty section");
  require(sec.deltas.size() == static_cast<size_t>(sec.cols) * sec.k &&
              sec.value_codes.size() == sec.deltas.size(),
          "decode: record count mismatch");
  SparseMatrixFixedNZ out(rows, sec.cols, sec.k);
  for (int c = 0; c < sec.cols; ++c) {
    int pos = 0;
    std::vector<SparseRecord> recs(static_cast<size_t>(sec.k));
    for (int j = 0; j < sec.k; ++j) {
      const uint8_t d = sec.deltas[static_cast<size_t>(c) * sec.k + j];
      require(d <= kMaxDelta, "corrupt stream: delta out of range");
      if (j == 0) {
        pos = d;
      } else {
        require(d >= 1, "corrupt stream: zero delta after the first record");
        pos += d;
      }
      require(pos < rows, "corrupt stream: index past matrix end");
      recs[static_cast<size_t>(j)] = {
          perm[static_cast<size_t>(pos)],
          decode_value(sec.value_codes[static_cast<size_t>(c) * sec.k + j], sec.m, sec.M)};
    }
    std::sort(recs.begin(), recs.end(), [](const SparseRecord& a, const SparseRecord& b) {
      return a.row < b.row;
    });
    for (int j = 0; j < sec.k; ++j) out.rec(c, j) = recs[static_cast<size_t>(j)];
  }
  out.validate();
  return out;
}

// --- package -----------------------------------------------------------------

namespace {

uint64_t group_bytes(const PackageGroup& g) {
  return 40 + g.perm.size() +
         ceil_div(static_cast<uint64_t>(g.in_width) * g.hidden_width, 2);
}

}  // namespace

uint64_t CompressedPackage::wd_payload_bytes() const {
  uint64_t bytes = 0;
  for (const PackageSection& s : sections) bytes += s.enc.payload_bytes();
  return bytes;
}

uint64_t CompressedPackage::ws_preload_bytes() const {
  uint64_t bytes = 16;  // file header
  for (const PackageGroup& g : groups) bytes += group_bytes(g);
  bytes += sections.size() * 8;  // section table
  return bytes;
}

uint64_t CompressedPackage::total_bytes() const {
  return ws_preload_bytes() + wd_payload_bytes();
}

uint64_t CompressedPackage::wd_layer_bytes(int layer) const {
  uint64_t bytes = 0;
  for (const PackageSection& s : sections) {
    if (s.layer == layer) bytes += s.enc.payload_bytes();
  }
  return bytes;
}

int CompressedPackage::layer_count() const {
  int n = 0;
  for (const PackageSection& s : sections) n = std::max(n, static_cast<int>(s.layer) + 1);
  return n;
}

uint64_t CompressedPackage::formula_bits() const {
  // 16B file header + per group (40B entry incl. 16x16b codebook, h perm
  // bytes, ceil(4*|Ws|/8) code bytes) + 8B table entry and
  // 32 + cols*k*11 payload bits (byte padded) per section.
  uint64_t bits = 16 * 8;
  for (const PackageGroup& g : groups) {
    bits += 40 * 8 + static_cast<uint64_t>(g.hidden_width) * 8 +
            ceil_div(static_cast<uint64_t>(g.in_width) * g.hidden_width * 4, 8) * 8;
  }
  for (const PackageSection& s : sections) {
    bits += 8 * 8;
    bits += 32 + ceil_div(static_cast<uint64_t>(s.enc.cols) * s.enc.k * kRecordBits, 8) * 8;
  }
  return bits;
}

void CompressedPackage::validate() const {
  require(version == 1, "package: unsupported version");
  require(!groups.empty(), "package: no groups");
  require(groups.size() <= 255, "package: too many groups");
  require(sections.size() <= 65535, "package: too many sections");
  for (const PackageGroup& g : groups) {
    require(g.in_width >= 1 && g.hidden_width >= 1, "package: bad group dims");
    require(g.hidden_width <= kMaxSparseRows, "package: hidden width > 256");
    g.codebook.validate();
    require(g.perm.size() == g.hidden_width, "package: bad permutation length");
    std::vector<char> seen(g.hidden_width, 0);
    for (uint16_t p : g.perm) {
      require(p < g.hidden_width && !seen[p], "package: invalid permutation");
      seen[p] = 1;
    }
    require(g.ws_codes.size() == static_cast<size_t>(g.in_width) * g.hidden_width,
            "package: bad ws code count");
    for (uint8_t c : g.ws_codes) require(c < kCodebookSize, "package: ws code out of range");
  }
  for (const PackageSection& s : sections) {
    require(s.group_id < groups.size(), "package: section references unknown group");
    const PackageGroup& g = groups[s.group_id];
    require(s.enc.cols >= 1 && s.enc.k >= 1, "package: empty section");
    require(s.enc.k <= g.hidden_width, "package: section k > hidden width");
    require(s.enc.deltas.size() == static_cast<size_t>(s.enc.cols) * s.enc.k,
            "package: section record count mismatch");
    require(s.enc.value_codes.size() == s.enc.deltas.size(),
            "package: section record count mismatch");
    require(s.enc.m <= s.enc.M, "package: m > M");
    require(s.enc.m == s.enc.M || (static_cast<int>(s.enc.M) - s.enc.m) % 63 == 0,
            "package: (M - m) not on the 63-step grid");
    for (uint8_t d : s.enc.deltas) require(d <= kMaxDelta, "package: delta out of range");
    for (uint8_t v : s.enc.value_codes) {
      require(v <= kMaxValueCode, "package: value code out of range");
    }
  }
}

std::vector<uint8_t> serialize_package(const CompressedPackage& pkg) {
  pkg.validate();
  std::vector<uint8_t> out;
  auto put_u8 = [&](uint8_t v) { out.push_back(v); };
  auto put_u16 = [&](uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
  };
  auto put_i16 = [&](int16_t v) { put_u16(static_cast<uint16_t>(v)); };
  auto put_u32 = [&](uint32_t v) {
    put_u16(static_cast<uint16_t>(v & 0xffff));
    put_u16(static_cast<uint16_t>(v >> 16));
  };

  put_u32(kPackageMagic);
  put_u8(pkg.version);
  put_u8(static_cast<uint8_t>(pkg.groups.size()));
  put_u16(static_cast<uint16_t>(pkg.sections.size()));
  put_u32(static_cast<uint32_t>(pkg.total_bytes()));
  put_u32(0);  // reserved

  for (const PackageGroup& g : pkg.groups) {
    put_u16(g.in_width);
    put_u16(g.hidden_width);
    put_u16(g.base_k);
    put_u16(0);
    for (int16_t level : g.codebook.levels) put_i16(level);
  }
  for (const PackageGroup& g : pkg.groups) {
    for (uint16_t p : g.perm) put_u8(static_cast<uint8_t>(p));
  }
  for (const PackageGroup& g : pkg.groups) {
    for (size_t i = 0; i < g.ws_codes.size(); i += 2) {
      uint8_t byte = g.ws_codes[i] & 0x0f;
      if (i + 1 < g.ws_codes.size()) byte |= static_cast<uint8_t>(g.ws_codes[i + 1] << 4);
      put_u8(byte);
    }
  }
  for (const PackageSection& s : pkg.sections) {
    put_u8(s.group_id);
    put_u8(s.layer);
    put_u8(s.sub_op);
    put_u8(0);
    put_u16(s.enc.cols);
    put_u16(s.enc.k);
  }
  for (const PackageSection& s : pkg.sections) {
    put_i16(s.enc.m);
    put_i16(s.enc.M);
    BitWriter bw;
    for (size_t i = 0; i < s.enc.deltas.size(); ++i) {
      bw.put(s.enc.deltas[i], kDeltaBits);
      bw.put(s.enc.value_codes[i], kValueBits);
    }
    const std::vector<uint8_t>& packed = bw.bytes();
    out.insert(out.end(), packed.begin(), packed.end());
  }

  check_invariant(out.size() * 8 == pkg.formula_bits(),
                  "package: serialized size != closed-form size");
  check_invariant(out.size() == pkg.total_bytes(),
                  "package: serialized size != total_bytes()");
  return out;
}

CompressedPackage deserialize_package(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  auto get_u8 = [&]() -> uint8_t {
    require(pos < bytes.size(), "package: truncated");
    return bytes[pos++];
  };
  auto get_u16 = [&]() -> uint16_t {
    const uint16_t lo = get_u8();
    return static_cast<uint16_t>(lo | (get_u8() << 8));
  };
  auto get_i16 = [&]() -> int16_t { return static_cast<int16_t>(get_u16()); };
  auto get_u32 = [&]() -> uint32_t {
    const uint32_t lo = get_u16();
    return lo | (static_cast<uint32_t>(get_u16()) << 16);
  };

  require(get_u32() == kPackageMagic, "package: bad magic");
  CompressedPackage pkg;
  pkg.version = get_u8();
  require(pkg.version == 1, "package: unsupported version");
  const int group_count = get_u8();
  const int section_count = get_u16();
  const uint32_t declared_total = get_u32();
  get_u32();  // reserved
  require(declared_total == bytes.size(), "package: size field mismatch");

  pkg.groups.resize(static_cast<size_t>(group_count));
  for (PackageGroup& g : pkg.groups) {
    g.in_width = get_u16();
    g.hidden_width = get_u16();
    g.base_k = get_u16();
    get_u16();
    for (int16_t& level : g.codebook.levels) level = get_i16();
  }
  for (PackageGroup& g : pkg.groups) {
    g.perm.resize(g.hidden_width);
    for (uint16_t& p : g.perm) p = get_u8();
  }
  for (PackageGroup& g : pkg.groups) {
    const size_t n = static_cast<size_t>(g.in_width) * g.hidden_width;
    g.ws_codes.resize(n);
    for (size_t i = 0; i < n; i += 2) {
      const uint8_t byte = get_u8();
      g.ws_codes[i] = byte & 0x0f;
      if (i + 1 < n) g.ws_codes[i + 1] = byte >> 4;
    }
  }
  pkg.sections.resize(static_cast<size_t>(section_count));
  for (PackageSection& s : pkg.sections) {
    s.group_id = get_u8();
    s.layer = get_u8();
    s.sub_op = get_u8();
    get_u8();
    s.enc.cols = get_u16();
    s.enc.k = get_u16();
  }
  for (PackageSection& s : pkg.sections) {
    s.enc.m = get_i16();
    s.enc.M = get_i16();
    const size_t records = static_cast<size_t>(s.enc.cols) * s.enc.k;
    const size_t packed = ceil_div(records * kRecordBits, 8);
    require(pos + packed <= bytes.size(), "package: truncated section payload");
    BitReader br(bytes.data() + pos, packed);
    s.enc.deltas.resize(records);
    s.enc.value_codes.resize(records);
    for (size_t i = 0; i < records; ++i) {
      s.enc.deltas[i] = static_cast<uint8_t>(br.get(kDeltaBits));
      s.enc.value_codes[i] = static_cast<uint8_t>(br.get(kValueBits));
    }
    pos += packed;
  }
  require(pos == bytes.size(), "package: trailing bytes");
  pkg.validate();
  return pkg;
}

void save_package(const std::filesystem::path& path, const CompressedPackage& pkg) {
  const std::vector<uint8_t> bytes = serialize_package(pkg);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write package: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), "short write: " + path.string());
}

CompressedPackage load_package(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open package: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return deserialize_package(bytes);
}

CompressedPackage build_package(const ModelSpec& model,
                                const std::map<std::string, IntMatrix>& ws_by_group,
                                const std::vector<SparseMatrixFixedNZ>& wd_by_section) {
  model.validate();
  const std::vector<SectionRef> refs = model.sections();
  require(wd_by_section.size() == refs.size(),
          "build_package: section count mismatch");

  CompressedPackage pkg;
  const std::vector<std::string> names = model.group_names();
  for (const std::string& name : names) {
    const DictGroup& dg = model.dict_groups.at(name);
    auto it = ws_by_group.find(name);
    require(it != ws_by_group.end(), "build_package: missing dictionary for " + name);
    const IntMatrix& ws = it->second;
    require(ws.rows == dg.in_width && ws.cols == dg.hidden_width,
            "build_package: dictionary dims mismatch for " + name);

    std::vector<const SparseMatrixFixedNZ*> group_wd;
    for (size_t i = 0; i < refs.size(); ++i) {
      if (refs[i].group != name) continue;
      const SparseMatrixFixedNZ& wd = wd_by_section[i];
      require(wd.rows == dg.hidden_width && wd.cols == refs[i].out_width,
              "build_package: sparse factor dims mismatch");
      group_wd.push_back(&wd);
    }
    PackageGroup g;
    g.in_width = static_cast<uint16_t>(dg.in_width);
    g.hidden_width = static_cast<uint16_t>(dg.hidden_width);
    g.base_k = static_cast<uint16_t>(dg.nz_per_col);
    g.perm = group_wd.empty() ? identity_permutation(dg.hidden_width)
                              : find_permutation(group_wd, dg.hidden_width);
    IntMatrix permuted(ws.rows, ws.cols, 16);
    for (int c = 0; c < ws.cols; ++c) {
      for (int r = 0; r < ws.rows; ++r) permuted.at(r, c) = ws.at(r, g.perm[c]);
    }
    const WsQuantized q = quantize_ws(permuted);
    g.codebook = q.codebook;
    g.ws_codes = q.codes;
    pkg.groups.push_back(std::move(g));
  }
  for (size_t i = 0; i < refs.size(); ++i) {
    const int gid = model.group_id(refs[i].group);
    PackageSection s;
    s.group_id = static_cast<uint8_t>(gid);
    s.layer = static_cast<uint8_t>(refs[i].layer);
    s.sub_op = static_cast<uint8_t>(refs[i].sub_op);
    s.enc = encode_wd(wd_by_section[i], pkg.groups[static_cast<size_t>(gid)].perm);
    pkg.sections.push_back(std::move(s));
  }
  pkg.validate();
  return pkg;
}

DecodedWeights decode_package(const ModelSpec& model, const CompressedPackage& pkg) {
  validate_package_against_model(pkg, model);
  DecodedWeights out;
  const std::vector<std::string> names = model.group_names();
  for (size_t gi = 0; gi < names.size(); ++gi) {
    const PackageGroup& g = pkg.groups[gi];
    const IntMatrix permuted = dequantize_ws(g.ws_codes, g.in_width, g.hidden_width,
                                             g.codebook);
    IntMatrix ws(g.in_width, g.hidden_width, 16);
    for (int c = 0; c < ws.cols; ++c) {
      for (int r = 0; r < ws.rows; ++r) ws.at(r, g.perm[c]) = permuted.at(r, c);
    }
    out.ws[names[gi]] = std::move(ws);
  }
  for (const PackageSection& s : pkg.sections) {
    const PackageGroup& g = pkg.groups[s.group_id];
    out.wd.push_back(decode_wd(s.enc, g.hidden_width, g.perm));
  }
  return out;
}

void validate_package_against_model(const CompressedPackage& pkg, const ModelSpec& model) {
  pkg.validate();
  model.validate();
  require(pkg.groups.size() == model.dict_groups.size(),
          "package/model: group count mismatch");
  const std::vector<std::string> names = model.group_names();
  for (size_t gi = 0; gi < names.size(); ++gi) {
    const DictGroup& dg = model.dict_groups.at(names[gi]);
    require(pkg.groups[gi].in_width == dg.in_width &&
                pkg.groups[gi].hidden_width == dg.hidden_width,
            "package/model: group dims mismatch for " + names[gi]);
    require(pkg.groups[gi].base_k == dg.nz_per_col,
            "package/model: group k mismatch for " + names[gi]);
  }
  const std::vector<SectionRef> refs = model.sections();
  require(pkg.sections.size() == refs.size(), "package/model: section count mismatch");
  for (size_t i = 0; i < refs.size(); ++i) {
    const PackageSection& s = pkg.sections[i];
    require(s.group_id == model.group_id(refs[i].group), "package/model: section group");
    require(s.layer == refs[i].layer && s.sub_op == refs[i].sub_op,
            "package/model: section position mismatch");
    require(s.enc.cols == refs[i].out_width, "package/model: section width mismatch");
    require(s.enc.k >= pkg.groups[s.group_id].base_k,
            "package/model: section k below group k");
  }
}

uint64_t ema_bytes(const CompressedPackage& pkg, const ModelSpec& model,
                   uint64_t n_inferences, int batch,
                   uint64_t activation_bytes_per_inference) {
  validate_package_against_model(pkg, model);
  require(batch == 1 || batch == 2 || batch == 4, "ema: batch must be 1, 2 or 4");
  return pkg.ws_preload_bytes() +
         pkg.wd_payload_bytes() * ceil_div(n_inferences, static_cast<uint64_t>(batch)) +
         activation_bytes_per_inference * n_inferences;
}

std::string format_package_stat(const CompressedPackage& pkg) {
  std::ostringstream os;
  os << "package: " << pkg.groups.size() << " groups, " << pkg.sections.size()
     << " sections, " << pkg.total_bytes() << " bytes total\n";
  os << "  preload (dictionaries, codebooks, permutations, tables): "
     << pkg.ws_preload_bytes() << " B\n";
  os << "  per-load sparse payload: " << pkg.wd_payload_bytes() << " B\n";
  uint64_t dense_bytes = 0;
  for (size_t gi = 0; gi < pkg.groups.size(); ++gi) {
    const PackageGroup& g = pkg.groups[gi];
    os << "  group " << gi << ": " << g.in_width << "x" << g.hidden_width
       << " dict, k=" << g.base_k << ", codes "
       << (static_cast<uint64_t>(g.in_width) * g.hidden_width + 1) / 2 << " B, levels ["
       << g.codebook.levels.front() << ".." << g.codebook.levels.back() << "]\n";
  }
  for (const PackageSection& s : pkg.sections) {
    const PackageGroup& g = pkg.groups[s.group_id];
    const uint64_t dense = static_cast<uint64_t>(g.in_width) * s.enc.cols * 2;
    dense_bytes += dense;
    os << "  section L" << static_cast<int>(s.layer) << "." << static_cast<int>(s.sub_op)
       << " g" << static_cast<int>(s.group_id) << ": " << s.enc.cols << " cols, k="
       << s.enc.k << ", m=" << s.enc.m << ", M=" << s.enc.M << ", "
       << s.enc.payload_bytes() << " B (dense 16b equivalent " << dense << " B)\n";
  }
  os << "  dense 16b weight image: " << dense_bytes << " B; one-shot ratio "
     << (pkg.total_bytes() ? static_cast<double>(dense_bytes) / pkg.total_bytes() : 0.0)
     << "x; per-reload ratio "
     << (pkg.wd_payload_bytes()
             ? static_cast<double>(dense_bytes) / pkg.wd_payload_bytes()
             : 0.0)
     << "x\n";
  return os.str();
}

}  // namespace fta
