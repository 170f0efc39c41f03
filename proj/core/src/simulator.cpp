#include "fta/simulator.hpp"

#include <algorithm>

namespace fta {
namespace {

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

// Rows of a tile that fall inside the true (unpadded) token range.
int useful_rows(int tile_row, int true_length) {
  const int lo = tile_row * kTile;
  const int hi = std::min(lo + kTile, true_length);
  return std::max(0, hi - lo);
}

}  // namespace

int cycles_per_mac(int bitwidth) {
  switch (bitwidth) {
    case 4: return 1;
    case 8: return 4;
    case 16: return 16;
    default: break;
  }
  throw DataError("cycles_per_mac: bitwidth must be 4, 8 or 16");
}

uint64_t CycleStats::useful_mac_cycles() const {
  uint64_t v = 0;
  for (const UnitStats& u : dmm) v += u.useful_mac_cycles;
  for (const UnitStats& u : smm) v += u.useful_mac_cycles;
  return v;
}

uint64_t CycleStats::busy_cycles() const {
  uint64_t v = 0;
  for (const UnitStats& u : dmm) v += u.busy;
  for (const UnitStats& u : smm) v += u.busy;
  for (const UnitStats& u : afu) v += u.busy;
  return v;
}

uint64_t CycleStats::stall_cycles() const {
  uint64_t v = 0;
  for (const UnitStats& u : dmm) v += u.stall;
  for (const UnitStats& u : smm) v += u.stall;
  for (const UnitStats& u : afu) v += u.stall;
  return v;
}

double CycleStats::utilization() const {
  if (total_cycles == 0) return 0.0;
  return static_cast<double>(useful_mac_cycles()) /
         (static_cast<double>(total_cycles) * static_cast<double>(kMacCapacity));
}

double CycleStats::unit_utilization(const UnitStats& u, int macs_per_unit) const {
  if (total_cycles == 0) return 0.0;
  return static_cast<double>(u.useful_mac_cycles) /
         (static_cast<double>(total_cycles) * macs_per_unit);
}

void CycleStats::merge(const CycleStats& other) {
  for (int i = 0; i < kDmmCores; ++i) {
    dmm[i].busy += other.dmm[i].busy;
    dmm[i].stall += other.dmm[i].stall;
    dmm[i].useful_mac_cycles += other.dmm[i].useful_mac_cycles;
  }
  for (int i = 0; i < kSmmCores; ++i) {
    smm[i].busy += other.smm[i].busy;
    smm[i].stall += other.smm[i].stall;
    smm[i].useful_mac_cycles += other.smm[i].useful_mac_cycles;
  }
  for (int i = 0; i < kAfus; ++i) {
    afu[i].busy += other.afu[i].busy;
    afu[i].stall += other.afu[i].stall;
  }
  total_cycles += other.total_cycles;
  mac_ops += other.mac_ops;
  ema_bytes += other.ema_bytes;
}

void Trf::write_vector(AccessDir dir, int index, std::span<const int16_t> v) {
  require(index >= 0 && index < kTile, "trf: vector index out of range");
  require(v.size() == kTile, "trf: vector must be 16 wide");
  for (int i = 0; i < kTile; ++i) {
    if (dir == AccessDir::Row) {
      reg_[index][i] = v[i];
    } else {
      reg_[i][index] = v[i];
    }
  }
  ++access_cycles_;
}

std::array<int16_t, kTile> Trf::read_vector(AccessDir dir, int index) {
  require(index >= 0 && index < kTile, "trf: vector index out of range");
  std::array<int16_t, kTile> out{};
  for (int i = 0; i < kTile; ++i) {
    out[i] = dir == AccessDir::Row ? reg_[index][i] : reg_[i][index];
  }
  ++access_cycles_;
  return out;
}

IntMatrix trf_roundtrip(const IntMatrix& tile, AccessDir write_dir, AccessDir read_dir,
                        uint64_t* access_cycles) {
  require(tile.rows == kTile && tile.cols == kTile, "trf: tile must be 16x16");
  Trf trf;
  for (int i = 0; i < kTile; ++i) {
    std::array<int16_t, kTile> v{};
    for (int j = 0; j < kTile; ++j) v[j] = tile.at(i, j);
    trf.write_vector(write_dir, i, v);
  }
  IntMatrix out(kTile, kTile, tile.bitwidth);
  for (int i = 0; i < kTile; ++i) {
    const std::array<int16_t, kTile> v = trf.read_vector(read_dir, i);
    for (int j = 0; j < kTile; ++j) out.at(i, j) = v[j];
  }
  if (access_cycles != nullptr) *access_cycles = trf.access_cycles();
  return out;
}

DmmTileResult dmm_tile(const IntMatrix& x_tile, const std::vector<uint8_t>& ws_codes_tile,
                       const NonUniformCodebook& codebook, int bitwidth, int frac_bits) {
  require(x_tile.rows == kTile && x_tile.cols == kTile, "dmm_tile: X must be 16x16");
  require(ws_codes_tile.size() == kTile * kTile, "dmm_tile: codes must be 16x16");
  codebook.validate();
  const int cpm = cycles_per_mac(bitwidth);
  std::array<std::array<int64_t, kTile>, kTile> acc{};
  // 16 K-steps of a 16x16 outer product
  for (int k = 0; k < kTile; ++k) {
    for (int i = 0; i < kTile; ++i) {
      const int64_t x = x_tile.at(i, k);
      for (int j = 0; j < kTile; ++j) {
        const int16_t w = codebook.levels[ws_codes_tile[static_cast<size_t>(k) * kTile + j]];
        acc[i][j] += x * w;
      }
    }
  }
  DmmTileResult out;
  out.y = IntMatrix(kTile, kTile, 16);
  for (int i = 0; i < kTile; ++i) {
    for (int j = 0; j < kTile; ++j) out.y.at(i, j) = requantize(acc[i][j], frac_bits);
  }
  out.busy_cycles = static_cast<uint64_t>(kTile) * cpm;
  return out;
}

SmmRunResult smm_run(const IntMatrix& y, const EncodedSection& sec, int bitwidth,
                     int frac_bits) {
  require(sec.deltas.size() == static_cast<size_t>(sec.cols) * sec.k,
          "smm_run: record count mismatch");
  const int cpm = cycles_per_mac(bitwidth);
  const uint64_t passes = ceil_div(static_cast<uint64_t>(y.rows), kSmmMacsPerCore);
  SmmRunResult out;
  out.z = IntMatrix(y.rows, sec.cols, 16);
  out.busy_cycles = 0;
  std::vector<int64_t> acc(static_cast<size_t>(y.rows));
  for (int c = 0; c < sec.cols; ++c) {
    std::fill(acc.begin(), acc.end(), 0);
    int pos = 0;
    for (int j = 0; j < sec.k; ++j) {
      const uint8_t d = sec.deltas[static_cast<size_t>(c) * sec.k + j];
      if (j == 0) {
        pos = d;
      } else {
        require(d >= 1, "smm_run: corrupt stream (zero delta)");
        pos += d;
      }
      require(pos < y.cols, "smm_run: corrupt stream (row pointer past end)");
      const int16_t w =
          decode_value(sec.value_codes[static_cast<size_t>(c) * sec.k + j], sec.m, sec.M);
      for (int r = 0; r < y.rows; ++r) acc[static_cast<size_t>(r)] += static_cast<int64_t>(w) * y.at(r, pos);
      out.busy_cycles += passes * cpm;
    }
    for (int r = 0; r < y.rows; ++r) {
      out.z.at(r, c) = requantize(acc[static_cast<size_t>(r)], frac_bits);
    }
  }
  return out;
}

MemberAssignment member_assignment(const GroupPlan& plan, int member) {
  MemberAssignment a;
  if (plan.batch_size == 1) {
    return a;  // whole machine
  }
  if (plan.batch_size == 2) {
    a.dmm_begin = member * 2;
    a.dmm_count = 2;
    a.smm_begin = member * 2;
    a.smm_count = 2;
    a.afu_begin = member;
    a.afu_count = 1;
    return a;
  }
  a.dmm_begin = member;
  a.dmm_count = 1;
  a.smm_begin = member;
  a.smm_count = 1;
  a.afu_begin = member % kAfus;  // two members share an AFU with half the lanes
  a.afu_count = 1;
  a.afu_lanes = afu::kIauLanes / 2;
  return a;
}

// --- machine -----------------------------------------------------------------

struct SimMachine::MemberState {
  IntMatrix act;
  IntMatrix anchor;
  int true_length = 0;
};

struct SimMachine::StageTracker {
  std::array<uint64_t, kDmmCores + kSmmCores + kAfus> busy{};
  std::array<uint64_t, kDmmCores + kSmmCores + kAfus> stall{};

  uint64_t elapsed() const {
    uint64_t e = 0;
    for (size_t i = 0; i < busy.size(); ++i) e = std::max(e, busy[i] + stall[i]);
    return e;
  }
};

SimMachine::SimMachine(const ModelSpec& model, const CompressedPackage& pkg,
                       const SimConfig& cfg)
    : model_(model), pkg_(pkg), cfg_(cfg) {
  require(cfg.frac_bits >= 0 && cfg.frac_bits <= kMaxFracBits,
          "sim: frac_bits out of range");
  require(cfg.sram_stall_per_vector >= 1, "sim: stall penalty must be >= 1");
  validate_package_against_model(pkg, model);
  exp_lut_ = afu::build_exp_lut();
  gelu_lut_ = afu::build_gelu_lut(cfg.frac_bits);
  layer_sections_.resize(model.layers.size());
  for (size_t i = 0; i < pkg.sections.size(); ++i) {
    layer_sections_[pkg.sections[i].layer].push_back(static_cast<int>(i));
  }
  start_session();
}

void SimMachine::start_session() {
  stats_ = CycleStats{};
  stats_.ema_bytes += pkg_.ws_preload_bytes();  // dictionaries load once
}

void SimMachine::dmm_stage(const GroupPlan& plan, std::vector<MemberState>& members,
                           const PackageGroup& group, int bitwidth,
                           StageTracker& tracker) {
  const int cpm = cycles_per_mac(bitwidth);
  const int d = group.in_width;
  const int h = group.hidden_width;
  const int spv = cfg_.sram_stall_per_vector;
  for (size_t mi = 0; mi < members.size(); ++mi) {
    MemberState& m = members[mi];
    const MemberAssignment assign = member_assignment(plan, static_cast<int>(mi));
    require(m.act.cols == d, "dmm: activation width != dictionary input width");
    const int lp = m.act.rows;
    const int row_tiles = static_cast<int>(ceil_div(lp, kTile));
    const int col_tiles = static_cast<int>(ceil_div(h, kTile));
    const int k_tiles = static_cast<int>(ceil_div(d, kTile));
    IntMatrix y(lp, h, 16);
    for (int tc = 0; tc < col_tiles; ++tc) {
      // output-tile columns round-robin across the member's cores
      const int core = assign.dmm_begin + tc % assign.dmm_count;
      const int valid_h = std::min(kTile, h - tc * kTile);
      UnitStats& unit = stats_.dmm[core];
      for (int tr = 0; tr < row_tiles; ++tr) {
        const int valid_l = std::min(kTile, lp - tr * kTile);
        const int useful_l = useful_rows(tr, m.true_length);
        std::array<std::array<int64_t, kTile>, kTile> acc{};
        for (int kt = 0; kt < k_tiles; ++kt) {
          const int valid_k = std::min(kTile, d - kt * kTile);
          for (int ks = 0; ks < valid_k; ++ks) {
            const int k = kt * kTile + ks;
            for (int i = 0; i < valid_l; ++i) {
              const int64_t x = m.act.at(tr * kTile + i, k);
              if (x == 0) {
                continue;  // value shortcut; cycles are value-independent
              }
              const uint8_t* codes = group.ws_codes.data() + static_cast<size_t>(k) * h;
              for (int j = 0; j < valid_h; ++j) {
                acc[i][j] += x * group.codebook.levels[codes[tc * kTile + j]];
              }
            }
          }
          // every pass runs all 16 K-steps; no zero-skipping in the DMM
          const uint64_t pass_cycles = static_cast<uint64_t>(kTile) * cpm;
          tracker.busy[core] += pass_cycles;
          unit.busy += pass_cycles;
          unit.useful_mac_cycles +=
              static_cast<uint64_t>(useful_l) * valid_h * valid_k * cpm;
          stats_.mac_ops += static_cast<uint64_t>(useful_l) * valid_h * valid_k;
          if (cfg_.mode == BufferMode::SramBaseline) {
            // X tile loads column-by-column: 16 crossing vectors
            const uint64_t stall = static_cast<uint64_t>(kTile) * spv;
            tracker.stall[core] += stall;
            unit.stall += stall;
          }
        }
        for (int i = 0; i < valid_l; ++i) {
          for (int j = 0; j < valid_h; ++j) {
            y.at(tr * kTile + i, tc * kTile + j) = requantize(acc[i][j], cfg_.frac_bits);
          }
        }
        if (cfg_.mode == BufferMode::SramBaseline) {
          // Y tile stored column-by-column for the following column product
          const uint64_t stall = static_cast<uint64_t>(kTile) * spv;
          tracker.stall[core] += stall;
          unit.stall += stall;
        }
      }
    }
    m.act = std::move(y);
  }
}

void SimMachine::smm_stage(const GroupPlan& plan, std::vector<MemberState>& members,
                           const PackageSection& section, int h, int bitwidth,
                           StageTracker& tracker) {
  const int cpm = cycles_per_mac(bitwidth);
  const EncodedSection& enc = section.enc;
  const int spv = cfg_.sram_stall_per_vector;
  for (size_t mi = 0; mi < members.size(); ++mi) {
    MemberState& m = members[mi];
    const MemberAssignment assign = member_assignment(plan, static_cast<int>(mi));
    require(m.act.cols == h, "smm: activation width != dictionary hidden width");
    const int lp = m.act.rows;
    const uint64_t passes = ceil_div(lp, kSmmMacsPerCore);
    IntMatrix z(lp, enc.cols, 16);
    std::vector<int64_t> acc(static_cast<size_t>(lp));
    for (int c = 0; c < enc.cols; ++c) {
      // output columns round-robin across the member's cores
      const int core = assign.smm_begin + c % assign.smm_count;
      UnitStats& unit = stats_.smm[core];
      std::fill(acc.begin(), acc.end(), 0);
      int pos = 0;
      for (int j = 0; j < enc.k; ++j) {
        const uint8_t delta = enc.deltas[static_cast<size_t>(c) * enc.k + j];
        if (j == 0) {
          pos = delta;
        } else {
          require(delta >= 1, "smm: corrupt stream (zero delta)");
          pos += delta;
        }
        require(pos < h, "smm: corrupt stream (row pointer past end)");
        const int16_t w = decode_value(enc.value_codes[static_cast<size_t>(c) * enc.k + j],
                                       enc.m, enc.M);
        for (int r = 0; r < lp; ++r) {
          acc[static_cast<size_t>(r)] += static_cast<int64_t>(w) * m.act.at(r, pos);
        }
        // fillers cost cycles like any record
        tracker.busy[kDmmCores + core] += passes * cpm;
        unit.busy += passes * cpm;
        unit.useful_mac_cycles += static_cast<uint64_t>(m.true_length) * cpm;
        stats_.mac_ops += static_cast<uint64_t>(m.true_length);
        if (cfg_.mode == BufferMode::SramBaseline) {
          // one column of Y read column-by-column
          const uint64_t stall = ceil_div(lp, kTile) * spv;
          tracker.stall[kDmmCores + core] += stall;
          unit.stall += stall;
        }
      }
      for (int r = 0; r < lp; ++r) {
        z.at(r, c) = requantize(acc[static_cast<size_t>(r)], cfg_.frac_bits);
      }
    }
    m.act = std::move(z);
  }
}

void SimMachine::afu_stage(const GroupPlan& plan, std::vector<MemberState>& members,
                           const SubOp& op, StageTracker& tracker) {
  int passes = 0;
  switch (op.kind) {
    case SubOpKind::Softmax: passes = afu::kSoftmaxPasses; break;
    case SubOpKind::Layernorm: passes = afu::kLayernormPasses; break;
    case SubOpKind::Gelu: passes = afu::kGeluPasses; break;
    case SubOpKind::Residual: passes = afu::kResidualPasses; break;
    default: throw InvariantError("afu stage on a matmul sub-op");
  }
  for (size_t mi = 0; mi < members.size(); ++mi) {
    MemberState& m = members[mi];
    const MemberAssignment assign = member_assignment(plan, static_cast<int>(mi));
    const uint64_t row_cost =
        static_cast<uint64_t>(passes) * ceil_div(m.act.cols, assign.afu_lanes);
    for (int r = 0; r < m.act.rows; ++r) {
      // batch 1 alternates rows across both AFUs; otherwise the member owns one
      const int unit = assign.afu_begin + (assign.afu_count > 1 ? r % assign.afu_count : 0);
      tracker.busy[kDmmCores + kSmmCores + unit] += row_cost;
      stats_.afu[unit].busy += row_cost;
      std::span<int16_t> row(&m.act.at(r, 0), static_cast<size_t>(m.act.cols));
      switch (op.kind) {
        case SubOpKind::Softmax:
          if (op.use_fau) {
            afu::softmax_row_fau(row, exp_lut_, cfg_.frac_bits);
          } else {
            afu::softmax_row(row, exp_lut_, cfg_.frac_bits);
          }
          break;
        case SubOpKind::Layernorm:
          afu::layernorm_row(row, cfg_.frac_bits);
          break;
        case SubOpKind::Gelu:
          afu::gelu_row(row, gelu_lut_, cfg_.frac_bits);
          break;
        case SubOpKind::Residual:
          afu::residual_row(row, {&m.anchor.at(r, 0), static_cast<size_t>(m.anchor.cols)});
          break;
        default:
          break;
      }
    }
    if (op.kind == SubOpKind::Residual) m.anchor = m.act;
  }
}

void SimMachine::run_layer_members(int layer_index, std::vector<MemberState>& members,
                                   const GroupPlan& plan) {
  const LayerSpec& layer = model_.layers[static_cast<size_t>(layer_index)];
  // sparse sections stream in once per layer per batch group
  stats_.ema_bytes += pkg_.wd_layer_bytes(layer_index);
  if (cfg_.activation_ema) {
    for (const MemberState& m : members) {
      stats_.ema_bytes +=
          2ull * static_cast<uint64_t>(m.true_length) * model_.model_width * 2;
    }
  }
  for (MemberState& m : members) {
    for (int16_t& v : m.act.data) v = clamp_to_bits(v, layer.activation_bits);
    m.anchor = m.act;
  }
  size_t section_cursor = 0;
  for (const SubOp& op : layer.sub_ops) {
    StageTracker tracker{};
    if (op.kind == SubOpKind::Matmul) {
      const int sec_idx = layer_sections_[static_cast<size_t>(layer_index)][section_cursor++];
      const PackageSection& section = pkg_.sections[static_cast<size_t>(sec_idx)];
      const PackageGroup& group = pkg_.groups[section.group_id];
      {
        StageTracker dmm_tracker{};
        dmm_stage(plan, members, group, layer.activation_bits, dmm_tracker);
        stats_.total_cycles += dmm_tracker.elapsed();
      }
      smm_stage(plan, members, section, group.hidden_width, layer.activation_bits,
                tracker);
      stats_.total_cycles += tracker.elapsed();
    } else {
      afu_stage(plan, members, op, tracker);
      stats_.total_cycles += tracker.elapsed();
    }
  }
}

std::vector<IntMatrix> SimMachine::run_group(const GroupPlan& plan,
                                             const std::vector<IntMatrix>& inputs) {
  require(plan.batch_size == 1 || plan.batch_size == 2 || plan.batch_size == 4,
          "run_group: batch size must be 1, 2 or 4");
  require(!plan.members.empty() &&
              plan.members.size() <= static_cast<size_t>(plan.batch_size),
          "run_group: member count exceeds the batch size");
  require(plan.padded_length >= 1 && plan.padded_length <= model_.max_seq_len,
          "run_group: padded length out of range");

  std::vector<MemberState> members;
  members.reserve(plan.members.size());
  for (const GroupMember& gm : plan.members) {
    require(gm.input_index >= 0 &&
                gm.input_index < static_cast<int>(inputs.size()),
            "run_group: input index out of range");
    const IntMatrix& x = inputs[static_cast<size_t>(gm.input_index)];
    require(x.rows == gm.true_length, "run_group: input length mismatch");
    require(x.rows <= plan.padded_length, "run_group: member longer than padding");
    require(x.cols == model_.model_width, "run_group: input width != model width");
    MemberState m;
    m.true_length = gm.true_length;
    m.act = IntMatrix(plan.padded_length, model_.model_width, 16);
    for (int r = 0; r < x.rows; ++r) {
      for (int c = 0; c < x.cols; ++c) m.act.at(r, c) = x.at(r, c);
    }
    m.anchor = m.act;
    members.push_back(std::move(m));
  }
  for (size_t li = 0; li < model_.layers.size(); ++li) {
    run_layer_members(static_cast<int>(li), members, plan);
  }
  std::vector<IntMatrix> outputs;
  outputs.reserve(members.size());
  for (size_t mi = 0; mi < members.size(); ++mi) {
    const MemberState& m = members[mi];
    IntMatrix out(m.true_length, m.act.cols, 16);
    for (int r = 0; r < m.true_length; ++r) {
      for (int c = 0; c < m.act.cols; ++c) out.at(r, c) = m.act.at(r, c);
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

IntMatrix SimMachine::run_layer(int layer_index, const IntMatrix& x) {
  require(layer_index >= 0 && layer_index < static_cast<int>(model_.layers.size()),
          "run_layer: layer index out of range");
  x.validate();
  GroupPlan plan;
  plan.batch_size = 1;
  plan.padded_length = x.rows;
  plan.members.push_back({0, x.rows});
  std::vector<MemberState> members(1);
  members[0].true_length = x.rows;
  members[0].act = x;
  members[0].act.bitwidth = 16;
  members[0].anchor = members[0].act;
  run_layer_members(layer_index, members, plan);
  return members[0].act;
}

}  // namespace fta
