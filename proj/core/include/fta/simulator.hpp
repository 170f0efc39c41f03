#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fta/afu_math.hpp"
#include "fta/compressor.hpp"
#include "fta/matrix.hpp"
#include "fta/model.hpp"

namespace fta {

// Cycle-approximate machine model: 4 dense MM cores (16x16 MACs each, one
// 16x16 output tile per accumulation pass), 4 sparse MM cores (8x8 MACs,
// column products over nonzero records), 2 auxiliary function units. The
// accounting is per-pass analytic; cores run in parallel inside a stage,
// stages are serialized by the dataflow dependency.

inline constexpr int kTile = 16;
inline constexpr int kDmmCores = 4;
inline constexpr int kSmmCores = 4;
inline constexpr int kAfus = 2;
inline constexpr int kDmmMacsPerCore = 256;  // 4x4 PEs of 4x4 MACs
inline constexpr int kSmmMacsPerCore = 64;   // 8x8 MACs
inline constexpr uint64_t kMacCapacity =
    kDmmCores * kDmmMacsPerCore + kSmmCores * kSmmMacsPerCore;

// Bit-serial MAC on a 4b multiplier: a full 16b (8b, 4b) multiply-accumulate
// takes 16 (4, 1) cycles.
int cycles_per_mac(int bitwidth);

enum class BufferMode { Trf, SramBaseline };
enum class AccessDir { Row, Col };

struct SimConfig {
  int frac_bits = kDefaultFracBits;
  BufferMode mode = BufferMode::Trf;
  // SRAM baseline penalty for one direction-crossing 16-wide vector access
  // (one element per SRAM access).
  int sram_stall_per_vector = kTile;
  bool activation_ema = false;  // charge activation spill traffic per layer
};

struct UnitStats {
  uint64_t busy = 0;
  uint64_t stall = 0;
  uint64_t useful_mac_cycles = 0;
};

struct CycleStats {
  std::array<UnitStats, kDmmCores> dmm{};
  std::array<UnitStats, kSmmCores> smm{};
  std::array<UnitStats, kAfus> afu{};
  uint64_t total_cycles = 0;
  uint64_t mac_ops = 0;    // useful MACs (true rows, unpadded index ranges)
  uint64_t ema_bytes = 0;

  uint64_t useful_mac_cycles() const;
  uint64_t busy_cycles() const;
  uint64_t stall_cycles() const;
  // busy MAC cycles over total machine MAC-cycle capacity, in [0, 1]
  double utilization() const;
  double unit_utilization(const UnitStats& u, int macs_per_unit) const;
  void merge(const CycleStats& other);
};

// Two-direction accessible register tile: row and column vector access in one
// cycle each; writing one direction and reading the other transposes.
class Trf {
 public:
  void write_vector(AccessDir dir, int index, std::span<const int16_t> v);
  std::array<int16_t, kTile> read_vector(AccessDir dir, int index);
  uint64_t access_cycles() const { return access_cycles_; }

 private:
  std::array<std::array<int16_t, kTile>, kTile> reg_{};
  uint64_t access_cycles_ = 0;
};

// Full-tile round trip through a TRF; cycles (16 writes + 16 reads) reported
// via *access_cycles when given.
IntMatrix trf_roundtrip(const IntMatrix& tile, AccessDir write_dir, AccessDir read_dir,
                        uint64_t* access_cycles = nullptr);

struct DmmTileResult {
  IntMatrix y;           // 16x16, requantized
  uint64_t busy_cycles;  // 16 K-steps x cycles_per_mac
};

// One 16x16x16 accumulation pass: dequantize the 4b dictionary tile through
// the codebook, outer-product accumulate, requantize at readout.
DmmTileResult dmm_tile(const IntMatrix& x_tile, const std::vector<uint8_t>& ws_codes_tile,
                       const NonUniformCodebook& codebook, int bitwidth, int frac_bits);

struct SmmRunResult {
  IntMatrix z;
  uint64_t busy_cycles;  // records x ceil(rows/64) x cycles_per_mac
};

// Column products over an encoded section: per record, the running row
// pointer advances by the stored delta (absolute indices never materialize)
// and the dequantized value scales one column of y into the accumulator.
// y is in the permuted column space.
SmmRunResult smm_run(const IntMatrix& y, const EncodedSection& sec, int bitwidth,
                     int frac_bits);

struct GroupMember {
  int input_index = 0;
  int true_length = 0;
};

// One batch group: the dataflow width (1/2/4) and the member core split.
struct GroupPlan {
  int batch_size = 1;
  int padded_length = 0;
  std::vector<GroupMember> members;
};

struct MemberAssignment {
  int dmm_begin = 0, dmm_count = kDmmCores;
  int smm_begin = 0, smm_count = kSmmCores;
  int afu_begin = 0, afu_count = kAfus;
  int afu_lanes = afu::kIauLanes;
};

MemberAssignment member_assignment(const GroupPlan& plan, int member);

class SimMachine {
 public:
  SimMachine(const ModelSpec& model, const CompressedPackage& pkg, const SimConfig& cfg);

  // Resets counters and charges the one-time dictionary preload.
  void start_session();

  // Runs every layer for one batch group; outputs are sliced back to true
  // lengths, in member order.
  std::vector<IntMatrix> run_group(const GroupPlan& plan,
                                   const std::vector<IntMatrix>& inputs);

  // Single-input single-layer run (batch-1 plan); charges that layer's
  // sparse-section traffic.
  IntMatrix run_layer(int layer_index, const IntMatrix& x);

  const CycleStats& stats() const { return stats_; }
  const SimConfig& config() const { return cfg_; }
  const ModelSpec& model() const { return model_; }
  const CompressedPackage& package() const { return pkg_; }

 private:
  struct MemberState;
  struct StageTracker;

  void run_layer_members(int layer_index, std::vector<MemberState>& members,
                         const GroupPlan& plan);
  void dmm_stage(const GroupPlan& plan, std::vector<MemberState>& members,
                 const PackageGroup& group, int bitwidth, StageTracker& tracker);
  void smm_stage(const GroupPlan& plan, std::vector<MemberState>& members,
                 const PackageSection& section, int h, int bitwidth,
                 StageTracker& tracker);
  void afu_stage(const GroupPlan& plan, std::vector<MemberState>& members,
                 const SubOp& op, StageTracker& tracker);

  const ModelSpec& model_;
  const CompressedPackage& pkg_;
  SimConfig cfg_;
  CycleStats stats_;
  afu::Lut exp_lut_;
  afu::Lut gelu_lut_;
  std::vector<std::vector<int>> layer_sections_;  // layer -> section indices
};

}  // namespace fta
