#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fta/model.hpp"
#include "fta/simulator.hpp"

namespace fta {

// External-memory cost constants default to LPDDR3 figures: 3.7 pJ/bit and
// 6.4 GB/s. On-chip power interpolates linearly between the measured
// endpoints (60 MHz, 7.12 mW) and (450 MHz, 152.5 mW); it is a calibration
// stand-in, not a per-MAC energy model.
struct CostModel {
  double ema_energy_pj_per_bit = 3.7;
  double ema_bandwidth_gb_per_s = 6.4;
  double clock_mhz = 450.0;
  std::optional<double> on_chip_mw;  // unset: interpolate from clock
  double overlap = 0.0;              // 0 = compute and EMA fully serialized

  double on_chip_power_mw() const;
  void validate() const;
};

struct RunReport {
  std::string name;
  std::string mode;  // "trf" | "sram_baseline"
  int batch = 0;     // 0 = policy
  uint64_t tokens = 0;
  uint64_t inferences = 0;
  uint64_t total_cycles = 0;
  uint64_t ema_bytes = 0;
  uint64_t mac_ops = 0;
  uint64_t useful_mac_cycles = 0;
  uint64_t busy_cycles = 0;
  uint64_t stall_cycles = 0;
  double utilization = 0.0;
  std::vector<double> dmm_utilization;
  std::vector<double> smm_utilization;
  // derived at build time from the cost model, recomputable exactly
  double us_per_token = 0.0;
  double uj_per_token = 0.0;
  double ema_energy_share = 0.0;
  CostModel cost;
};

double latency_us_per_token(uint64_t cycles, uint64_t ema_bytes, uint64_t tokens,
                            const CostModel& cost);
double energy_uj_per_token(uint64_t cycles, uint64_t ema_bytes, uint64_t tokens,
                           const CostModel& cost);
double ema_energy_share(uint64_t cycles, uint64_t ema_bytes, const CostModel& cost);

RunReport build_report(const std::string& name, const std::string& mode, int batch,
                       uint64_t tokens, uint64_t inferences, const CycleStats& stats,
                       const CostModel& cost);

// Analytic dense-16b baseline: the same model with unfactorized weights
// streamed once per inference; dense MM cores only, same AFU recipes.
RunReport dense_baseline_report(const ModelSpec& model, const std::vector<int>& lengths,
                                const SimConfig& cfg, const CostModel& cost);

struct CompareRow {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  double ratio = 0.0;   // a / b
  bool unbounded = false;
};

// Ratio table a/b for EMA, utilization, latency and energy.
std::vector<CompareRow> compare(const RunReport& a, const RunReport& b);

std::string format_report_text(const RunReport& r);
std::string format_compare_text(const RunReport& a, const RunReport& b);

// Line-delimited machine-readable records.
void append_record(const std::filesystem::path& path, const RunReport& r);
std::vector<RunReport> read_records(const std::filesystem::path& path);

}  // namespace fta
