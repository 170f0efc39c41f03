#include "fta/perfmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fta/afu_math.hpp"

namespace fta {

using nlohmann::json;

double CostModel::on_chip_power_mw() const {
  if (on_chip_mw.has_value()) return *on_chip_mw;
  // measured endpoints: 7.12 mW at 60 MHz, 152.5 mW at 450 MHz
  return 7.12 + (152.5 - 7.12) * (clock_mhz - 60.0) / (450.0 - 60.0);
}

void CostModel::validate() const {
  require(ema_energy_pj_per_bit > 0, "cost: ema energy must be positive");
  require(ema_bandwidth_gb_per_s > 0, "cost: ema bandwidth must be positive");
  require(clock_mhz >= 60.0 && clock_mhz <= 450.0,
          "cost: clock must be in [60, 450] MHz");
  require(on_chip_power_mw() > 0, "cost: on-chip power must be positive");
  require(overlap >= 0.0 && overlap <= 1.0, "cost: overlap must be in [0, 1]");
}

double latency_us_per_token(uint64_t cycles, uint64_t ema_bytes, uint64_t tokens,
                            const CostModel& cost) {
  cost.validate();
  require(tokens > 0, "latency: zero tokens");
  const double t_compute = static_cast<double>(cycles) / (cost.clock_mhz * 1e6);
  const double t_ema = static_cast<double>(ema_bytes) / (cost.ema_bandwidth_gb_per_s * 1e9);
  const double t = t_compute + t_ema - cost.overlap * std::min(t_compute, t_ema);
  return t * 1e6 / static_cast<double>(tokens);
}

double energy_uj_per_token(uint64_t cycles, uint64_t ema_bytes, uint64_t tokens,
                           const CostModel& cost) {
  cost.validate();
  require(tokens > 0, "energy: zero tokens");
  const double e_ema =
      static_cast<double>(ema_bytes) * 8.0 * cost.ema_energy_pj_per_bit * 1e-12;
  const double e_chip = cost.on_chip_power_mw() * 1e-3 * static_cast<double>(cycles) /
                        (cost.clock_mhz * 1e6);
  return (e_ema + e_chip) * 1e6 / static_cast<double>(tokens);
}

double ema_energy_share(uint64_t cycles, uint64_t ema_bytes, const CostModel& cost) {
  const double e_ema =
      static_cast<double>(ema_bytes) * 8.0 * cost.ema_energy_pj_per_bit * 1e-12;
  const double e_chip = cost.on_chip_power_mw() * 1e-3 * static_cast<double>(cycles) /
                        (cost.clock_mhz * 1e6);
  if (e_ema + e_chip <= 0.0) return 0.0;
  return e_ema / (e_ema + e_chip);
}

RunReport build_report(const std::string& name, const std::string& mode, int batch,
                       uint64_t tokens, uint64_t inferences, const CycleStats& stats,
                       const CostModel& cost) {
  cost.validate();
  RunReport r;
  r.name = name;
  r.mode = mode;
  r.batch = batch;
  r.tokens = tokens;
  r.inferences = inferences;
  r.total_cycles = stats.total_cycles;
  r.ema_bytes = stats.ema_bytes;
  r.mac_ops = stats.mac_ops;
  r.useful_mac_cycles = stats.useful_mac_cycles();
  r.busy_cycles = stats.busy_cycles();
  r.stall_cycles = stats.stall_cycles();
  r.utilization = stats.utilization();
  for (const UnitStats& u : stats.dmm) {
    r.dmm_utilization.push_back(stats.unit_utilization(u, kDmmMacsPerCore));
  }
  for (const UnitStats& u : stats.smm) {
    r.smm_utilization.push_back(stats.unit_utilization(u, kSmmMacsPerCore));
  }
  if (tokens > 0) {
    r.us_per_token = latency_us_per_token(stats.total_cycles, stats.ema_bytes, tokens, cost);
    r.uj_per_token = energy_uj_per_token(stats.total_cycles, stats.ema_bytes, tokens, cost);
  }
  r.ema_energy_share = ema_energy_share(stats.total_cycles, stats.ema_bytes, cost);
  r.cost = cost;
  return r;
}

RunReport dense_baseline_report(const ModelSpec& model, const std::vector<int>& lengths,
                                const SimConfig& cfg, const CostModel& cost) {
  model.validate();
  CycleStats st;
  st.ema_bytes = model.dense_weight_bytes() * lengths.size();
  const int spv = cfg.sram_stall_per_vector;
  uint64_t tokens = 0;
  for (int len : lengths) {
    require(len >= 1 && len <= model.max_seq_len, "dense baseline: bad length");
    tokens += static_cast<uint64_t>(len);
    for (const LayerSpec& layer : model.layers) {
      const int cpm = cycles_per_mac(layer.activation_bits);
      int width = model.model_width;
      for (const SubOp& op : layer.sub_ops) {
        std::array<uint64_t, kDmmCores> busy{};
        std::array<uint64_t, kDmmCores> stall{};
        if (op.kind == SubOpKind::Matmul) {
          const int d_in = width;
          const int d_out = op.out_width;
          const int row_tiles = (len + kTile - 1) / kTile;
          const int col_tiles = (d_out + kTile - 1) / kTile;
          const int k_tiles = (d_in + kTile - 1) / kTile;
          for (int tc = 0; tc < col_tiles; ++tc) {
            const int core = tc % kDmmCores;
            const int valid_h = std::min(kTile, d_out - tc * kTile);
            for (int tr = 0; tr < row_tiles; ++tr) {
              const int valid_l = std::min(kTile, len - tr * kTile);
              for (int kt = 0; kt < k_tiles; ++kt) {
                const int valid_k = std::min(kTile, d_in - kt * kTile);
                busy[core] += static_cast<uint64_t>(kTile) * cpm;
                st.dmm[core].busy += static_cast<uint64_t>(kTile) * cpm;
                st.dmm[core].useful_mac_cycles +=
                    static_cast<uint64_t>(valid_l) * valid_h * valid_k * cpm;
                st.mac_ops += static_cast<uint64_t>(valid_l) * valid_h * valid_k;
                if (cfg.mode == BufferMode::SramBaseline) {
                  stall[core] += static_cast<uint64_t>(kTile) * spv;
                  st.dmm[core].stall += static_cast<uint64_t>(kTile) * spv;
                }
              }
              if (cfg.mode == BufferMode::SramBaseline) {
                stall[core] += static_cast<uint64_t>(kTile) * spv;
                st.dmm[core].stall += static_cast<uint64_t>(kTile) * spv;
              }
            }
          }
          width = d_out;
          uint64_t elapsed = 0;
          for (int i = 0; i < kDmmCores; ++i) {
            elapsed = std::max(elapsed, busy[i] + stall[i]);
          }
          st.total_cycles += elapsed;
        } else {
          int passes = 0;
          switch (op.kind) {
            case SubOpKind::Softmax: passes = afu::kSoftmaxPasses; break;
            case SubOpKind::Layernorm: passes = afu::kLayernormPasses; break;
            case SubOpKind::Gelu: passes = afu::kGeluPasses; break;
            case SubOpKind::Residual: passes = afu::kResidualPasses; break;
            default: break;
          }
          const uint64_t row_cost =
              static_cast<uint64_t>(passes) *
              ((static_cast<uint64_t>(width) + afu::kIauLanes - 1) / afu::kIauLanes);
          std::array<uint64_t, kAfus> afu_busy{};
          for (int r = 0; r < len; ++r) {
            afu_busy[r % kAfus] += row_cost;
            st.afu[r % kAfus].busy += row_cost;
          }
          st.total_cycles += std::max(afu_busy[0], afu_busy[1]);
        }
      }
    }
  }
  return build_report("dense-baseline", cfg.mode == BufferMode::Trf ? "trf" : "sram_baseline",
                      1, tokens, lengths.size(), st, cost);
}

std::vector<CompareRow> compare(const RunReport& a, const RunReport& b) {
  auto row = [](const std::string& name, double va, double vb) {
    CompareRow r;
    r.metric = name;
    r.a = va;
    r.b = vb;
    if (vb == 0.0) {
      r.unbounded = va != 0.0;
      r.ratio = va == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    } else {
      r.ratio = va / vb;
    }
    return r;
  };
  std::vector<CompareRow> rows;
  rows.push_back(row("ema_bytes", static_cast<double>(a.ema_bytes),
                     static_cast<double>(b.ema_bytes)));
  rows.push_back(row("utilization", a.utilization, b.utilization));
  rows.push_back(row("us_per_token", a.us_per_token, b.us_per_token));
  rows.push_back(row("uj_per_token", a.uj_per_token, b.uj_per_token));
  rows.push_back(row("total_cycles", static_cast<double>(a.total_cycles),
                     static_cast<double>(b.total_cycles)));
  rows.push_back(row("mac_ops", static_cast<double>(a.mac_ops),
                     static_cast<double>(b.mac_ops)));
  return rows;
}

std::string format_report_text(const RunReport& r) {
  std::ostringstream os;
  os << "run: " << r.name << " (mode=" << r.mode << ", batch="
     << (r.batch == 0 ? std::string("auto") : std::to_string(r.batch)) << ")\n";
  os << "  inferences:        " << r.inferences << "\n";
  os << "  tokens:            " << r.tokens << "\n";
  os << "  total cycles:      " << r.total_cycles << "\n";
  os << "  busy cycles:       " << r.busy_cycles << "\n";
  os << "  stall cycles:      " << r.stall_cycles << "\n";
  os << "  mac ops:           " << r.mac_ops << "\n";
  os << "  ema bytes:         " << r.ema_bytes << "\n";
  os << std::fixed << std::setprecision(4);
  os << "  utilization:       " << r.utilization << "\n";
  os << "  dmm utilization:  ";
  for (double u : r.dmm_utilization) os << " " << u;
  os << "\n  smm utilization:  ";
  for (double u : r.smm_utilization) os << " " << u;
  os << "\n";
  os << "  us/token:          " << r.us_per_token << "\n";
  os << "  uj/token:          " << r.uj_per_token << "\n";
  os << "  ema energy share:  " << r.ema_energy_share << "\n";
  os << std::setprecision(1);
  os << "  cost: " << r.cost.ema_energy_pj_per_bit << " pJ/b, "
     << r.cost.ema_bandwidth_gb_per_s << " GB/s, " << r.cost.clock_mhz << " MHz, "
     << std::setprecision(2) << r.cost.on_chip_power_mw() << " mW, overlap "
     << r.cost.overlap << "\n";
  return os.str();
}

std::string format_compare_text(const RunReport& a, const RunReport& b) {
  std::ostringstream os;
  os << "compare: " << a.name << " vs " << b.name << "\n";
  os << std::left << std::setw(16) << "  metric" << std::right << std::setw(16) << "a"
     << std::setw(16) << "b" << std::setw(12) << "a/b" << "\n";
  for (const CompareRow& r : compare(a, b)) {
    os << "  " << std::left << std::setw(14) << r.metric << std::right << std::fixed
       << std::setprecision(4) << std::setw(16) << r.a << std::setw(16) << r.b;
    if (r.unbounded) {
      os << std::setw(12) << "inf";
    } else {
      os << std::setw(12) << r.ratio;
    }
    os << "\n";
  }
  return os.str();
}

namespace {

json report_to_json(const RunReport& r) {
  json j;
  j["name"] = r.name;
  j["mode"] = r.mode;
  j["batch"] = r.batch;
  j["tokens"] = r.tokens;
  j["inferences"] = r.inferences;
  j["total_cycles"] = r.total_cycles;
  j["ema_bytes"] = r.ema_bytes;
  j["mac_ops"] = r.mac_ops;
  j["useful_mac_cycles"] = r.useful_mac_cycles;
  j["busy_cycles"] = r.busy_cycles;
  j["stall_cycles"] = r.stall_cycles;
  j["utilization"] = r.utilization;
  j["dmm_utilization"] = r.dmm_utilization;
  j["smm_utilization"] = r.smm_utilization;
  j["us_per_token"] = r.us_per_token;
  j["uj_per_token"] = r.uj_per_token;
  j["ema_energy_share"] = r.ema_energy_share;
  j["cost"] = {{"ema_energy_pj_per_bit", r.cost.ema_energy_pj_per_bit},
               {"ema_bandwidth_gb_per_s", r.cost.ema_bandwidth_gb_per_s},
               {"clock_mhz", r.cost.clock_mhz},
               {"on_chip_mw", r.cost.on_chip_power_mw()},
               {"overlap", r.cost.overlap}};
  return j;
}

RunReport report_from_json(const json& j) {
  RunReport r;
  r.name = j.at("name").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.batch = j.at("batch").get<int>();
  r.tokens = j.at("tokens").get<uint64_t>();
  r.inferences = j.at("inferences").get<uint64_t>();
  r.total_cycles = j.at("total_cycles").get<uint64_t>();
  r.ema_bytes = j.at("ema_bytes").get<uint64_t>();
  r.mac_ops = j.at("mac_ops").get<uint64_t>();
  r.useful_mac_cycles = j.at("useful_mac_cycles").get<uint64_t>();
  r.busy_cycles = j.at("busy_cycles").get<uint64_t>();
  r.stall_cycles = j.at("stall_cycles").get<uint64_t>();
  r.utilization = j.at("utilization").get<double>();
  r.dmm_utilization = j.at("dmm_utilization").get<std::vector<double>>();
  r.smm_utilization = j.at("smm_utilization").get<std::vector<double>>();
  r.us_per_token = j.at("us_per_token").get<double>();
  r.uj_per_token = j.at("uj_per_token").get<double>();
  r.ema_energy_share = j.at("ema_energy_share").get<double>();
  const json& c = j.at("cost");
  r.cost.ema_energy_pj_per_bit = c.at("ema_energy_pj_per_bit").get<double>();
  r.cost.ema_bandwidth_gb_per_s = c.at("ema_bandwidth_gb_per_s").get<double>();
  r.cost.clock_mhz = c.at("clock_mhz").get<double>();
  r.cost.on_chip_mw = c.at("on_chip_mw").get<double>();
  r.cost.overlap = c.at("overlap").get<double>();
  return r;
}

}  // namespace

void append_record(const std::filesystem::path& path, const RunReport& r) {
  std::ofstream out(path, std::ios::app);
  require(out.good(), "cannot open record file: " + path.string());
  out << report_to_json(r).dump() << "\n";
}

std::vector<RunReport> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open record file: " + path.string());
  std::vector<RunReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(report_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("record parse error: " + std::string(e.what()));
    }
  }
  require(!out.empty(), "record file has no records: " + path.string());
  return out;
}

}  // namespace fta
