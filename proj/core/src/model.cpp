#include "fta/model.hpp"

#include <fstream>

#include <json.hpp>

namespace fta {

using nlohmann::json;

const char* to_string(SubOpKind k) {
  switch (k) {
    case SubOpKind::Matmul: return "matmul";
    case SubOpKind::Softmax: return "softmax";
    case SubOpKind::Layernorm: return "layernorm";
    case SubOpKind::Gelu: return "gelu";
    case SubOpKind::Residual: return "residual";
  }
  return "?";
}

SubOpKind sub_op_kind_from_string(const std::string& s) {
  if (s == "matmul") return SubOpKind::Matmul;
  if (s == "softmax") return SubOpKind::Softmax;
  if (s == "layernorm") return SubOpKind::Layernorm;
  if (s == "gelu") return SubOpKind::Gelu;
  if (s == "residual") return SubOpKind::Residual;
  throw DataError("unknown sub-op kind: " + s);
}

void ModelSpec::validate() const {
  require(!name.empty(), "model: name required");
  require(model_width > 0, "model: model_width must be positive");
  require(max_seq_len >= 1 && max_seq_len <= kMaxSeqLen,
          "model: max_seq_len must be in [1, 128]");
  require(!layers.empty(), "model: at least one layer");
  for (const auto& [gname, g] : dict_groups) {
    require(g.in_width > 0 && g.hidden_width > 0, "dict group dims must be positive");
    require(g.hidden_width < g.in_width,
            "dict group " + gname + ": hidden width must be < input width");
    require(g.hidden_width <= 256, "dict group hidden width must be <= 256");
    require(g.nz_per_col >= 1 && g.nz_per_col <= g.hidden_width,
            "dict group " + gname + ": nz_per_col must be in [1, hidden]");
  }
  for (size_t li = 0; li < layers.size(); ++li) {
    const LayerSpec& layer = layers[li];
    require(layer.activation_bits == 4 || layer.activation_bits == 8 ||
                layer.activation_bits == 16,
            "layer activation bits must be 4, 8 or 16");
    require(!layer.sub_ops.empty(), "layer with no sub-ops");
    // Width chaining: every op must see the width it expects; residual adds
    // the anchor (layer input, re-anchored after each residual).
    int width = model_width;
    int anchor_width = model_width;
    for (const SubOp& op : layer.sub_ops) {
      if (op.kind == SubOpKind::Matmul) {
        auto it = dict_groups.find(op.dict_group);
        require(it != dict_groups.end(),
                "matmul references unknown dict group: " + op.dict_group);
        require(it->second.in_width == width,
                "matmul input width mismatch in layer " + std::to_string(li));
        require(op.out_width > 0, "matmul out_width must be positive");
        width = op.out_width;
      } else if (op.kind == SubOpKind::Residual) {
        require(anchor_width == width,
                "residual width mismatch in layer " + std::to_string(li));
        anchor_width = width;
      }
    }
    require(width == model_width,
            "layer " + std::to_string(li) + " must end at model width");
  }
}

int ModelSpec::group_id(const std::string& gname) const {
  int id = 0;
  for (const auto& [n, g] : dict_groups) {
    if (n == gname) return id;
    ++id;
  }
  throw DataError("unknown dict group: " + gname);
}

std::vector<std::string> ModelSpec::group_names() const {
  std::vector<std::string> names;
  names.reserve(dict_groups.size());
  for (const auto& [n, g] : dict_groups) names.push_back(n);
  return names;
}

std::vector<SectionRef> ModelSpec::sections() const {
  std::vector<SectionRef> out;
  for (size_t li = 0; li < layers.size(); ++li) {
    int width = model_width;
    for (size_t oi = 0; oi < layers[li].sub_ops.size(); ++oi) {
      const SubOp& op = layers[li].sub_ops[oi];
      if (op.kind == SubOpKind::Matmul) {
        out.push_back({static_cast<int>(li), static_cast<int>(oi), op.dict_group,
                       width, op.out_width});
        width = op.out_width;
      }
    }
  }
  return out;
}

uint64_t ModelSpec::dense_weight_bytes() const {
  uint64_t bytes = 0;
  for (const SectionRef& s : sections()) {
    bytes += static_cast<uint64_t>(s.in_width) * s.out_width * 2;
  }
  return bytes;
}

ModelSpec load_model_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open model spec: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model spec parse error: " + std::string(e.what()));
  }
  ModelSpec m;
  try {
    m.name = j.at("name").get<std::string>();
    m.max_seq_len = j.value("max_seq_len", kMaxSeqLen);
    m.model_width = j.at("model_width").get<int>();
    for (const auto& [gname, gj] : j.at("dict_groups").items()) {
      DictGroup g;
      g.in_width = gj.at("in_width").get<int>();
      g.hidden_width = gj.at("hidden_width").get<int>();
      g.nz_per_col = gj.at("nz_per_col").get<int>();
      m.dict_groups[gname] = g;
    }
    for (const auto& lj : j.at("layers")) {
      LayerSpec layer;
      layer.activation_bits = lj.value("activation_bits", 16);
      for (const auto& oj : lj.at("sub_ops")) {
        SubOp op;
        op.kind = sub_op_kind_from_string(oj.at("kind").get<std::string>());
        if (op.kind == SubOpKind::Matmul) {
          op.dict_group = oj.at("dict_group").get<std::string>();
          op.out_width = oj.at("out_width").get<int>();
        }
        if (op.kind == SubOpKind::Softmax) op.use_fau = oj.value("use_fau", false);
        layer.sub_ops.push_back(op);
      }
      m.layers.push_back(std::move(layer));
    }
  } catch (const json::exception& e) {
    throw DataError("model spec schema error: " + std::string(e.what()));
  }
  m.validate();
  return m;
}

void save_model_spec(const std::filesystem::path& path, const ModelSpec& spec) {
  spec.validate();
  json j;
  j["name"] = spec.name;
  j["max_seq_len"] = spec.max_seq_len;
  j["model_width"] = spec.model_width;
  json groups = json::object();
  for (const auto& [gname, g] : spec.dict_groups) {
    groups[gname] = {{"in_width", g.in_width},
                     {"hidden_width", g.hidden_width},
                     {"nz_per_col", g.nz_per_col}};
  }
  j["dict_groups"] = groups;
  json layers = json::array();
  for (const LayerSpec& layer : spec.layers) {
    json lj;
    lj["activation_bits"] = layer.activation_bits;
    json ops = json::array();
    for (const SubOp& op : layer.sub_ops) {
      json oj;
      oj["kind"] = to_string(op.kind);
      if (op.kind == SubOpKind::Matmul) {
        oj["dict_group"] = op.dict_group;
        oj["out_width"] = op.out_width;
      }
      if (op.kind == SubOpKind::Softmax && op.use_fau) oj["use_fau"] = true;
      ops.push_back(oj);
    }
    lj["sub_ops"] = ops;
    layers.push_back(lj);
  }
  j["layers"] = layers;
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot write model spec: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace fta
