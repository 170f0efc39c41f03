#include "fta/fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fta/rng.hpp"

namespace fta {
namespace {

LayerSpec transformer_layer(int bits, const std::string& attn, const std::string& ffn,
                            const std::string& ffn_back, int d, int d_ff,
                            bool fau_softmax = false) {
  LayerSpec layer;
  layer.activation_bits = bits;
  SubOp softmax{SubOpKind::Softmax, "", 0, fau_softmax};
  layer.sub_ops = {
      {SubOpKind::Layernorm, "", 0, false},
      {SubOpKind::Matmul, attn, d, false},
      softmax,
      {SubOpKind::Matmul, attn, d, false},
      {SubOpKind::Residual, "", 0, false},
      {SubOpKind::Layernorm, "", 0, false},
      {SubOpKind::Matmul, ffn, d_ff, false},
      {SubOpKind::Gelu, "", 0, false},
      {SubOpKind::Matmul, ffn_back, d, false},
      {SubOpKind::Residual, "", 0, false},
  };
  return layer;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"toy-encoder", "toy-vision", "toy-speech", "toy-translation"};
}

ModelSpec fixture_model(const std::string& name) {
  ModelSpec m;
  m.name = name;
  m.max_seq_len = kMaxSeqLen;
  if (name == "toy-encoder") {
    // 8b encoder-only stack with narrow dictionaries; single-tile dictionary
    // columns make the batch-1 vs batch-4 core-idle contrast visible
    m.model_width = 32;
    m.dict_groups["attn"] = {32, 12, 6};
    m.dict_groups["ffn"] = {32, 12, 6};
    m.dict_groups["ffn_back"] = {64, 16, 8};
    for (int i = 0; i < 4; ++i) {
      m.layers.push_back(transformer_layer(8, "attn", "ffn", "ffn_back", 32, 64));
    }
  } else if (name == "toy-vision") {
    m.model_width = 48;
    m.dict_groups["attn"] = {48, 16, 8};
    m.dict_groups["ffn"] = {48, 16, 8};
    m.dict_groups["ffn_back"] = {96, 24, 8};
    for (int i = 0; i < 3; ++i) {
      m.layers.push_back(transformer_layer(16, "attn", "ffn", "ffn_back", 48, 96, true));
    }
  } else if (name == "toy-speech") {
    m.model_width = 32;
    m.dict_groups["enc_attn"] = {32, 12, 6};
    m.dict_groups["enc_ffn"] = {32, 12, 6};
    m.dict_groups["enc_ffn_back"] = {64, 16, 8};
    m.dict_groups["dec_attn"] = {32, 12, 4};
    m.dict_groups["dec_ffn"] = {32, 12, 6};
    m.dict_groups["dec_ffn_back"] = {64, 16, 8};
    for (int i = 0; i < 2; ++i) {
      m.layers.push_back(transformer_layer(16, "enc_attn", "enc_ffn", "enc_ffn_back", 32, 64));
    }
    for (int i = 0; i < 2; ++i) {
      m.layers.push_back(transformer_layer(16, "dec_attn", "dec_ffn", "dec_ffn_back", 32, 64));
    }
  } else if (name == "toy-translation") {
    m.model_width = 32;
    m.dict_groups["attn"] = {32, 10, 6};
    m.dict_groups["ffn"] = {32, 14, 6};
    m.dict_groups["ffn_back"] = {48, 14, 8};
    const int bits[4] = {16, 8, 4, 8};
    for (int i = 0; i < 4; ++i) {
      m.layers.push_back(transformer_layer(bits[i], "attn", "ffn", "ffn_back", 32, 48));
    }
  } else {
    throw DataError("unknown fixture: " + name);
  }
  m.validate();
  return m;
}

std::vector<IntMatrix> fixture_dense_weights(const ModelSpec& model, uint64_t seed,
                                             int frac_bits) {
  std::vector<IntMatrix> out;
  const std::vector<SectionRef> refs = model.sections();
  const int64_t cap = std::min<int64_t>(32767, INT64_C(2) << frac_bits);  // ~2.0
  for (size_t i = 0; i < refs.size(); ++i) {
    Rng rng(seed * 1000003 + i);
    IntMatrix w(refs[i].in_width, refs[i].out_width, 16);
    for (int16_t& v : w.data) {
      const double x = rng.next_normal() * 0.5 * (INT64_C(1) << frac_bits);
      v = static_cast<int16_t>(std::clamp<int64_t>(std::llround(x), -cap, cap));
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<int> fixture_trace(const std::string& name) {
  if (name == "toy-encoder") {
    // short-query profile: all entries batch four ways
    return {8, 6, 4, 10, 5, 7, 3, 9};
  }
  if (name == "toy-vision") {
    return {48, 96, 64, 33, 128, 65, 32, 16, 8, 4};
  }
  if (name == "toy-speech") {
    return {64, 50, 40, 33, 60, 35};
  }
  if (name == "toy-translation") {
    return {128, 120, 100, 80, 70, 20, 18};
  }
  throw DataError("unknown fixture: " + name);
}

IntMatrix make_input(int length, int width, int activation_bits, int frac_bits,
                     uint64_t seed) {
  IntMatrix x(length, width, activation_bits);
  const int64_t cap =
      std::min<int64_t>(bitwidth_max(activation_bits), INT64_C(3) << frac_bits);
  Rng rng(seed);
  for (int16_t& v : x.data) {
    v = static_cast<int16_t>(rng.next_int(-cap, cap));
  }
  return x;
}

FixtureFiles write_fixture(const std::filesystem::path& dir, const std::string& name,
                           uint64_t seed, int frac_bits) {
  const ModelSpec model = fixture_model(name);
  const std::filesystem::path root = dir / name;
  std::filesystem::create_directories(root / "weights");
  FixtureFiles files;
  files.model_json = root / "model.json";
  files.weights_dir = root / "weights";
  files.trace_file = root / "trace.txt";
  save_model_spec(files.model_json, model);
  const std::vector<IntMatrix> weights = fixture_dense_weights(model, seed, frac_bits);
  for (size_t i = 0; i < weights.size(); ++i) {
    std::ostringstream fn;
    fn << "s" << std::setw(3) << std::setfill('0') << i << ".mat";
    save_matrix(files.weights_dir / fn.str(), weights[i]);
  }
  std::ofstream trace(files.trace_file, std::ios::trunc);
  require(trace.good(), "cannot write trace: " + files.trace_file.string());
  trace << "# one inference per line: token count\n";
  for (int len : fixture_trace(name)) trace << len << "\n";
  return files;
}

}  // namespace fta
