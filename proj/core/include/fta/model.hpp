#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fta/errors.hpp"

namespace fta {

inline constexpr int kMaxSeqLen = 128;

enum class SubOpKind { Matmul, Softmax, Layernorm, Gelu, Residual };

const char* to_string(SubOpKind k);
SubOpKind sub_op_kind_from_string(const std::string& s);

struct SubOp {
  SubOpKind kind = SubOpKind::Matmul;
  std::string dict_group;  // matmul only
  int out_width = 0;       // matmul only
  bool use_fau = false;    // softmax only: route the divide through BF16
};

// One shared dictionary per sub-op class (encoder/decoder x attention/FFN in
// the shipped fixtures). in_width rows, hidden_width columns.
struct DictGroup {
  int in_width = 0;
  int hidden_width = 0;
  int nz_per_col = 0;
};

struct LayerSpec {
  int activation_bits = 16;  // 4/8/16; drives MAC timing and the entry clamp
  std::vector<SubOp> sub_ops;
};

// Identifies one factorized weight: the I-th matmul of layer L.
struct SectionRef {
  int layer = 0;
  int sub_op = 0;          // index into layer's sub_ops
  std::string group;
  int in_width = 0;
  int out_width = 0;
};

struct ModelSpec {
  std::string name;
  int max_seq_len = kMaxSeqLen;
  int model_width = 0;
  std::map<std::string, DictGroup> dict_groups;  // ordered: stable group ids
  std::vector<LayerSpec> layers;

  void validate() const;

  int group_id(const std::string& name) const;
  std::vector<std::string> group_names() const;

  // All matmul sub-ops in traversal order (layer asc, sub-op asc); this is
  // the section order of every package built for the model.
  std::vector<SectionRef> sections() const;

  // Bytes of a 16b dense-weight image of this model, the per-inference
  // traffic of the uncompressed baseline.
  uint64_t dense_weight_bytes() const;
};

ModelSpec load_model_spec(const std::filesystem::path& path);
void save_model_spec(const std::filesystem::path& path, const ModelSpec& spec);

}  // namespace fta
