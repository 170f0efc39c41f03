#include "fta/scheduler.hpp"

#include <algorithm>

namespace fta {

int batch_class(int length, int max_seq_len) {
  require(length >= 1 && length <= max_seq_len,
          "batch: input length must be in [1, " + std::to_string(max_seq_len) + "]");
  if (length > max_seq_len / 2) return 1;
  if (length > max_seq_len / 4) return 2;
  return 4;
}

namespace {

GroupPlan make_plan(const std::vector<int>& lengths, const std::vector<int>& picked,
                    int batch_size) {
  GroupPlan plan;
  plan.batch_size = batch_size;
  int padded = 0;
  for (int idx : picked) {
    plan.members.push_back({idx, lengths[static_cast<size_t>(idx)]});
    padded = std::max(padded, lengths[static_cast<size_t>(idx)]);
  }
  plan.padded_length = padded;
  return plan;
}

}  // namespace

GroupPlan choose_batch(const std::vector<int>& lengths, std::vector<int>* consumed) {
  require(!lengths.empty(), "choose_batch: no pending inputs");
  const int cls = batch_class(lengths[0]);
  std::vector<int> picked{0};
  for (size_t i = 1; i < lengths.size() && static_cast<int>(picked.size()) < cls; ++i) {
    if (batch_class(lengths[static_cast<size_t>(i)]) == cls) {
      picked.push_back(static_cast<int>(i));
    }
  }
  if (consumed != nullptr) *consumed = picked;
  // a member that found no partner runs alone on the whole machine
  const int batch_size = static_cast<int>(picked.size()) <= 1   ? 1
                         : static_cast<int>(picked.size()) == 2 ? 2
                                                                : 4;
  return make_plan(lengths, picked, batch_size);
}

std::vector<GroupPlan> plan_batches(const std::vector<int>& lengths, int forced_batch,
                                    int max_seq_len) {
  require(forced_batch == 0 || forced_batch == 1 || forced_batch == 2 || forced_batch == 4,
          "forced batch must be 0, 1, 2 or 4");
  for (int len : lengths) batch_class(len, max_seq_len);

  std::vector<GroupPlan> plans;
  if (forced_batch != 0) {
    std::vector<int> picked;
    for (size_t i = 0; i < lengths.size(); ++i) {
      picked.push_back(static_cast<int>(i));
      if (static_cast<int>(picked.size()) == forced_batch || i + 1 == lengths.size()) {
        plans.push_back(make_plan(lengths, picked, forced_batch));
        picked.clear();
      }
    }
    return plans;
  }

  std::vector<char> used(lengths.size(), 0);
  for (size_t i = 0; i < lengths.size(); ++i) {
    if (used[i]) continue;
    const int cls = batch_class(lengths[i]);
    std::vector<int> picked{static_cast<int>(i)};
    for (size_t j = i + 1; j < lengths.size() && static_cast<int>(picked.size()) < cls;
         ++j) {
      if (!used[j] && batch_class(lengths[j]) == cls) {
        picked.push_back(static_cast<int>(j));
      }
    }
    for (int idx : picked) used[static_cast<size_t>(idx)] = 1;
    const int batch_size = static_cast<int>(picked.size()) <= 1   ? 1
                           : static_cast<int>(picked.size()) == 2 ? 2
                                                                  : 4;
    plans.push_back(make_plan(lengths, picked, batch_size));
  }
  return plans;
}

ModelRunResult run_model(const ModelSpec& model, const CompressedPackage& pkg,
                         const std::vector<IntMatrix>& inputs, const SimConfig& cfg,
                         int forced_batch) {
  require(!inputs.empty(), "run_model: no inputs");
  std::vector<int> lengths;
  lengths.reserve(inputs.size());
  for (const IntMatrix& x : inputs) {
    x.validate();
    require(x.cols == model.model_width, "run_model: input width != model width");
    lengths.push_back(x.rows);
  }
  ModelRunResult res;
  res.plans = plan_batches(lengths, forced_batch, model.max_seq_len);
  res.outputs.resize(inputs.size());
  SimMachine machine(model, pkg, cfg);
  machine.start_session();
  for (const GroupPlan& plan : res.plans) {
    std::vector<IntMatrix> outs = machine.run_group(plan, inputs);
    for (size_t mi = 0; mi < plan.members.size(); ++mi) {
      res.outputs[static_cast<size_t>(plan.members[mi].input_index)] = std::move(outs[mi]);
    }
  }
  res.stats = machine.stats();
  return res;
}

}  // namespace fta
