#pragma once

#include <vector>

#include "fta/simulator.hpp"

namespace fta {

// Dynamic batching policy: inputs of 65..128 tokens run alone, 33..64 pair
// up, 32 or fewer group up to four. Groups form greedily in arrival order
// and never mix threshold classes; members pad to the longest member.

// 1, 2 or 4; rejects lengths outside [1, 128].
int batch_class(int length, int max_seq_len = kMaxSeqLen);

// Forms the first group from the pending lengths (arrival order, skipping
// lengths of other classes); `consumed` reports which queue positions joined.
GroupPlan choose_batch(const std::vector<int>& lengths,
                       std::vector<int>* consumed = nullptr);

// Partition all inputs into groups. forced_batch == 0 follows the length
// policy; 1/2/4 overrides it with fixed-size arrival-order groups (an A/B
// study knob; threshold classes are ignored).
std::vector<GroupPlan> plan_batches(const std::vector<int>& lengths, int forced_batch = 0,
                                    int max_seq_len = kMaxSeqLen);

struct ModelRunResult {
  std::vector<IntMatrix> outputs;  // input order
  CycleStats stats;
  std::vector<GroupPlan> plans;
};

// Runs every input through every layer, batching per the policy. The
// dictionary side of the package is charged once for the whole run; sparse
// sections are charged once per layer per batch group.
ModelRunResult run_model(const ModelSpec& model, const CompressedPackage& pkg,
                         const std::vector<IntMatrix>& inputs, const SimConfig& cfg,
                         int forced_batch = 0);

}  // namespace fta
