#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "model.hpp"

namespace bf {

// How the first final-MLP layer is repaired after blocks are removed:
// `Sliced` keeps the pre-trained input rows of the retained blocks (bias
// kept), `Random` re-initializes the layer at the reduced width.
enum class MlpRepair { Sliced, Random };

MlpRepair parse_repair(const std::string& name);
const char* repair_name(MlpRepair repair);

struct ReductionPlan {
  MlpRepair strategy = MlpRepair::Sliced;
  std::vector<int> kept_blocks;  // ascending, always contains 0 (embedding)
  int b_prime = 0;               // resulting total block count

  void validate(int original_blocks) const;
};

ReductionPlan trailing_reduction_plan(int blocks, int b_prime, MlpRepair strategy);
ReductionPlan ablation_plan(int blocks, int block_index, MlpRepair strategy);

Checkpoint apply_reduction(const Checkpoint& checkpoint, const ReductionPlan& plan,
                           uint64_t seed);

// Removes the last b - b_prime interaction blocks. 2 <= b_prime < b.
Checkpoint reduce_blocks(const Checkpoint& checkpoint, int b_prime, MlpRepair strategy,
                         uint64_t seed);

// Removes exactly one interaction block (1 <= block_index <= b-1); the
// following blocks consume the previous retained block's output. The
// embedding block is not removable.
Checkpoint ablate_block(const Checkpoint& checkpoint, int block_index, MlpRepair strategy,
                        uint64_t seed);

struct ParamCounts {
  std::vector<std::pair<std::string, int64_t>> groups;
  int64_t total = 0;

  int64_t group(const std::string& name) const;
};

ParamCounts param_count(const ModelConfig& config);
ParamCounts param_count(const Checkpoint& checkpoint);

}  // namespace bf
