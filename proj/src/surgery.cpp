#include "surgery.hpp"

#include <algorithm>
#include <cmath>

#include "rng.hpp"

namespace bf {

MlpRepair parse_repair(const std::string& name) {
  if (name == "sliced") return MlpRepair::Sliced;
  if (name == "random") return MlpRepair::Random;
  throw Error(Error::Kind::InvalidArgument, "unknown strategy '" + name + "' (sliced|random)");
}

const char* repair_name(MlpRepair repair) {
  return repair == MlpRepair::Sliced ? "sliced" : "random";
}

void ReductionPlan::validate(int original_blocks) const {
  require(!kept_blocks.empty() && kept_blocks.front() == 0, Error::Kind::InvalidArgument,
          "embedding block (index 0) must be retained");
  require(std::is_sorted(kept_blocks.begin(), kept_blocks.end()) &&
              std::adjacent_find(kept_blocks.begin(), kept_blocks.end()) == kept_blocks.end(),
          Error::Kind::InvalidArgument, "kept_blocks must be strictly ascending");
  require(kept_blocks.back() < original_blocks, Error::Kind::InvalidArgument,
          "kept block index out of range");
  require(b_prime == static_cast<int>(kept_blocks.size()), Error::Kind::InvalidArgument,
          "b_prime must equal the number of kept blocks");
  require(b_prime >= 2, Error::Kind::InvalidArgument,
          "b_prime must be >= 2 (embedding plus at least one interaction block)");
  require(b_prime < original_blocks, Error::Kind::InvalidArgument,
          "a reduction must remove at least one block");
}

ReductionPlan trailing_reduction_plan(int blocks, int b_prime, MlpRepair strategy) {
  require(b_prime < blocks, Error::Kind::InvalidArgument,
          "b_prime must be smaller than the current block count");
  require(b_prime >= 2, Error::Kind::InvalidArgument, "b_prime must be >= 2");
  ReductionPlan plan;
  plan.strategy = strategy;
  plan.b_prime = b_prime;
  for (int i = 0; i < b_prime; ++i) plan.kept_blocks.push_back(i);
  return plan;
}

ReductionPlan ablation_plan(int blocks, int block_index, MlpRepair strategy) {
  require(block_index != 0, Error::Kind::InvalidArgument, "embedding block is not removable");
  require(block_index >= 1 && block_index < blocks, Error::Kind::InvalidArgument,
          "block_index must be in [1, blocks-1]");
  ReductionPlan plan;
  plan.strategy = strategy;
  plan.b_prime = blocks - 1;
  for (int i = 0; i < blocks; ++i)
    if (i != block_index) plan.kept_blocks.push_back(i);
  return plan;
}

Checkpoint apply_reduction(const Checkpoint& in, const ReductionPlan& plan, uint64_t seed) {
  const ModelConfig& c = in.config;
  plan.validate(static_cast<int>(c.blocks));

  ModelConfig reduced = c;
  reduced.blocks = static_cast<uint32_t>(plan.b_prime);

  Checkpoint out;
  out.config = reduced;
  const int64_t d = c.node_width;

  for (const auto& [name, shape] : checkpoint_manifest(reduced)) {
    if (name == "final_mlp.layer1.w") {
      if (plan.strategy == MlpRepair::Random) {
        Rng rng(seed);
        Tensor w(shape);
        const double a = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
        for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
        out.tensors.emplace_back(name, std::move(w));
      } else {
        const Tensor& full = in.find(name);
        Tensor w(shape);
        int64_t dst_row = 0;
        for (int kept : plan.kept_blocks) {
          for (int64_t r = 0; r < d; ++r, ++dst_row)
            for (int64_t col = 0; col < d; ++col)
              w.at(dst_row, col) = full.at(kept * d + r, col);
        }
        out.tensors.emplace_back(name, std::move(w));
      }
      continue;
    }
    if (name == "final_mlp.layer1.b") {
      // The bias does not depend on the input width; Random re-initializes it
      // to the init convention (zero), Sliced keeps it.
      if (plan.strategy == MlpRepair::Random)
        out.tensors.emplace_back(name, Tensor(shape));
      else
        out.tensors.emplace_back(name, in.find(name));
      continue;
    }
    if (name.rfind("block", 0) == 0) {
      const size_t dot = name.find('.');
      const int new_index = std::stoi(name.substr(5, dot - 5));
      const int src_index = plan.kept_blocks[static_cast<size_t>(new_index)];
      const std::string src_name = "block" + std::to_string(src_index) + name.substr(dot);
      out.tensors.emplace_back(name, in.find(src_name));
      continue;
    }
    out.tensors.emplace_back(name, in.find(name));
  }
  return out;
}

Checkpoint reduce_blocks(const Checkpoint& ckpt, int b_prime, MlpRepair strategy, uint64_t seed) {
  return apply_reduction(ckpt, trailing_reduction_plan(static_cast<int>(ckpt.config.blocks),
                                                       b_prime, strategy),
                         seed);
}

Checkpoint ablate_block(const Checkpoint& ckpt, int block_index, MlpRepair strategy,
                        uint64_t seed) {
  return apply_reduction(ckpt, ablation_plan(static_cast<int>(ckpt.config.blocks), block_index,
                                             strategy),
                         seed);
}

int64_t ParamCounts::group(const std::string& name) const {
  for (const auto& [n, v] : groups)
    if (n == name) return v;
  throw Error(Error::Kind::InvalidArgument, "no parameter group named " + name);
}

ParamCounts param_count(const ModelConfig& config) {
  ParamCounts out;
  auto bump = [&out](const std::string& group, int64_t count) {
    for (auto& [n, v] : out.groups) {
      if (n == group) {
        v += count;
        return;
      }
    }
    out.groups.emplace_back(group, count);
  };
  for (const auto& [name, shape] : checkpoint_manifest(config)) {
    std::string group;
    if (name.rfind("block", 0) == 0)
      group = name.substr(0, name.find('.'));
    else if (name.rfind("final_mlp.layer", 0) == 0)
      group = name.substr(0, name.find('.', 10));
    else if (name.rfind("head.", 0) == 0)
      group = "heads";
    else
      group = "embedding";
    const int64_t count = shape_size(shape);
    bump(group, count);
    out.total += count;
  }
  return out;
}

ParamCounts param_count(const Checkpoint& checkpoint) {
  ParamCounts counts = param_count(checkpoint.config);
  require(counts.total == checkpoint.param_total(), Error::Kind::Internal,
          "checkpoint does not match its manifest");
  return counts;
}

}  // namespace bf
