#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"
#include "training.hpp"

namespace bf {

// Closed-form forward-pass FLOP count for a reference graph size. Affine maps
// count 2*rows*cols per batch row plus the bias add; activations, residual
// adds, message aggregation and the force assembly count one operation per
// element; gathers, concatenations and the embedding lookup move data and
// count zero. Geometry featurization (distances, radial basis) is excluded.
// The value equals the instrumented operation tally of one forward pass.
double flops_estimate(const ModelConfig& config, int64_t n, int64_t n_e);

// Operation tally of an actual forward pass on one sample (no loss).
double instrumented_forward_flops(const Checkpoint& checkpoint, const MolecularSample& sample);

struct BenchResult {
  double median_samples_per_s = 0.0;
  double min_samples_per_s = 0.0;
  double max_samples_per_s = 0.0;
  int64_t samples_per_pass = 0;
};

// Median over timed forward passes of samples/second after warmup. Edge lists
// are precomputed; workers partition samples and per-pass time is
// start-to-all-join. No background work may run during timed passes.
BenchResult throughput_bench(const Checkpoint& checkpoint, const Dataset& dataset,
                             int warmup_passes, int timed_passes, int workers = 1);

struct EfficiencyReport {
  int interaction_blocks = 0;
  double throughput = 0.0;
  double throughput_delta = 0.0;  // vs the full model
  double flops = 0.0;
  double flops_delta = 0.0;
  int64_t params = 0;
  double params_pct_delta = 0.0;
};

struct SweepConfig {
  int64_t finetune_steps = 500;
  int64_t kd_steps = 800;
  int batch_size = 4;
  double finetune_lr = 3e-4;
  double distill_lr = 3e-4;
  double figure4_seconds = 6.0;
  std::vector<int> figure4_blocks = {3, 4, 6};
  int bench_warmup = 1;
  int bench_passes = 5;
  uint64_t seed = 0;
  LossWeights weights{};
  KDConfig kd{};
};

// Runs the block-count x strategy grid against a trained teacher and emits
// table1.csv (upstream force MAE), figure3.csv (downstream force MAE after
// equal-budget fine-tuning), table2.csv (throughput/FLOPs/parameters) and
// figure4.csv (validation MAE against wall clock). Block counts in all CSVs
// exclude the embedding block.
void sweep_report(const Checkpoint& teacher, const Dataset& upstream, const Dataset& downstream,
                  const std::string& out_dir, const SweepConfig& config);

}  // namespace bf
