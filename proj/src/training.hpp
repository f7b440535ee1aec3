#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace bf {

// Distillation configuration. By default only teacher-matching terms are
// optimized: force outputs, the first final-MLP layer, and the node/edge
// features of the deepest retained block.
struct KDConfig {
  double lambda = 1.0;
  bool distill_output = true;     // student forces -> teacher forces
  bool distill_energy = false;    // optional, off by default
  int mlp_layers = 1;             // n' in [0, m]
  bool distill_n2n = true;
  bool distill_e2e = true;
  bool match_all_blocks = false;  // false: deepest retained block only
  bool include_ground_truth_loss = false;
  double data_fraction = 0.015;

  void validate(const ModelConfig& student) const;
  bool any_term() const {
    return distill_output || distill_energy || mlp_layers > 0 || distill_n2n || distill_e2e;
  }
};

struct TrainBudget {
  enum class Mode { Steps, WallClock };
  Mode mode = Mode::Steps;
  int64_t steps = 1000;
  double seconds = 0.0;  // WallClock mode
  int batch_size = 8;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  int64_t eval_interval = 0;  // 0: pick automatically

  void validate() const;
};

struct EvalMetrics {
  double force_mae = 0.0;
  double energy_mae_per_atom = 0.0;
  int64_t sample_count = 0;
};

struct LogRow {
  int64_t step = 0;
  double loss_total = 0.0;
  double loss_energy = 0.0;
  double loss_force = 0.0;
  double loss_kd = 0.0;
  bool has_val = false;
  double val_force_mae = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogRow> log;
  EvalMetrics test_metrics;  // populated by finetune
};

// Number of distinct samples a data fraction selects from a dataset.
int64_t kd_subset_size(int64_t dataset_size, double fraction);

// Seeded sample-without-replacement from the train split, returned ascending
// so a fraction of 1.0 reproduces the plain training order.
std::vector<int64_t> kd_subset_indices(int64_t dataset_size, double fraction, uint64_t seed);

// Sum of the enabled L1 terms between matched teacher/student quantities,
// each mean-reduced over its elements. Zero when student and teacher agree.
double kd_loss(const Prediction& teacher, const Prediction& student, const KDConfig& kd);

// Fresh model trained on the train split under the Eq-style energy/force
// loss. A zero-step budget returns the seeded initialization.
TrainResult pretrain(const ModelConfig& config, const Dataset& dataset,
                     const TrainBudget& budget, const LossWeights& weights);

// Optimizes [L0 +] lambda * L_KD on a data_fraction subsample of the dataset
// with the teacher frozen. The student must share the teacher's widths.
TrainResult distill(const Checkpoint& teacher, const Checkpoint& student, const Dataset& dataset,
                    const KDConfig& kd, const TrainBudget& budget,
                    const LossWeights& weights = {});

// Full-model fine-tuning; returns test-split metrics alongside the
// checkpoint. head_reset re-initializes the prediction heads first.
TrainResult finetune(const Checkpoint& checkpoint, const Dataset& dataset,
                     const TrainBudget& budget, const LossWeights& weights,
                     bool head_reset = false);

EvalMetrics evaluate(const Checkpoint& checkpoint, const Dataset& dataset,
                     std::string_view split);

// CSV `step,loss_total,loss_energy,loss_force,loss_kd,val_force_mae`; the
// validation column is filled at eval intervals only.
void write_train_log(const std::vector<LogRow>& log, const std::string& path);
// CSV `split,force_mae,energy_mae_per_atom,n_samples`.
void write_metrics_csv(const EvalMetrics& metrics, std::string_view split,
                       const std::string& path);

}  // namespace bf
