#include "blockforge/blockforge.h"

#include <cstring>
#include <string>

#include "data.hpp"
#include "efficiency.hpp"
#include "error.hpp"
#include "model.hpp"
#include "relevance.hpp"
#include "surgery.hpp"
#include "training.hpp"

struct bf_dataset {
  bf::Dataset impl;
};

struct bf_checkpoint {
  bf::Checkpoint impl;
};

namespace {

thread_local std::string g_last_error;

bf_status fail(bf_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

bf_status from_kind(bf::Error::Kind kind) {
  switch (kind) {
    case bf::Error::Kind::InvalidArgument: return BF_ERR_INVALID_ARG;
    case bf::Error::Kind::Io: return BF_ERR_IO;
    case bf::Error::Kind::Format: return BF_ERR_FORMAT;
    case bf::Error::Kind::Numeric: return BF_ERR_NUMERIC;
    case bf::Error::Kind::Internal: return BF_ERR_INTERNAL;
  }
  return BF_ERR_INTERNAL;
}

template <typename Fn>
bf_status guarded(Fn&& fn) {
  try {
    fn();
    return BF_OK;
  } catch (const bf::Error& e) {
    return fail(from_kind(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(BF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BF_ERR_INTERNAL, "unknown error");
  }
}

bf_status check_ptr(const void* p, const char* name) {
  if (p != nullptr) return BF_OK;
  return fail(BF_ERR_INVALID_ARG, std::string(name) + " must not be null");
}

#define BF_REQUIRE_PTR(p)                                  \
  do {                                                     \
    if (check_ptr((p), #p) != BF_OK) return BF_ERR_INVALID_ARG; \
  } while (0)

bf::GenSpec to_spec(const bf_gen_config& c) {
  bf::GenSpec s;
  s.count = c.count;
  s.min_atoms = static_cast<int>(c.min_atoms);
  s.max_atoms = static_cast<int>(c.max_atoms);
  s.species_count = static_cast<int>(c.species_count);
  s.box_size = c.box_size;
  s.seed = c.seed;
  s.relax_steps = static_cast<int>(c.relax_steps);
  s.relax_step_size = c.relax_step_size;
  s.epsilon_scale = c.epsilon_scale;
  s.sigma_scale = c.sigma_scale;
  s.table_seed = c.table_seed;
  return s;
}

bf::ModelConfig to_config(const bf_model_config& c) {
  bf::ModelConfig m;
  m.blocks = c.blocks;
  m.mlp_layers = c.mlp_layers;
  m.node_width = c.node_width;
  m.edge_width = c.edge_width;
  m.rbf_count = c.rbf_count;
  m.cutoff = c.cutoff;
  m.species_count = c.species_count;
  m.seed = c.seed;
  return m;
}

bf::TrainBudget to_budget(const bf_train_budget& b) {
  bf::TrainBudget t;
  t.mode = b.wall_clock ? bf::TrainBudget::Mode::WallClock : bf::TrainBudget::Mode::Steps;
  t.steps = b.steps;
  t.seconds = b.seconds;
  t.batch_size = b.batch_size;
  t.learning_rate = b.learning_rate;
  t.seed = b.seed;
  t.eval_interval = b.eval_interval;
  return t;
}

bf::LossWeights to_weights(const bf_loss_weights& w) {
  return bf::LossWeights{w.energy_weight, w.force_weight};
}

bf::KDConfig to_kd(const bf_kd_config& k) {
  bf::KDConfig c;
  c.lambda = k.lambda;
  c.distill_output = k.distill_output != 0;
  c.distill_energy = k.distill_energy != 0;
  c.mlp_layers = k.mlp_layers;
  c.distill_n2n = k.distill_n2n != 0;
  c.distill_e2e = k.distill_e2e != 0;
  c.match_all_blocks = k.match_all_blocks != 0;
  c.include_ground_truth_loss = k.include_ground_truth_loss != 0;
  c.data_fraction = k.data_fraction;
  return c;
}

void fill_metrics(bf_eval_metrics* out, const bf::EvalMetrics& m) {
  out->force_mae = m.force_mae;
  out->energy_mae_per_atom = m.energy_mae_per_atom;
  out->sample_count = m.sample_count;
}

bf::MlpRepair to_repair(int32_t strategy) {
  if (strategy == 0) return bf::MlpRepair::Sliced;
  if (strategy == 1) return bf::MlpRepair::Random;
  throw bf::Error(bf::Error::Kind::InvalidArgument, "strategy must be 0 (sliced) or 1 (random)");
}

}  // namespace

extern "C" {

const char* bf_status_name(bf_status status) {
  switch (status) {
    case BF_OK: return "ok";
    case BF_ERR_INVALID_ARG: return "invalid_argument";
    case BF_ERR_IO: return "io_error";
    case BF_ERR_FORMAT: return "format_error";
    case BF_ERR_NUMERIC: return "numeric_error";
    case BF_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* bf_last_error(void) { return g_last_error.c_str(); }

const char* bf_version(void) { return "0.1.0"; }

void bf_gen_config_default(bf_gen_config* config) {
  if (config == nullptr) return;
  bf::GenSpec s;
  config->count = s.count;
  config->min_atoms = static_cast<uint32_t>(s.min_atoms);
  config->max_atoms = static_cast<uint32_t>(s.max_atoms);
  config->species_count = static_cast<uint32_t>(s.species_count);
  config->box_size = s.box_size;
  config->seed = s.seed;
  config->relax_steps = static_cast<uint32_t>(s.relax_steps);
  config->relax_step_size = s.relax_step_size;
  config->epsilon_scale = s.epsilon_scale;
  config->sigma_scale = s.sigma_scale;
  config->table_seed = s.table_seed;
}

bf_status bf_dataset_generate(const bf_gen_config* config, bf_dataset** out) {
  BF_REQUIRE_PTR(config);
  BF_REQUIRE_PTR(out);
  return guarded([&] { *out = new bf_dataset{bf::generate_dataset(to_spec(*config))}; });
}

bf_status bf_dataset_read(const char* path, bf_dataset** out) {
  BF_REQUIRE_PTR(path);
  BF_REQUIRE_PTR(out);
  return guarded([&] { *out = new bf_dataset{bf::read_dataset(path)}; });
}

bf_status bf_dataset_write(const bf_dataset* dataset, const char* path) {
  BF_REQUIRE_PTR(dataset);
  BF_REQUIRE_PTR(path);
  return guarded([&] { bf::write_dataset(dataset->impl, path); });
}

int64_t bf_dataset_size(const bf_dataset* dataset) {
  return dataset == nullptr ? 0 : dataset->impl.size();
}

void bf_dataset_free(bf_dataset* dataset) { delete dataset; }

void bf_model_config_default(bf_model_config* config) {
  if (config == nullptr) return;
  bf::ModelConfig m;
  config->blocks = m.blocks;
  config->mlp_layers = m.mlp_layers;
  config->node_width = m.node_width;
  config->edge_width = m.edge_width;
  config->rbf_count = m.rbf_count;
  config->cutoff = m.cutoff;
  config->species_count = m.species_count;
  config->seed = m.seed;
}

bf_status bf_checkpoint_init(const bf_model_config* config, bf_checkpoint** out) {
  BF_REQUIRE_PTR(config);
  BF_REQUIRE_PTR(out);
  return guarded([&] { *out = new bf_checkpoint{bf::init_checkpoint(to_config(*config))}; });
}

bf_status bf_checkpoint_load(const char* path, bf_checkpoint** out) {
  BF_REQUIRE_PTR(path);
  BF_REQUIRE_PTR(out);
  return guarded([&] { *out = new bf_checkpoint{bf::load_checkpoint(path)}; });
}

bf_status bf_checkpoint_save(const bf_checkpoint* checkpoint, const char* path) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(path);
  return guarded([&] { bf::save_checkpoint(checkpoint->impl, path); });
}

bf_status bf_checkpoint_get_config(const bf_checkpoint* checkpoint, bf_model_config* out) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(out);
  const bf::ModelConfig& c = checkpoint->impl.config;
  out->blocks = c.blocks;
  out->mlp_layers = c.mlp_layers;
  out->node_width = c.node_width;
  out->edge_width = c.edge_width;
  out->rbf_count = c.rbf_count;
  out->cutoff = c.cutoff;
  out->species_count = c.species_count;
  out->seed = c.seed;
  return BF_OK;
}

int64_t bf_checkpoint_param_count(const bf_checkpoint* checkpoint) {
  return checkpoint == nullptr ? 0 : checkpoint->impl.param_total();
}

void bf_checkpoint_free(bf_checkpoint* checkpoint) { delete checkpoint; }

void bf_loss_weights_default(bf_loss_weights* weights) {
  if (weights == nullptr) return;
  bf::LossWeights w;
  weights->energy_weight = w.energy_weight;
  weights->force_weight = w.force_weight;
}

void bf_train_budget_default(bf_train_budget* budget) {
  if (budget == nullptr) return;
  bf::TrainBudget b;
  budget->wall_clock = 0;
  budget->steps = b.steps;
  budget->seconds = b.seconds;
  budget->batch_size = b.batch_size;
  budget->learning_rate = b.learning_rate;
  budget->seed = b.seed;
  budget->eval_interval = b.eval_interval;
}

void bf_kd_config_default(bf_kd_config* config) {
  if (config == nullptr) return;
  bf::KDConfig k;
  config->lambda = k.lambda;
  config->distill_output = k.distill_output ? 1 : 0;
  config->distill_energy = k.distill_energy ? 1 : 0;
  config->mlp_layers = k.mlp_layers;
  config->distill_n2n = k.distill_n2n ? 1 : 0;
  config->distill_e2e = k.distill_e2e ? 1 : 0;
  config->match_all_blocks = k.match_all_blocks ? 1 : 0;
  config->include_ground_truth_loss = k.include_ground_truth_loss ? 1 : 0;
  config->data_fraction = k.data_fraction;
}

bf_status bf_pretrain(const bf_model_config* config, const bf_dataset* dataset,
                      const bf_train_budget* budget, const bf_loss_weights* weights,
                      const char* log_path, bf_checkpoint** out) {
  BF_REQUIRE_PTR(config);
  BF_REQUIRE_PTR(dataset);
  BF_REQUIRE_PTR(budget);
  BF_REQUIRE_PTR(weights);
  BF_REQUIRE_PTR(out);
  return guarded([&] {
    bf::TrainResult result = bf::pretrain(to_config(*config), dataset->impl, to_budget(*budget),
                                          to_weights(*weights));
    if (log_path != nullptr) bf::write_train_log(result.log, log_path);
    *out = new bf_checkpoint{std::move(result.checkpoint)};
  });
}

bf_status bf_distill(const bf_checkpoint* teacher, const bf_checkpoint* student,
                     const bf_dataset* dataset, const bf_kd_config* kd,
                     const bf_train_budget* budget, const bf_loss_weights* weights,
                     const char* log_path, bf_checkpoint** out) {
  BF_REQUIRE_PTR(teacher);
  BF_REQUIRE_PTR(student);
  BF_REQUIRE_PTR(dataset);
  BF_REQUIRE_PTR(kd);
  BF_REQUIRE_PTR(budget);
  BF_REQUIRE_PTR(weights);
  BF_REQUIRE_PTR(out);
  return guarded([&] {
    bf::TrainResult result = bf::distill(teacher->impl, student->impl, dataset->impl, to_kd(*kd),
                                         to_budget(*budget), to_weights(*weights));
    if (log_path != nullptr) bf::write_train_log(result.log, log_path);
    *out = new bf_checkpoint{std::move(result.checkpoint)};
  });
}

bf_status bf_finetune(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                      const bf_train_budget* budget, const bf_loss_weights* weights,
                      int32_t reset_heads, const char* log_path, bf_checkpoint** out,
                      bf_eval_metrics* test_metrics) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(dataset);
  BF_REQUIRE_PTR(budget);
  BF_REQUIRE_PTR(weights);
  BF_REQUIRE_PTR(out);
  return guarded([&] {
    bf::TrainResult result = bf::finetune(checkpoint->impl, dataset->impl, to_budget(*budget),
                                          to_weights(*weights), reset_heads != 0);
    if (log_path != nullptr) bf::write_train_log(result.log, log_path);
    if (test_metrics != nullptr) fill_metrics(test_metrics, result.test_metrics);
    *out = new bf_checkpoint{std::move(result.checkpoint)};
  });
}

bf_status bf_evaluate(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                      const char* split, bf_eval_metrics* out) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(dataset);
  BF_REQUIRE_PTR(split);
  BF_REQUIRE_PTR(out);
  return guarded([&] {
    fill_metrics(out, bf::evaluate(checkpoint->impl, dataset->impl, split));
  });
}

bf_status bf_block_relevance(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                             int64_t max_samples, const bf_loss_weights* weights,
                             const char* csv_path, double* scores, int64_t scores_capacity,
                             int64_t* scores_written) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(dataset);
  BF_REQUIRE_PTR(weights);
  return guarded([&] {
    bf::BlockRelevance rel = bf::block_relevance(checkpoint->impl, dataset->impl,
                                                 to_weights(*weights), max_samples);
    if (csv_path != nullptr) bf::relevance_report(rel, csv_path);
    if (scores != nullptr) {
      bf::require(scores_capacity >= static_cast<int64_t>(rel.scores.size()),
                  bf::Error::Kind::InvalidArgument, "scores buffer too small");
      for (size_t i = 0; i < rel.scores.size(); ++i) scores[i] = rel.scores[i];
    }
    if (scores_written != nullptr)
      *scores_written = static_cast<int64_t>(rel.scores.size());
  });
}

bf_status bf_reduce_blocks(const bf_checkpoint* checkpoint, int32_t b_prime, int32_t strategy,
                           uint64_t seed, bf_checkpoint** out) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(out);
  return guarded([&] {
    *out = new bf_checkpoint{
        bf::reduce_blocks(checkpoint->impl, b_prime, to_repair(strategy), seed)};
  });
}

bf_status bf_ablate_block(const bf_checkpoint* checkpoint, int32_t block_index, int32_t strategy,
                          uint64_t seed, bf_checkpoint** out) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(out);
  return guarded([&] {
    *out = new bf_checkpoint{
        bf::ablate_block(checkpoint->impl, block_index, to_repair(strategy), seed)};
  });
}

bf_status bf_flops_estimate(const bf_model_config* config, int64_t n, int64_t n_e, double* out) {
  BF_REQUIRE_PTR(config);
  BF_REQUIRE_PTR(out);
  return guarded([&] { *out = bf::flops_estimate(to_config(*config), n, n_e); });
}

bf_status bf_throughput_bench(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                              int32_t warmup_passes, int32_t timed_passes, int32_t workers,
                              double* median, double* min_rate, double* max_rate) {
  BF_REQUIRE_PTR(checkpoint);
  BF_REQUIRE_PTR(dataset);
  BF_REQUIRE_PTR(median);
  return guarded([&] {
    bf::BenchResult r = bf::throughput_bench(checkpoint->impl, dataset->impl, warmup_passes,
                                             timed_passes, workers);
    *median = r.median_samples_per_s;
    if (min_rate != nullptr) *min_rate = r.min_samples_per_s;
    if (max_rate != nullptr) *max_rate = r.max_samples_per_s;
  });
}

void bf_sweep_config_default(bf_sweep_config* config) {
  if (config == nullptr) return;
  bf::SweepConfig s;
  config->finetune_steps = s.finetune_steps;
  config->kd_steps = s.kd_steps;
  config->batch_size = s.batch_size;
  config->finetune_lr = s.finetune_lr;
  config->distill_lr = s.distill_lr;
  config->figure4_seconds = s.figure4_seconds;
  config->bench_warmup = s.bench_warmup;
  config->bench_passes = s.bench_passes;
  config->seed = s.seed;
}

bf_status bf_sweep(const bf_checkpoint* teacher, const bf_dataset* upstream,
                   const bf_dataset* downstream, const char* out_dir,
                   const bf_sweep_config* config) {
  BF_REQUIRE_PTR(teacher);
  BF_REQUIRE_PTR(upstream);
  BF_REQUIRE_PTR(downstream);
  BF_REQUIRE_PTR(out_dir);
  BF_REQUIRE_PTR(config);
  return guarded([&] {
    bf::SweepConfig s;
    s.finetune_steps = config->finetune_steps;
    s.kd_steps = config->kd_steps;
    s.batch_size = config->batch_size;
    s.finetune_lr = config->finetune_lr;
    s.distill_lr = config->distill_lr;
    s.figure4_seconds = config->figure4_seconds;
    s.bench_warmup = config->bench_warmup;
    s.bench_passes = config->bench_passes;
    s.seed = config->seed;
    const int full_interaction = static_cast<int>(teacher->impl.config.blocks) - 1;
    s.figure4_blocks.clear();
    for (int k : {3, 4})
      if (k < full_interaction) s.figure4_blocks.push_back(k);
    s.figure4_blocks.push_back(full_interaction);
    bf::sweep_report(teacher->impl, upstream->impl, downstream->impl, out_dir, s);
  });
}

}  // extern "C"
