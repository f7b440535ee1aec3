/* blockforge public C API.
 *
 * A miniature block-structured message-passing potential with tools for
 * GradCAM block relevance, trailing-block pruning with first-MLP-layer
 * repair, knowledge distillation and efficiency accounting.
 *
 * All functions return bf_status; on failure bf_last_error() describes what
 * went wrong (thread-local). Handles are opaque and freed with their
 * matching *_free function. Handles must not be shared across threads while
 * a mutating call is in flight; concurrent reads are fine.
 */
#ifndef BLOCKFORGE_H
#define BLOCKFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bf_status {
  BF_OK = 0,
  BF_ERR_INVALID_ARG = 1,
  BF_ERR_IO = 2,
  BF_ERR_FORMAT = 3,
  BF_ERR_NUMERIC = 4,
  BF_ERR_INTERNAL = 5,
} bf_status;

const char* bf_status_name(bf_status status);
/* Message for the most recent failing call on this thread. */
const char* bf_last_error(void);
const char* bf_version(void);

typedef struct bf_dataset bf_dataset;
typedef struct bf_checkpoint bf_checkpoint;

/* --- datasets ------------------------------------------------------------ */

typedef struct bf_gen_config {
  uint64_t count;
  uint32_t min_atoms;
  uint32_t max_atoms;
  uint32_t species_count;
  double box_size;
  uint64_t seed;
  uint32_t relax_steps;
  double relax_step_size;
  double epsilon_scale; /* downstream-task shift: 1.5 */
  double sigma_scale;   /* downstream-task shift: 1.1 */
  uint64_t table_seed;  /* pair-parameter table; keep fixed across variants */
} bf_gen_config;

void bf_gen_config_default(bf_gen_config* config);

bf_status bf_dataset_generate(const bf_gen_config* config, bf_dataset** out);
bf_status bf_dataset_read(const char* path, bf_dataset** out);
bf_status bf_dataset_write(const bf_dataset* dataset, const char* path);
int64_t bf_dataset_size(const bf_dataset* dataset);
void bf_dataset_free(bf_dataset* dataset);

/* --- checkpoints ----------------------------------------------------------*/

typedef struct bf_model_config {
  uint32_t blocks;     /* embedding block included */
  uint32_t mlp_layers;
  uint32_t node_width;
  uint32_t edge_width;
  uint32_t rbf_count;
  double cutoff;
  uint32_t species_count;
  uint32_t seed;
} bf_model_config;

void bf_model_config_default(bf_model_config* config);

bf_status bf_checkpoint_init(const bf_model_config* config, bf_checkpoint** out);
bf_status bf_checkpoint_load(const char* path, bf_checkpoint** out);
bf_status bf_checkpoint_save(const bf_checkpoint* checkpoint, const char* path);
bf_status bf_checkpoint_get_config(const bf_checkpoint* checkpoint, bf_model_config* out);
int64_t bf_checkpoint_param_count(const bf_checkpoint* checkpoint);
void bf_checkpoint_free(bf_checkpoint* checkpoint);

/* --- training -------------------------------------------------------------*/

typedef struct bf_loss_weights {
  double energy_weight;
  double force_weight;
} bf_loss_weights;

void bf_loss_weights_default(bf_loss_weights* weights);

typedef struct bf_train_budget {
  int32_t wall_clock;   /* 0: step budget, 1: wall-clock budget */
  int64_t steps;
  double seconds;
  int32_t batch_size;
  double learning_rate;
  uint64_t seed;
  int64_t eval_interval; /* 0: automatic */
} bf_train_budget;

void bf_train_budget_default(bf_train_budget* budget);

typedef struct bf_kd_config {
  double lambda;
  int32_t distill_output;
  int32_t distill_energy;
  int32_t mlp_layers; /* n' */
  int32_t distill_n2n;
  int32_t distill_e2e;
  int32_t match_all_blocks;
  int32_t include_ground_truth_loss;
  double data_fraction;
} bf_kd_config;

void bf_kd_config_default(bf_kd_config* config);

typedef struct bf_eval_metrics {
  double force_mae;
  double energy_mae_per_atom;
  int64_t sample_count;
} bf_eval_metrics;

/* log_path may be NULL to skip writing the per-step CSV log. */
bf_status bf_pretrain(const bf_model_config* config, const bf_dataset* dataset,
                      const bf_train_budget* budget, const bf_loss_weights* weights,
                      const char* log_path, bf_checkpoint** out);

bf_status bf_distill(const bf_checkpoint* teacher, const bf_checkpoint* student,
                     const bf_dataset* dataset, const bf_kd_config* kd,
                     const bf_train_budget* budget, const bf_loss_weights* weights,
                     const char* log_path, bf_checkpoint** out);

bf_status bf_finetune(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                      const bf_train_budget* budget, const bf_loss_weights* weights,
                      int32_t reset_heads, const char* log_path, bf_checkpoint** out,
                      bf_eval_metrics* test_metrics);

/* split: "train", "val", "test" or "all". */
bf_status bf_evaluate(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                      const char* split, bf_eval_metrics* out);

/* --- relevance and surgery --------------------------------------------------*/

/* scores_capacity must be >= the block count; *scores_written reports how
 * many entries were filled. csv_path may be NULL. */
bf_status bf_block_relevance(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                             int64_t max_samples, const bf_loss_weights* weights,
                             const char* csv_path, double* scores,
                             int64_t scores_capacity, int64_t* scores_written);

/* strategy: 0 sliced, 1 random. b_prime counts the embedding block. */
bf_status bf_reduce_blocks(const bf_checkpoint* checkpoint, int32_t b_prime, int32_t strategy,
                           uint64_t seed, bf_checkpoint** out);

/* block_index in [1, blocks-1]; the embedding block is not removable. */
bf_status bf_ablate_block(const bf_checkpoint* checkpoint, int32_t block_index, int32_t strategy,
                          uint64_t seed, bf_checkpoint** out);

/* --- efficiency -------------------------------------------------------------*/

bf_status bf_flops_estimate(const bf_model_config* config, int64_t n, int64_t n_e, double* out);

bf_status bf_throughput_bench(const bf_checkpoint* checkpoint, const bf_dataset* dataset,
                              int32_t warmup_passes, int32_t timed_passes, int32_t workers,
                              double* median, double* min_rate, double* max_rate);

typedef struct bf_sweep_config {
  int64_t finetune_steps;
  int64_t kd_steps;
  int32_t batch_size;
  double finetune_lr;
  double distill_lr;
  double figure4_seconds;
  int32_t bench_warmup;
  int32_t bench_passes;
  uint64_t seed;
} bf_sweep_config;

void bf_sweep_config_default(bf_sweep_config* config);

/* Writes table1.csv, figure3.csv, table2.csv, figure4.csv into out_dir. */
bf_status bf_sweep(const bf_checkpoint* teacher, const bf_dataset* upstream,
                   const bf_dataset* downstream, const char* out_dir,
                   const bf_sweep_config* config);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BLOCKFORGE_H */
