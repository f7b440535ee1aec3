// bfc: command-line front end for the blockforge shared library. Every
// subcommand is a thin adapter over the C API; no numerical logic lives here.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "blockforge/blockforge.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct DatasetPtr {
  bf_dataset* p = nullptr;
  ~DatasetPtr() { bf_dataset_free(p); }
};

struct CheckpointPtr {
  bf_checkpoint* p = nullptr;
  ~CheckpointPtr() { bf_checkpoint_free(p); }
};

[[noreturn]] void fail(bf_status status, const std::string& what) {
  std::fprintf(stderr, "bfc: %s failed: %s (%s)\n", what.c_str(), bf_last_error(),
               bf_status_name(status));
  std::exit(kExitRuntime);
}

void check(bf_status status, const std::string& what) {
  if (status != BF_OK) fail(status, what);
}

// Every run echoes its resolved options next to its primary output so the
// exact invocation can be replayed.
void write_manifest(const std::string& subcommand, const std::string& out_path,
                    const json& options) {
  json manifest;
  manifest["subcommand"] = subcommand;
  manifest["options"] = options;
  std::filesystem::path out(out_path);
  std::filesystem::path where;
  if (std::filesystem::is_directory(out))
    where = out / "run_manifest.json";
  else
    where = out_path + ".manifest.json";
  std::ofstream f(where, std::ios::binary);
  if (!f.good()) {
    std::fprintf(stderr, "bfc: cannot write manifest %s\n", where.string().c_str());
    std::exit(kExitRuntime);
  }
  f << manifest.dump(2) << "\n";
}

DatasetPtr load_dataset(const std::string& path) {
  DatasetPtr ds;
  check(bf_dataset_read(path.c_str(), &ds.p), "reading dataset " + path);
  return ds;
}

CheckpointPtr load_checkpoint(const std::string& path) {
  CheckpointPtr ckpt;
  check(bf_checkpoint_load(path.c_str(), &ckpt.p), "loading checkpoint " + path);
  return ckpt;
}

// Shared flag bundles -------------------------------------------------------

struct ModelFlags {
  bf_model_config config;
  uint32_t interaction_blocks = 6;

  void attach(CLI::App* cmd) {
    bf_model_config_default(&config);
    cmd->add_option("--blocks", interaction_blocks,
                    "interaction blocks of the new model (embedding excluded)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mlp-layers", config.mlp_layers, "final MLP depth");
    cmd->add_option("--width", config.node_width, "node feature width");
    cmd->add_option("--edge-width", config.edge_width, "edge feature width");
    cmd->add_option("--rbf", config.rbf_count, "radial basis count");
    cmd->add_option("--cutoff", config.cutoff, "edge cutoff radius");
    cmd->add_option("--species-count", config.species_count, "embedding table rows");
  }

  bf_model_config resolve(uint64_t seed) {
    config.blocks = interaction_blocks + 1;
    config.seed = static_cast<uint32_t>(seed);
    return config;
  }

  json to_json() const {
    return json{{"blocks", interaction_blocks}, {"mlp_layers", config.mlp_layers},
                {"width", config.node_width},   {"edge_width", config.edge_width},
                {"rbf", config.rbf_count},      {"cutoff", config.cutoff},
                {"species_count", config.species_count}};
  }
};

struct BudgetFlags {
  bf_train_budget budget;
  double budget_seconds = 0.0;

  void attach(CLI::App* cmd, double default_lr) {
    bf_train_budget_default(&budget);
    budget.learning_rate = default_lr;
    cmd->add_option("--steps", budget.steps, "optimization steps");
    cmd->add_option("--budget-seconds", budget_seconds, "wall-clock budget (overrides --steps)");
    cmd->add_option("--batch", budget.batch_size, "batch size");
    cmd->add_option("--lr", budget.learning_rate, "learning rate");
    cmd->add_option("--eval-interval", budget.eval_interval, "steps between validation rows");
  }

  bf_train_budget resolve(uint64_t seed) {
    budget.seed = seed;
    if (budget_seconds > 0.0) {
      budget.wall_clock = 1;
      budget.seconds = budget_seconds;
    }
    return budget;
  }

  json to_json() const {
    return json{{"steps", budget.steps},
                {"budget_seconds", budget_seconds},
                {"batch", budget.batch_size},
                {"lr", budget.learning_rate},
                {"eval_interval", budget.eval_interval}};
  }
};

struct WeightFlags {
  bf_loss_weights weights;

  void attach(CLI::App* cmd) {
    bf_loss_weights_default(&weights);
    cmd->add_option("--alpha-e", weights.energy_weight, "energy loss weight");
    cmd->add_option("--alpha-f", weights.force_weight, "force loss weight");
  }

  json to_json() const {
    return json{{"alpha_e", weights.energy_weight}, {"alpha_f", weights.force_weight}};
  }
};

// --kd-terms grammar: comma-separated tokens out, energy, n2n, e2e, all,
// gt, mlp:<n'>. An explicit list replaces the default term set.
bool apply_kd_terms(const std::string& spec, bf_kd_config* kd) {
  kd->distill_output = 0;
  kd->distill_energy = 0;
  kd->distill_n2n = 0;
  kd->distill_e2e = 0;
  kd->mlp_layers = 0;
  size_t pos = 0;
  while (pos <= spec.size()) {
    const size_t comma = std::min(spec.find(',', pos), spec.size());
    const std::string token = spec.substr(pos, comma - pos);
    if (token == "out")
      kd->distill_output = 1;
    else if (token == "energy")
      kd->distill_energy = 1;
    else if (token == "n2n")
      kd->distill_n2n = 1;
    else if (token == "e2e")
      kd->distill_e2e = 1;
    else if (token == "all")
      kd->match_all_blocks = 1;
    else if (token == "gt")
      kd->include_ground_truth_loss = 1;
    else if (token.rfind("mlp:", 0) == 0)
      kd->mlp_layers = std::atoi(token.c_str() + 4);
    else
      return false;
    pos = comma + 1;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blockforge: train, analyze, prune and distill a miniature GNN potential"};
  app.require_subcommand(1);

  uint64_t seed = 0;
  app.add_option("--seed", seed, "global random seed")->capture_default_str();

  // gen ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a labeled synthetic dataset");
  bf_gen_config gen_config;
  bf_gen_config_default(&gen_config);
  std::string gen_out;
  bool gen_shift = false;
  gen->add_option("--count", gen_config.count, "number of samples")->required();
  gen->add_option("--out", gen_out, "output dataset path")->required();
  gen->add_option("--min-atoms", gen_config.min_atoms, "minimum atoms per sample");
  gen->add_option("--max-atoms", gen_config.max_atoms, "maximum atoms per sample");
  gen->add_option("--species", gen_config.species_count, "number of chemical species");
  gen->add_option("--box", gen_config.box_size, "placement box edge length");
  gen->add_option("--relax-steps", gen_config.relax_steps, "descent steps toward the minimum");
  gen->add_option("--eps-scale", gen_config.epsilon_scale, "well-depth scale factor");
  gen->add_option("--sigma-scale", gen_config.sigma_scale, "length scale factor");
  gen->add_flag("--shift", gen_shift, "downstream-task potential shift (eps x1.5, sigma x1.1)");

  // pretrain / scratch ---------------------------------------------------
  auto* pretrain = app.add_subcommand("pretrain", "train a fresh model on a dataset");
  std::string pre_data, pre_out, pre_log;
  ModelFlags pre_model;
  BudgetFlags pre_budget;
  WeightFlags pre_weights;
  pretrain->add_option("--data", pre_data, "training dataset")->required();
  pretrain->add_option("--out", pre_out, "output checkpoint")->required();
  pretrain->add_option("--log", pre_log, "training log CSV (default <out>.log.csv)");
  pre_model.attach(pretrain);
  pre_budget.attach(pretrain, 1e-3);
  pre_weights.attach(pretrain);

  auto* scratch = app.add_subcommand("scratch", "train a reduced architecture from scratch");
  std::string scratch_data, scratch_out, scratch_log, scratch_metrics;
  ModelFlags scratch_model;
  BudgetFlags scratch_budget;
  WeightFlags scratch_weights;
  scratch->add_option("--data", scratch_data, "downstream dataset")->required();
  scratch->add_option("--out", scratch_out, "output checkpoint")->required();
  scratch->add_option("--log", scratch_log, "training log CSV");
  scratch->add_option("--metrics", scratch_metrics, "test metrics CSV");
  scratch_model.attach(scratch);
  scratch_budget.attach(scratch, 3e-4);
  scratch_weights.attach(scratch);

  // relevance -------------------------------------------------------------
  auto* relevance = app.add_subcommand("relevance", "GradCAM block relevance report");
  std::string rel_in, rel_data, rel_out;
  int64_t rel_samples = 1000;
  WeightFlags rel_weights;
  relevance->add_option("--in", rel_in, "checkpoint")->required();
  relevance->add_option("--data", rel_data, "dataset providing the samples")->required();
  relevance->add_option("--out", rel_out, "relevance CSV path")->required();
  relevance->add_option("--samples", rel_samples, "sample budget");
  rel_weights.attach(relevance);

  // prune / ablate ---------------------------------------------------------
  auto* prune = app.add_subcommand("prune", "remove trailing interaction blocks");
  std::string prune_in, prune_out, prune_strategy = "sliced";
  uint32_t prune_blocks = 0;
  prune->add_option("--in", prune_in, "input checkpoint")->required();
  prune->add_option("--out", prune_out, "output checkpoint")->required();
  prune->add_option("--blocks", prune_blocks, "retained interaction blocks")->required();
  prune->add_option("--strategy", prune_strategy, "sliced|random")
      ->check(CLI::IsMember({"sliced", "random"}));

  auto* ablate = app.add_subcommand("ablate", "remove one interaction block");
  std::string ablate_in, ablate_out, ablate_strategy = "sliced";
  uint32_t ablate_index = 0;
  ablate->add_option("--in", ablate_in, "input checkpoint")->required();
  ablate->add_option("--out", ablate_out, "output checkpoint")->required();
  ablate->add_option("--block", ablate_index, "interaction block index, 1-based")->required();
  ablate->add_option("--strategy", ablate_strategy, "sliced|random")
      ->check(CLI::IsMember({"sliced", "random"}));

  // distill -----------------------------------------------------------------
  auto* distill = app.add_subcommand("distill", "distill a teacher into a reduced student");
  std::string dist_teacher, dist_in, dist_data, dist_out, dist_log, dist_terms;
  double dist_lambda = 1.0, dist_fraction = 0.015;
  BudgetFlags dist_budget;
  WeightFlags dist_weights;
  distill->add_option("--teacher", dist_teacher, "teacher checkpoint")->required();
  distill->add_option("--in", dist_in, "student checkpoint")->required();
  distill->add_option("--data", dist_data, "pre-training dataset")->required();
  distill->add_option("--out", dist_out, "output checkpoint")->required();
  distill->add_option("--log", dist_log, "training log CSV");
  distill->add_option("--lambda", dist_lambda, "distillation weight");
  distill->add_option("--kd-terms", dist_terms, "comma list: out,energy,n2n,e2e,all,gt,mlp:<n'>");
  distill->add_option("--data-fraction", dist_fraction, "fraction of the dataset to use");
  dist_budget.attach(distill, 3e-4);
  dist_weights.attach(distill);

  // finetune ------------------------------------------------------------------
  auto* finetune = app.add_subcommand("finetune", "fine-tune on a downstream dataset");
  std::string ft_in, ft_data, ft_out, ft_log, ft_metrics;
  bool ft_reset_heads = false;
  BudgetFlags ft_budget;
  WeightFlags ft_weights;
  finetune->add_option("--in", ft_in, "input checkpoint")->required();
  finetune->add_option("--data", ft_data, "downstream dataset")->required();
  finetune->add_option("--out", ft_out, "output checkpoint")->required();
  finetune->add_option("--log", ft_log, "training log CSV");
  finetune->add_option("--metrics", ft_metrics, "test metrics CSV");
  finetune->add_flag("--reset-heads", ft_reset_heads, "re-initialize prediction heads");
  ft_budget.attach(finetune, 3e-4);
  ft_weights.attach(finetune);

  // eval ------------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "evaluate force/energy MAE on a split");
  std::string eval_in, eval_data, eval_split = "test", eval_out;
  eval->add_option("--in", eval_in, "checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset")->required();
  eval->add_option("--split", eval_split, "train|val|test|all");
  eval->add_option("--out", eval_out, "metrics CSV path (prints to stdout as well)");

  // bench -------------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "inference throughput benchmark");
  std::string bench_in, bench_data;
  int32_t bench_warmup = 1, bench_passes = 5, bench_workers = 1;
  std::string bench_out;
  bench->add_option("--in", bench_in, "checkpoint")->required();
  bench->add_option("--data", bench_data, "dataset")->required();
  bench->add_option("--warmup", bench_warmup, "warmup passes");
  bench->add_option("--passes", bench_passes, "timed passes");
  bench->add_option("--workers", bench_workers, "worker threads");
  bench->add_option("--out", bench_out, "throughput CSV path");

  // sweep ----------------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "full block-count x strategy experiment grid");
  std::string sweep_teacher, sweep_data_dir, sweep_out;
  bf_sweep_config sweep_config;
  bf_sweep_config_default(&sweep_config);
  sweep->add_option("--teacher", sweep_teacher, "trained teacher checkpoint")->required();
  sweep->add_option("--data-dir", sweep_data_dir,
                    "directory holding up.xyzf and down.xyzf")->required();
  sweep->add_option("--out", sweep_out, "output directory for the CSVs")->required();
  sweep->add_option("--finetune-steps", sweep_config.finetune_steps, "per-arm fine-tune budget");
  sweep->add_option("--kd-steps", sweep_config.kd_steps, "distillation steps");
  sweep->add_option("--batch", sweep_config.batch_size, "batch size");
  sweep->add_option("--figure4-seconds", sweep_config.figure4_seconds,
                    "wall-clock budget per convergence arm");
  sweep->add_option("--bench-passes", sweep_config.bench_passes, "timed benchmark passes");

  // Let the global --seed appear after the subcommand name.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message / help text
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (gen->parsed()) {
    gen_config.seed = seed;
    if (gen_shift) {
      gen_config.epsilon_scale = 1.5;
      gen_config.sigma_scale = 1.1;
    }
    DatasetPtr ds;
    check(bf_dataset_generate(&gen_config, &ds.p), "generating dataset");
    check(bf_dataset_write(ds.p, gen_out.c_str()), "writing " + gen_out);
    write_manifest("gen", gen_out,
                   json{{"seed", seed},
                        {"count", gen_config.count},
                        {"min_atoms", gen_config.min_atoms},
                        {"max_atoms", gen_config.max_atoms},
                        {"species", gen_config.species_count},
                        {"box", gen_config.box_size},
                        {"relax_steps", gen_config.relax_steps},
                        {"eps_scale", gen_config.epsilon_scale},
                        {"sigma_scale", gen_config.sigma_scale},
                        {"out", gen_out}});
    std::printf("wrote %lld samples to %s\n",
                static_cast<long long>(bf_dataset_size(ds.p)), gen_out.c_str());
    return kExitOk;
  }

  if (pretrain->parsed()) {
    DatasetPtr ds = load_dataset(pre_data);
    const bf_model_config config = pre_model.resolve(seed);
    const bf_train_budget budget = pre_budget.resolve(seed);
    const std::string log_path = pre_log.empty() ? pre_out + ".log.csv" : pre_log;
    CheckpointPtr out;
    check(bf_pretrain(&config, ds.p, &budget, &pre_weights.weights, log_path.c_str(), &out.p),
          "pretraining");
    check(bf_checkpoint_save(out.p, pre_out.c_str()), "saving " + pre_out);
    json options{{"seed", seed}, {"data", pre_data}, {"out", pre_out}, {"log", log_path}};
    options["model"] = pre_model.to_json();
    options["budget"] = pre_budget.to_json();
    options["loss"] = pre_weights.to_json();
    write_manifest("pretrain", pre_out, options);
    std::printf("pretrained checkpoint written to %s\n", pre_out.c_str());
    return kExitOk;
  }

  if (scratch->parsed()) {
    DatasetPtr ds = load_dataset(scratch_data);
    const bf_model_config config = scratch_model.resolve(seed);
    const bf_train_budget budget = scratch_budget.resolve(seed);
    CheckpointPtr init;
    check(bf_checkpoint_init(&config, &init.p), "initializing model");
    CheckpointPtr out;
    bf_eval_metrics metrics;
    check(bf_finetune(init.p, ds.p, &budget, &scratch_weights.weights, 0,
                      scratch_log.empty() ? nullptr : scratch_log.c_str(), &out.p, &metrics),
          "training from scratch");
    check(bf_checkpoint_save(out.p, scratch_out.c_str()), "saving " + scratch_out);
    if (!scratch_metrics.empty()) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "split,force_mae,energy_mae_per_atom,n_samples\ntest,%.9g,%.9g,%lld\n",
                    metrics.force_mae, metrics.energy_mae_per_atom,
                    static_cast<long long>(metrics.sample_count));
      std::ofstream m(scratch_metrics, std::ios::binary);
      m << buf;
    }
    json options{{"seed", seed}, {"data", scratch_data}, {"out", scratch_out}};
    options["model"] = scratch_model.to_json();
    options["budget"] = scratch_budget.to_json();
    options["loss"] = scratch_weights.to_json();
    write_manifest("scratch", scratch_out, options);
    std::printf("scratch model written to %s (test force MAE %.6g)\n", scratch_out.c_str(),
                metrics.force_mae);
    return kExitOk;
  }

  if (relevance->parsed()) {
    CheckpointPtr ckpt = load_checkpoint(rel_in);
    DatasetPtr ds = load_dataset(rel_data);
    check(bf_block_relevance(ckpt.p, ds.p, rel_samples, &rel_weights.weights, rel_out.c_str(),
                             nullptr, 0, nullptr),
          "computing relevance");
    write_manifest("relevance", rel_out,
                   json{{"seed", seed},
                        {"in", rel_in},
                        {"data", rel_data},
                        {"samples", rel_samples},
                        {"out", rel_out},
                        {"loss", rel_weights.to_json()}});
    std::printf("relevance report written to %s\n", rel_out.c_str());
    return kExitOk;
  }

  if (prune->parsed()) {
    CheckpointPtr ckpt = load_checkpoint(prune_in);
    CheckpointPtr out;
    check(bf_reduce_blocks(ckpt.p, static_cast<int32_t>(prune_blocks) + 1,
                           prune_strategy == "random" ? 1 : 0, seed, &out.p),
          "reducing blocks");
    check(bf_checkpoint_save(out.p, prune_out.c_str()), "saving " + prune_out);
    write_manifest("prune", prune_out,
                   json{{"seed", seed},
                        {"in", prune_in},
                        {"blocks", prune_blocks},
                        {"strategy", prune_strategy},
                        {"out", prune_out}});
    std::printf("pruned checkpoint written to %s\n", prune_out.c_str());
    return kExitOk;
  }

  if (ablate->parsed()) {
    CheckpointPtr ckpt = load_checkpoint(ablate_in);
    CheckpointPtr out;
    check(bf_ablate_block(ckpt.p, static_cast<int32_t>(ablate_index),
                          ablate_strategy == "random" ? 1 : 0, seed, &out.p),
          "ablating block");
    check(bf_checkpoint_save(out.p, ablate_out.c_str()), "saving " + ablate_out);
    write_manifest("ablate", ablate_out,
                   json{{"seed", seed},
                        {"in", ablate_in},
                        {"block", ablate_index},
                        {"strategy", ablate_strategy},
                        {"out", ablate_out}});
    std::printf("ablated checkpoint written to %s\n", ablate_out.c_str());
    return kExitOk;
  }

  if (distill->parsed()) {
    CheckpointPtr teacher = load_checkpoint(dist_teacher);
    CheckpointPtr student = load_checkpoint(dist_in);
    DatasetPtr ds = load_dataset(dist_data);
    bf_kd_config kd;
    bf_kd_config_default(&kd);
    kd.lambda = dist_lambda;
    kd.data_fraction = dist_fraction;
    if (!dist_terms.empty() && !apply_kd_terms(dist_terms, &kd)) {
      std::fprintf(stderr, "bfc: unknown token in --kd-terms '%s'\n", dist_terms.c_str());
      return kExitUsage;
    }
    const bf_train_budget budget = dist_budget.resolve(seed);
    CheckpointPtr out;
    check(bf_distill(teacher.p, student.p, ds.p, &kd, &budget, &dist_weights.weights,
                     dist_log.empty() ? nullptr : dist_log.c_str(), &out.p),
          "distilling");
    check(bf_checkpoint_save(out.p, dist_out.c_str()), "saving " + dist_out);
    json options{{"seed", seed},           {"teacher", dist_teacher},
                 {"in", dist_in},          {"data", dist_data},
                 {"out", dist_out},        {"lambda", dist_lambda},
                 {"kd_terms", dist_terms}, {"data_fraction", dist_fraction}};
    options["budget"] = dist_budget.to_json();
    options["loss"] = dist_weights.to_json();
    write_manifest("distill", dist_out, options);
    std::printf("distilled checkpoint written to %s\n", dist_out.c_str());
    return kExitOk;
  }

  if (finetune->parsed()) {
    CheckpointPtr ckpt = load_checkpoint(ft_in);
    DatasetPtr ds = load_dataset(ft_data);
    const bf_train_budget budget = ft_budget.resolve(seed);
    CheckpointPtr out;
    bf_eval_metrics metrics;
    check(bf_finetune(ckpt.p, ds.p, &budget, &ft_weights.weights, ft_reset_heads ? 1 : 0,
                      ft_log.empty() ? nullptr : ft_log.c_str(), &out.p, &metrics),
          "fine-tuning");
    check(bf_checkpoint_save(out.p, ft_out.c_str()), "saving " + ft_out);
    if (!ft_metrics.empty()) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "split,force_mae,energy_mae_per_atom,n_samples\ntest,%.9g,%.9g,%lld\n",
                    metrics.force_mae, metrics.energy_mae_per_atom,
                    static_cast<long long>(metrics.sample_count));
      std::ofstream m(ft_metrics, std::ios::binary);
      m << buf;
    }
    json options{{"seed", seed},
                 {"in", ft_in},
                 {"data", ft_data},
                 {"out", ft_out},
                 {"reset_heads", ft_reset_heads}};
    options["budget"] = ft_budget.to_json();
    options["loss"] = ft_weights.to_json();
    write_manifest("finetune", ft_out, options);
    std::printf("fine-tuned checkpoint written to %s (test force MAE %.6g)\n", ft_out.c_str(),
                metrics.force_mae);
    return kExitOk;
  }

  if (eval->parsed()) {
    CheckpointPtr ckpt = load_checkpoint(eval_in);
    DatasetPtr ds = load_dataset(eval_data);
    bf_eval_metrics metrics;
    check(bf_evaluate(ckpt.p, ds.p, eval_split.c_str(), &metrics), "evaluating");
    std::printf("split=%s force_mae=%.9g energy_mae_per_atom=%.9g n=%lld\n", eval_split.c_str(),
                metrics.force_mae, metrics.energy_mae_per_atom,
                static_cast<long long>(metrics.sample_count));
    if (!eval_out.empty()) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "split,force_mae,energy_mae_per_atom,n_samples\n%s,%.9g,%.9g,%lld\n",
                    eval_split.c_str(), metrics.force_mae, metrics.energy_mae_per_atom,
                    static_cast<long long>(metrics.sample_count));
      std::ofstream m(eval_out, std::ios::binary);
      m << buf;
    }
    // Read-only runs without --out leave their manifest in the working dir.
    write_manifest("eval", eval_out.empty() ? "bfc_eval" : eval_out,
                   json{{"seed", seed},
                        {"in", eval_in},
                        {"data", eval_data},
                        {"split", eval_split},
                        {"out", eval_out}});
    return kExitOk;
  }

  if (bench->parsed()) {
    CheckpointPtr ckpt = load_checkpoint(bench_in);
    DatasetPtr ds = load_dataset(bench_data);
    double median = 0, lo = 0, hi = 0;
    check(bf_throughput_bench(ckpt.p, ds.p, bench_warmup, bench_passes, bench_workers, &median,
                              &lo, &hi),
          "benchmarking");
    std::printf("throughput_samples_per_s median=%.6g min=%.6g max=%.6g workers=%d\n", median, lo,
                hi, bench_workers);
    if (!bench_out.empty()) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "median,min,max,workers\n%.9g,%.9g,%.9g,%d\n", median, lo,
                    hi, bench_workers);
      std::ofstream m(bench_out, std::ios::binary);
      m << buf;
    }
    write_manifest("bench", bench_out.empty() ? "bfc_bench" : bench_out,
                   json{{"seed", seed},
                        {"in", bench_in},
                        {"data", bench_data},
                        {"warmup", bench_warmup},
                        {"passes", bench_passes},
                        {"workers", bench_workers},
                        {"out", bench_out}});
    return kExitOk;
  }

  if (sweep->parsed()) {
    CheckpointPtr teacher = load_checkpoint(sweep_teacher);
    const std::filesystem::path dir(sweep_data_dir);
    DatasetPtr up = load_dataset((dir / "up.xyzf").string());
    DatasetPtr down = load_dataset((dir / "down.xyzf").string());
    sweep_config.seed = seed;
    std::filesystem::create_directories(sweep_out);
    check(bf_sweep(teacher.p, up.p, down.p, sweep_out.c_str(), &sweep_config), "sweep");
    write_manifest("sweep", sweep_out,
                   json{{"seed", seed},
                        {"teacher", sweep_teacher},
                        {"data_dir", sweep_data_dir},
                        {"out", sweep_out},
                        {"finetune_steps", sweep_config.finetune_steps},
                        {"kd_steps", sweep_config.kd_steps},
                        {"batch", sweep_config.batch_size},
                        {"figure4_seconds", sweep_config.figure4_seconds},
                        {"bench_passes", sweep_config.bench_passes}});
    std::printf("sweep reports written to %s\n", sweep_out.c_str());
    return kExitOk;
  }

  return kExitUsage;
}
