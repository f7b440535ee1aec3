#include "efficiency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "surgery.hpp"

namespace bf {

double flops_estimate(const ModelConfig& config, int64_t n, int64_t n_e) {
  config.validate();
  require(n >= 1 && n_e >= 1, Error::Kind::InvalidArgument,
          "reference graph sizes must be >= 1");
  const double d = config.node_width;
  const double de = config.edge_width;
  const double nr = config.rbf_count;
  const double b = config.blocks;
  const double m = config.mlp_layers;
  const double nn = static_cast<double>(n);
  const double ne = static_cast<double>(n_e);
  const double edge_in = de + 2.0 * d + nr;
  const double force_in = 2.0 * d + de + nr;

  double total = 0.0;
  // embedding: table lookup, no arithmetic
  // interaction blocks
  const double per_block = (2.0 * ne * edge_in * de + ne * de) + ne * de  // edge layer 0 + silu
                           + (2.0 * ne * de * de + ne * de)               // edge layer 1
                           + ne * de                                      // message aggregation
                           + (2.0 * nn * de * d + nn * d) + nn * d        // node layer 0 + silu
                           + (2.0 * nn * d * d + nn * d)                  // node layer 1
                           + nn * d;                                      // residual add
  total += (b - 1.0) * per_block;
  // final MLP
  for (int64_t j = 1; j <= config.mlp_layers; ++j) {
    const double in = j == 1 ? d * b : d;
    total += 2.0 * nn * in * d + nn * d;
    if (j < static_cast<int64_t>(m)) total += nn * d;  // silu
  }
  // energy head: affine to 1 plus the atom sum
  total += 2.0 * nn * d + nn + nn;
  // force head: affine to 1, direction scaling, scatter into atoms
  total += 2.0 * ne * force_in + ne + ne * 3.0 + ne * 3.0;
  return total;
}

double instrumented_forward_flops(const Checkpoint& checkpoint, const MolecularSample& sample) {
  EdgeList edges = build_edges(sample, checkpoint.config.cutoff);
  Tape tape;
  build_forward(tape, checkpoint, sample, edges);
  return static_cast<double>(tape.flop_count());
}

BenchResult throughput_bench(const Checkpoint& checkpoint, const Dataset& dataset,
                             int warmup_passes, int timed_passes, int workers) {
  require(dataset.size() >= 1, Error::Kind::InvalidArgument, "benchmark dataset is empty");
  require(timed_passes >= 3, Error::Kind::InvalidArgument, "timed_passes must be >= 3");
  require(warmup_passes >= 0, Error::Kind::InvalidArgument, "warmup_passes must be >= 0");
  require(workers >= 1, Error::Kind::InvalidArgument, "workers must be >= 1");

  const int64_t count = dataset.size();
  std::vector<EdgeList> edges(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i)
    edges[static_cast<size_t>(i)] = build_edges(dataset.samples[static_cast<size_t>(i)],
                                                checkpoint.config.cutoff);

  auto run_range = [&](int64_t from, int64_t to) {
    for (int64_t i = from; i < to; ++i) {
      Tape tape;
      build_forward(tape, checkpoint, dataset.samples[static_cast<size_t>(i)],
                    edges[static_cast<size_t>(i)]);
    }
  };
  auto run_pass = [&]() {
    if (workers == 1) {
      run_range(0, count);
      return;
    }
    std::vector<std::thread> pool;
    const int64_t chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int64_t from = std::min<int64_t>(count, w * chunk);
      const int64_t to = std::min<int64_t>(count, from + chunk);
      if (from < to) pool.emplace_back(run_range, from, to);
    }
    for (std::thread& t : pool) t.join();
  };

  for (int p = 0; p < warmup_passes; ++p) run_pass();

  std::vector<double> rates;
  rates.reserve(static_cast<size_t>(timed_passes));
  for (int p = 0; p < timed_passes; ++p) {
    const auto t0 = std::chrono::steady_clock::now();
    run_pass();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(dt > 0.0, Error::Kind::Numeric, "timer resolution too coarse for this benchmark");
    rates.push_back(static_cast<double>(count) / dt);
  }
  std::sort(rates.begin(), rates.end());
  BenchResult out;
  out.samples_per_pass = count;
  out.min_samples_per_s = rates.front();
  out.max_samples_per_s = rates.back();
  const size_t mid = rates.size() / 2;
  out.median_samples_per_s =
      rates.size() % 2 == 1 ? rates[mid] : 0.5 * (rates[mid - 1] + rates[mid]);
  return out;
}

namespace {

struct MeanGraphSize {
  int64_t n = 0;
  int64_t n_e = 0;
};

MeanGraphSize mean_graph_size(const Dataset& dataset, double cutoff) {
  double n_sum = 0.0, e_sum = 0.0;
  for (const MolecularSample& s : dataset.samples) {
    n_sum += static_cast<double>(s.atom_count());
    e_sum += static_cast<double>(build_edges(s, cutoff).count());
  }
  MeanGraphSize out;
  out.n = std::max<int64_t>(1, static_cast<int64_t>(std::llround(n_sum / dataset.size())));
  out.n_e = std::max<int64_t>(1, static_cast<int64_t>(std::llround(e_sum / dataset.size())));
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Error::Kind::Io, "cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(out.good(), Error::Kind::Io, "write failed: " + path);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void sweep_report(const Checkpoint& teacher, const Dataset& upstream, const Dataset& downstream,
                  const std::string& out_dir, const SweepConfig& config) {
  require(upstream.size() >= 10 && downstream.size() >= 10, Error::Kind::InvalidArgument,
          "sweep needs upstream and downstream datasets with at least 10 samples");
  const int full_interaction = static_cast<int>(teacher.config.blocks) - 1;
  require(full_interaction >= 2, Error::Kind::InvalidArgument,
          "sweep needs a teacher with at least 2 interaction blocks");
  std::filesystem::create_directories(out_dir);

  const MeanGraphSize ref = mean_graph_size(downstream, teacher.config.cutoff);
  const ParamCounts teacher_params = param_count(teacher.config);
  const double teacher_flops = flops_estimate(teacher.config, ref.n, ref.n_e);
  const BenchResult teacher_bench =
      throughput_bench(teacher, downstream, config.bench_warmup, config.bench_passes);
  const EvalMetrics teacher_upstream = evaluate(teacher, upstream, "test");

  TrainBudget ft_budget;
  ft_budget.mode = TrainBudget::Mode::Steps;
  ft_budget.steps = config.finetune_steps;
  ft_budget.batch_size = config.batch_size;
  ft_budget.learning_rate = config.finetune_lr;
  ft_budget.seed = config.seed;

  TrainBudget kd_budget = ft_budget;
  kd_budget.steps = config.kd_steps;
  kd_budget.learning_rate = config.distill_lr;

  std::string table1 = "blocks,strategy,force_mae,delta_vs_teacher\n";
  table1 += std::to_string(full_interaction) + ",teacher," + fmt(teacher_upstream.force_mae) +
            ",0\n";
  std::string figure3 = "blocks,strategy,force_mae\n";
  {
    TrainResult ft = finetune(teacher, downstream, ft_budget, config.weights);
    figure3 += std::to_string(full_interaction) + ",teacher," + fmt(ft.test_metrics.force_mae) +
               "\n";
  }
  std::string table2 = "blocks,throughput,throughput_delta,flops,flops_delta,params,params_pct_delta\n";
  table2 += std::to_string(full_interaction) + "," + fmt(teacher_bench.median_samples_per_s) +
            ",0," + fmt(teacher_flops) + ",0," + std::to_string(teacher_params.total) + ",0\n";

  std::map<int, Checkpoint> kd_students;
  for (int k = full_interaction - 1; k >= 2; --k) {
    const int b_prime = k + 1;
    Checkpoint sliced = reduce_blocks(teacher, b_prime, MlpRepair::Sliced, config.seed);
    Checkpoint random = reduce_blocks(teacher, b_prime, MlpRepair::Random, config.seed);
    TrainResult kd = distill(teacher, sliced, upstream, config.kd, kd_budget, config.weights);

    const EvalMetrics up_br = evaluate(sliced, upstream, "test");
    const EvalMetrics up_kd = evaluate(kd.checkpoint, upstream, "test");
    table1 += std::to_string(k) + ",br," + fmt(up_br.force_mae) + "," +
              fmt(up_br.force_mae - teacher_upstream.force_mae) + "\n";
    table1 += std::to_string(k) + ",br_kd," + fmt(up_kd.force_mae) + "," +
              fmt(up_kd.force_mae - teacher_upstream.force_mae) + "\n";

    TrainResult ft_br = finetune(sliced, downstream, ft_budget, config.weights);
    TrainResult ft_rnd = finetune(random, downstream, ft_budget, config.weights);
    TrainResult ft_kd = finetune(kd.checkpoint, downstream, ft_budget, config.weights);
    figure3 += std::to_string(k) + ",br," + fmt(ft_br.test_metrics.force_mae) + "\n";
    figure3 += std::to_string(k) + ",br_random_mlp," + fmt(ft_rnd.test_metrics.force_mae) + "\n";
    figure3 += std::to_string(k) + ",br_kd," + fmt(ft_kd.test_metrics.force_mae) + "\n";

    const ParamCounts pc = param_count(sliced.config);
    const double fl = flops_estimate(sliced.config, ref.n, ref.n_e);
    const BenchResult bench =
        throughput_bench(sliced, downstream, config.bench_warmup, config.bench_passes);
    table2 += std::to_string(k) + "," + fmt(bench.median_samples_per_s) + "," +
              fmt(bench.median_samples_per_s - teacher_bench.median_samples_per_s) + "," +
              fmt(fl) + "," + fmt(fl - teacher_flops) + "," + std::to_string(pc.total) + "," +
              fmt(100.0 * static_cast<double>(pc.total - teacher_params.total) /
                  static_cast<double>(teacher_params.total)) +
              "\n";
    kd_students.emplace(k, std::move(kd.checkpoint));
  }

  // Convergence arms use the models as they enter fine-tuning in the
  // pipeline: the teacher at full depth, distilled students below it.
  std::string figure4 = "blocks,wall_clock_s,val_force_mae\n";
  for (int k : config.figure4_blocks) {
    require(k >= 2 && k <= full_interaction, Error::Kind::InvalidArgument,
            "figure4 block count out of range");
    const Checkpoint& start = k == full_interaction ? teacher : kd_students.at(k);
    TrainBudget wall = ft_budget;
    wall.mode = TrainBudget::Mode::WallClock;
    wall.seconds = config.figure4_seconds;
    wall.eval_interval = 25;
    TrainResult run = finetune(start, downstream, wall, config.weights);
    require(!run.log.empty(), Error::Kind::Numeric, "figure4 budget produced no steps");
    for (const LogRow& row : run.log) {
      if (!row.has_val) continue;
      figure4 += std::to_string(k) + "," + fmt(row.wall_clock_s) + "," +
                 fmt(row.val_force_mae) + "\n";
    }
  }

  const std::filesystem::path dir(out_dir);
  write_text((dir / "table1.csv").string(), table1);
  write_text((dir / "figure3.csv").string(), figure3);
  write_text((dir / "table2.csv").string(), table2);
  write_text((dir / "figure4.csv").string(), figure4);
}

}  // namespace bf
