#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rng.hpp"

namespace bf {

void KDConfig::validate(const ModelConfig& student) const {
  require(lambda >= 0.0, Error::Kind::InvalidArgument, "lambda must be nonnegative");
  require(mlp_layers >= 0 && mlp_layers <= static_cast<int>(student.mlp_layers),
          Error::Kind::InvalidArgument, "distilled MLP layer count must be in [0, m]");
  require(data_fraction > 0.0 && data_fraction <= 1.0, Error::Kind::InvalidArgument,
          "data_fraction must be in (0, 1]");
  require(lambda == 0.0 || any_term(), Error::Kind::InvalidArgument,
          "lambda > 0 requires at least one enabled distillation term");
}

void TrainBudget::validate() const {
  if (mode == Mode::Steps)
    require(steps >= 0, Error::Kind::InvalidArgument, "steps must be >= 0");
  else
    require(seconds >= 0.0, Error::Kind::InvalidArgument, "seconds must be >= 0");
  require(batch_size >= 1, Error::Kind::InvalidArgument, "batch_size must be >= 1");
  require(learning_rate > 0.0, Error::Kind::InvalidArgument, "learning rate must be positive");
}

int64_t kd_subset_size(int64_t dataset_size, double fraction) {
  const int64_t n = static_cast<int64_t>(std::floor(fraction * static_cast<double>(dataset_size)));
  return std::max<int64_t>(1, n);
}

std::vector<int64_t> kd_subset_indices(int64_t dataset_size, double fraction, uint64_t seed) {
  std::vector<int64_t> train = split_indices(dataset_size, "train");
  const int64_t want = std::min<int64_t>(kd_subset_size(dataset_size, fraction),
                                         static_cast<int64_t>(train.size()));
  Rng rng(derive_seed(seed, 0x4b4453ull));  // subset-selection stream
  for (int64_t i = 0; i < want; ++i) {
    const int64_t j = i + static_cast<int64_t>(rng.uniform_int(train.size() - static_cast<uint64_t>(i)));
    std::swap(train[static_cast<size_t>(i)], train[static_cast<size_t>(j)]);
  }
  train.resize(static_cast<size_t>(want));
  std::sort(train.begin(), train.end());
  return train;
}

namespace {

struct StudentVars {
  Tape::Var energy = -1;
  Tape::Var forces = -1;
  std::vector<Tape::Var> mlp_outputs;
  std::vector<Tape::Var> block_nodes;
  std::vector<Tape::Var> block_edges;
  int64_t atom_count = 0;
};

Tape::Var add_term(Tape& tape, Tape::Var total, Tape::Var term) {
  return total < 0 ? term : tape.add(total, term);
}

Tape::Var build_kd_terms(Tape& tape, const StudentVars& student, const Prediction& teacher,
                         const KDConfig& kd) {
  Tape::Var total = -1;
  if (kd.distill_output) {
    Tape::Var target = tape.constant(teacher.forces);
    total = add_term(tape, total, tape.l1_loss(student.forces, target));
  }
  if (kd.distill_energy) {
    Tape::Var target = tape.constant(Tensor::scalar(teacher.energy));
    Tape::Var term = tape.scale(tape.l1_loss(student.energy, target),
                                1.0 / static_cast<double>(student.atom_count));
    total = add_term(tape, total, term);
  }
  require(kd.mlp_layers <= static_cast<int>(teacher.mlp_layer_outputs.size()),
          Error::Kind::InvalidArgument, "teacher has fewer MLP layers than requested");
  for (int i = 0; i < kd.mlp_layers; ++i) {
    Tape::Var target = tape.constant(teacher.mlp_layer_outputs[static_cast<size_t>(i)]);
    total = add_term(tape, total,
                     tape.l1_loss(student.mlp_outputs[static_cast<size_t>(i)], target));
  }
  const int student_blocks = static_cast<int>(student.block_nodes.size());
  require(student_blocks <= static_cast<int>(teacher.features.block_node_features.size()),
          Error::Kind::InvalidArgument, "student has more blocks than teacher");
  if (kd.distill_n2n) {
    const int first = kd.match_all_blocks ? 0 : student_blocks - 1;
    for (int p = first; p < student_blocks; ++p) {
      Tape::Var target = tape.constant(teacher.features.block_node_features[static_cast<size_t>(p)]);
      total = add_term(tape, total,
                       tape.l1_loss(student.block_nodes[static_cast<size_t>(p)], target));
    }
  }
  if (kd.distill_e2e) {
    const int edge_count = static_cast<int>(student.block_edges.size());
    const int first = kd.match_all_blocks ? 0 : edge_count - 1;
    for (int q = first; q < edge_count; ++q) {
      Tape::Var target = tape.constant(teacher.features.block_edge_features[static_cast<size_t>(q)]);
      total = add_term(tape, total,
                       tape.l1_loss(student.block_edges[static_cast<size_t>(q)], target));
    }
  }
  if (total < 0) total = tape.constant(Tensor::scalar(0.0));
  return total;
}

StudentVars student_vars_from_graph(const Tape& tape, const ForwardGraph& g) {
  StudentVars s;
  s.energy = g.energy;
  s.forces = g.forces;
  s.mlp_outputs = g.mlp_outputs;
  s.block_nodes = g.block_nodes;
  s.block_edges = g.block_edges;
  s.atom_count = tape.value(g.forces).rows();
  return s;
}

StudentVars student_vars_from_prediction(Tape& tape, const Prediction& p) {
  StudentVars s;
  s.energy = tape.constant(Tensor::scalar(p.energy));
  s.forces = tape.constant(p.forces);
  for (const Tensor& t : p.mlp_layer_outputs) s.mlp_outputs.push_back(tape.constant(t));
  for (const Tensor& t : p.features.block_node_features) s.block_nodes.push_back(tape.constant(t));
  for (const Tensor& t : p.features.block_edge_features) s.block_edges.push_back(tape.constant(t));
  s.atom_count = p.forces.rows();
  return s;
}

void check_compatible(const Checkpoint& teacher, const Checkpoint& student) {
  const ModelConfig& t = teacher.config;
  const ModelConfig& s = student.config;
  const bool ok = s.blocks <= t.blocks && s.mlp_layers == t.mlp_layers &&
                  s.node_width == t.node_width && s.edge_width == t.edge_width &&
                  s.rbf_count == t.rbf_count && s.species_count == t.species_count &&
                  s.cutoff == t.cutoff;
  require(ok, Error::Kind::InvalidArgument,
          "student is not a reduction of the teacher (incompatible configs)");
}

}  // namespace

double kd_loss(const Prediction& teacher, const Prediction& student, const KDConfig& kd) {
  Tape tape;
  StudentVars vars = student_vars_from_prediction(tape, student);
  Tape::Var total = build_kd_terms(tape, vars, teacher, kd);
  return tape.value(total)[0];
}

// --- training engine --------------------------------------------------------

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kGradClipNorm = 10.0;

struct EngineSetup {
  Checkpoint start;
  const Dataset* data = nullptr;
  std::vector<int64_t> train_idx;
  TrainBudget budget;
  LossWeights weights;
  const Checkpoint* teacher = nullptr;
  KDConfig kd{};
};

double eval_force_mae(const Checkpoint& ckpt, const Dataset& data,
                      const std::vector<int64_t>& idx, const std::vector<EdgeList>& edges) {
  double abs_sum = 0.0;
  int64_t comp_count = 0;
  for (int64_t i : idx) {
    const MolecularSample& s = data.samples[static_cast<size_t>(i)];
    Tape tape;
    ForwardGraph g = build_forward(tape, ckpt, s, edges[static_cast<size_t>(i)]);
    const Tensor& f = tape.value(g.forces);
    for (int64_t k = 0; k < f.size(); ++k) abs_sum += std::abs(f[k] - s.forces[k]);
    comp_count += f.size();
  }
  return comp_count > 0 ? abs_sum / static_cast<double>(comp_count) : 0.0;
}

TrainResult run_training(EngineSetup setup) {
  setup.budget.validate();
  setup.weights.validate();
  const Dataset& data = *setup.data;
  const TrainBudget& budget = setup.budget;

  const bool want_kd = setup.teacher != nullptr && setup.kd.lambda > 0.0 && setup.kd.any_term();
  const bool want_gt = setup.teacher == nullptr || setup.kd.include_ground_truth_loss;

  TrainResult result;
  result.checkpoint = std::move(setup.start);
  if (!want_kd && !want_gt) return result;  // no objective: no parameter updates
  if (budget.mode == TrainBudget::Mode::Steps && budget.steps == 0) return result;
  if (budget.mode == TrainBudget::Mode::WallClock && budget.seconds <= 0.0) return result;

  require(!setup.train_idx.empty(), Error::Kind::InvalidArgument,
          "training requires a nonempty train split");

  Checkpoint& work = result.checkpoint;
  const double cutoff = work.config.cutoff;

  std::vector<EdgeList> edges(static_cast<size_t>(data.size()));
  for (int64_t i = 0; i < data.size(); ++i)
    edges[static_cast<size_t>(i)] = build_edges(data.samples[static_cast<size_t>(i)], cutoff);
  const std::vector<int64_t> val_idx = split_indices(data.size(), "val");

  // The teacher is frozen, so its outputs per sample are fixed; cache them.
  std::vector<Prediction> teacher_out;
  if (want_kd) {
    check_compatible(*setup.teacher, work);
    teacher_out.resize(static_cast<size_t>(data.size()));
    for (int64_t i : setup.train_idx) {
      PredictResult pr = predict(*setup.teacher, data.samples[static_cast<size_t>(i)],
                                 edges[static_cast<size_t>(i)], setup.weights);
      teacher_out[static_cast<size_t>(i)] = std::move(pr.prediction);
    }
  }

  const size_t n_params = work.tensors.size();
  std::vector<Tensor> grads(n_params), adam_m(n_params), adam_v(n_params);
  for (size_t p = 0; p < n_params; ++p) {
    grads[p] = Tensor(work.tensors[p].second.shape());
    adam_m[p] = Tensor(work.tensors[p].second.shape());
    adam_v[p] = Tensor(work.tensors[p].second.shape());
  }
  auto param_slot = [&work](const std::string& name) {
    for (size_t p = 0; p < work.tensors.size(); ++p)
      if (work.tensors[p].first == name) return p;
    throw Error(Error::Kind::Internal, "unknown parameter " + name);
  };

  const int64_t eval_interval =
      budget.eval_interval > 0
          ? budget.eval_interval
          : (budget.mode == TrainBudget::Mode::Steps ? std::max<int64_t>(1, budget.steps / 20)
                                                     : 20);

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  std::vector<int64_t> order = setup.train_idx;
  size_t cursor = order.size();  // force a shuffle on first use
  int64_t epoch = 0;
  int64_t step = 0;
  int64_t adam_t = 0;

  for (;;) {
    if (budget.mode == TrainBudget::Mode::Steps && step >= budget.steps) break;
    if (budget.mode == TrainBudget::Mode::WallClock && elapsed() >= budget.seconds) break;
    ++step;

    std::vector<int64_t> batch;
    for (int b = 0; b < budget.batch_size; ++b) {
      if (cursor == order.size()) {
        Rng rng(derive_seed(budget.seed, static_cast<uint64_t>(epoch++)));
        for (size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[rng.uniform_int(i)]);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    Tape tape;
    Tape::Var batch_loss = -1;
    double sum_energy = 0.0, sum_force = 0.0, sum_kd = 0.0;
    std::vector<ForwardGraph> graphs;
    graphs.reserve(batch.size());
    for (int64_t idx : batch) {
      const MolecularSample& sample = data.samples[static_cast<size_t>(idx)];
      graphs.push_back(build_forward(tape, work, sample, edges[static_cast<size_t>(idx)]));
      const ForwardGraph& g = graphs.back();
      Tape::Var sample_loss = -1;
      if (want_gt) {
        LossVars loss = build_loss(tape, g, sample, setup.weights);
        sample_loss = loss.total;
        sum_energy += tape.value(loss.energy_term)[0];
        sum_force += tape.value(loss.force_term)[0];
      }
      if (want_kd) {
        StudentVars vars = student_vars_from_graph(tape, g);
        Tape::Var kd_term = build_kd_terms(tape, vars, teacher_out[static_cast<size_t>(idx)],
                                           setup.kd);
        sum_kd += tape.value(kd_term)[0];
        Tape::Var scaled = tape.scale(kd_term, setup.kd.lambda);
        sample_loss = sample_loss < 0 ? scaled : tape.add(sample_loss, scaled);
      }
      batch_loss = batch_loss < 0 ? sample_loss : tape.add(batch_loss, sample_loss);
    }
    batch_loss = tape.scale(batch_loss, 1.0 / static_cast<double>(batch.size()));

    const double loss_value = tape.value(batch_loss)[0];
    require(std::isfinite(loss_value), Error::Kind::Numeric,
            "non-finite loss at step " + std::to_string(step));

    tape.backward(batch_loss);
    for (Tensor& g : grads) std::fill(g.values().begin(), g.values().end(), 0.0);
    for (const ForwardGraph& g : graphs)
      for (const auto& [name, var] : g.params) {
        Tensor& acc = grads[param_slot(name)];
        const Tensor& piece = tape.grad(var);
        for (int64_t i = 0; i < acc.size(); ++i) acc[i] += piece[i];
      }

    double norm_sq = 0.0;
    for (const Tensor& g : grads)
      for (int64_t i = 0; i < g.size(); ++i) norm_sq += g[i] * g[i];
    const double norm = std::sqrt(norm_sq);
    const double clip = norm > kGradClipNorm ? kGradClipNorm / norm : 1.0;

    ++adam_t;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_t));
    for (size_t p = 0; p < n_params; ++p) {
      Tensor& theta = work.tensors[p].second;
      for (int64_t i = 0; i < theta.size(); ++i) {
        const double g = grads[p][i] * clip;
        adam_m[p][i] = kAdamBeta1 * adam_m[p][i] + (1.0 - kAdamBeta1) * g;
        adam_v[p][i] = kAdamBeta2 * adam_v[p][i] + (1.0 - kAdamBeta2) * g * g;
        const double mhat = adam_m[p][i] / bc1;
        const double vhat = adam_v[p][i] / bc2;
        theta[i] -= budget.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
      }
    }

    LogRow row;
    row.step = step;
    row.loss_total = loss_value;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    row.loss_energy = sum_energy * inv_b;
    row.loss_force = sum_force * inv_b;
    row.loss_kd = sum_kd * inv_b;
    row.wall_clock_s = elapsed();
    const bool last_step = budget.mode == TrainBudget::Mode::Steps && step == budget.steps;
    if (!val_idx.empty() && (step % eval_interval == 0 || last_step)) {
      row.has_val = true;
      row.val_force_mae = eval_force_mae(work, data, val_idx, edges);
    }
    result.log.push_back(row);
  }

  // Wall-clock runs stop at an arbitrary step; make sure the curve ends with
  // a validation point.
  if (budget.mode == TrainBudget::Mode::WallClock && !result.log.empty() &&
      !result.log.back().has_val && !val_idx.empty()) {
    result.log.back().has_val = true;
    result.log.back().val_force_mae = eval_force_mae(work, data, val_idx, edges);
  }
  return result;
}

}  // namespace

TrainResult pretrain(const ModelConfig& config, const Dataset& dataset,
                     const TrainBudget& budget, const LossWeights& weights) {
  require(dataset.size() >= 1, Error::Kind::InvalidArgument, "dataset is empty");
  EngineSetup setup;
  setup.start = init_checkpoint(config);
  setup.data = &dataset;
  setup.train_idx = split_indices(dataset.size(), "train");
  setup.budget = budget;
  setup.weights = weights;
  return run_training(std::move(setup));
}

TrainResult distill(const Checkpoint& teacher, const Checkpoint& student, const Dataset& dataset,
                    const KDConfig& kd, const TrainBudget& budget, const LossWeights& weights) {
  require(dataset.size() >= 1, Error::Kind::InvalidArgument, "dataset is empty");
  kd.validate(student.config);
  check_compatible(teacher, student);
  EngineSetup setup;
  setup.start = student;
  setup.data = &dataset;
  setup.train_idx = kd_subset_indices(dataset.size(), kd.data_fraction, budget.seed);
  setup.budget = budget;
  setup.weights = weights;
  setup.teacher = &teacher;
  setup.kd = kd;
  return run_training(std::move(setup));
}

TrainResult finetune(const Checkpoint& checkpoint, const Dataset& dataset,
                     const TrainBudget& budget, const LossWeights& weights, bool head_reset) {
  require(dataset.size() >= 1, Error::Kind::InvalidArgument, "dataset is empty");
  EngineSetup setup;
  setup.start = checkpoint;
  if (head_reset) {
    Rng rng(derive_seed(budget.seed, 0x48454144ull));  // head-reset stream
    for (auto& [name, tensor] : setup.start.tensors) {
      if (name.rfind("head.", 0) != 0) continue;
      if (tensor.shape().size() == 2) {
        const double a =
            std::sqrt(6.0 / static_cast<double>(tensor.shape()[0] + tensor.shape()[1]));
        for (int64_t i = 0; i < tensor.size(); ++i) tensor[i] = rng.uniform(-a, a);
      } else {
        std::fill(tensor.values().begin(), tensor.values().end(), 0.0);
      }
    }
  }
  setup.data = &dataset;
  setup.train_idx = split_indices(dataset.size(), "train");
  setup.budget = budget;
  setup.weights = weights;
  TrainResult result = run_training(std::move(setup));
  result.test_metrics = evaluate(result.checkpoint, dataset, "test");
  return result;
}

EvalMetrics evaluate(const Checkpoint& checkpoint, const Dataset& dataset,
                     std::string_view split) {
  const std::vector<int64_t> idx = split_indices(dataset.size(), split);
  require(!idx.empty(), Error::Kind::InvalidArgument,
          "evaluation split '" + std::string(split) + "' is empty");
  double abs_force_sum = 0.0;
  int64_t comp_count = 0;
  double energy_sum = 0.0;
  for (int64_t i : idx) {
    const MolecularSample& s = dataset.samples[static_cast<size_t>(i)];
    EdgeList edges = build_edges(s, checkpoint.config.cutoff);
    PredictResult pr = predict(checkpoint, s, edges);
    for (int64_t k = 0; k < s.forces.size(); ++k)
      abs_force_sum += std::abs(pr.prediction.forces[k] - s.forces[k]);
    comp_count += s.forces.size();
    energy_sum += std::abs(pr.prediction.energy - s.energy) /
                  static_cast<double>(s.atom_count());
  }
  EvalMetrics m;
  m.force_mae = abs_force_sum / static_cast<double>(comp_count);
  m.energy_mae_per_atom = energy_sum / static_cast<double>(idx.size());
  m.sample_count = static_cast<int64_t>(idx.size());
  return m;
}

void write_train_log(const std::vector<LogRow>& log, const std::string& path) {
  std::string text = "step,loss_total,loss_energy,loss_force,loss_kd,val_force_mae\n";
  char buf[256];
  for (const LogRow& row : log) {
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,", static_cast<long long>(row.step),
                  row.loss_total, row.loss_energy, row.loss_force, row.loss_kd);
    text += buf;
    if (row.has_val) {
      std::snprintf(buf, sizeof buf, "%.9g", row.val_force_mae);
      text += buf;
    }
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Error::Kind::Io, "cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(out.good(), Error::Kind::Io, "write failed: " + path);
}

void write_metrics_csv(const EvalMetrics& metrics, std::string_view split,
                       const std::string& path) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "split,force_mae,energy_mae_per_atom,n_samples\n%s,%.9g,%.9g,%lld\n",
                std::string(split).c_str(), metrics.force_mae, metrics.energy_mae_per_atom,
                static_cast<long long>(metrics.sample_count));
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Error::Kind::Io, "cannot open for writing: " + path);
  out << buf;
  require(out.good(), Error::Kind::Io, "write failed: " + path);
}

}  // namespace bf
