#include "model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "rng.hpp"

namespace bf {

void ModelConfig::validate() const {
  require(blocks >= 2, Error::Kind::InvalidArgument,
          "blocks must be >= 2 (embedding plus at least one interaction block)");
  require(mlp_layers >= 1, Error::Kind::InvalidArgument, "mlp_layers must be >= 1");
  require(node_width >= 1 && edge_width >= 1 && rbf_count >= 1, Error::Kind::InvalidArgument,
          "widths must be >= 1");
  require(cutoff > 0.0, Error::Kind::InvalidArgument, "cutoff must be positive");
  require(species_count >= 1, Error::Kind::InvalidArgument, "species_count must be >= 1");
}

void LossWeights::validate() const {
  require(energy_weight >= 0.0 && force_weight >= 0.0, Error::Kind::InvalidArgument,
          "loss weights must be nonnegative");
  require(energy_weight > 0.0 || force_weight > 0.0, Error::Kind::InvalidArgument,
          "loss weights must not both be zero");
}

Tensor& Checkpoint::find(const std::string& name) {
  for (auto& [n, t] : tensors)
    if (n == name) return t;
  throw Error(Error::Kind::InvalidArgument, "no tensor named " + name);
}

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw Error(Error::Kind::InvalidArgument, "no tensor named " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

int64_t Checkpoint::param_total() const {
  int64_t total = 0;
  for (const auto& [n, t] : tensors) total += t.size();
  return total;
}

std::vector<std::pair<std::string, Shape>> checkpoint_manifest(const ModelConfig& c) {
  c.validate();
  const int64_t d = c.node_width, de = c.edge_width, nr = c.rbf_count;
  const int64_t edge_in = de + 2 * d + nr;
  const int64_t force_in = 2 * d + de + nr;
  std::vector<std::pair<std::string, Shape>> m;
  m.emplace_back("embedding.table", Shape{static_cast<int64_t>(c.species_count), d});
  for (uint32_t i = 1; i < c.blocks; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    m.emplace_back(p + "edge_mlp.w0", Shape{edge_in, de});
    m.emplace_back(p + "edge_mlp.b0", Shape{de});
    m.emplace_back(p + "edge_mlp.w1", Shape{de, de});
    m.emplace_back(p + "edge_mlp.b1", Shape{de});
    m.emplace_back(p + "node_mlp.w0", Shape{de, d});
    m.emplace_back(p + "node_mlp.b0", Shape{d});
    m.emplace_back(p + "node_mlp.w1", Shape{d, d});
    m.emplace_back(p + "node_mlp.b1", Shape{d});
  }
  for (uint32_t j = 1; j <= c.mlp_layers; ++j) {
    const std::string p = "final_mlp.layer" + std::to_string(j) + ".";
    const int64_t in = j == 1 ? d * static_cast<int64_t>(c.blocks) : d;
    m.emplace_back(p + "w", Shape{in, d});
    m.emplace_back(p + "b", Shape{d});
  }
  m.emplace_back("head.energy.w", Shape{d, 1});
  m.emplace_back("head.energy.b", Shape{1});
  m.emplace_back("head.force.w", Shape{force_in, 1});
  m.emplace_back("head.force.b", Shape{1});
  return m;
}

namespace {

Tensor init_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  if (shape.size() == 2) {
    const double a = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
  }
  // biases stay zero
  return t;
}

}  // namespace

Checkpoint init_checkpoint(const ModelConfig& config) {
  config.validate();
  Checkpoint ckpt;
  ckpt.config = config;
  Rng rng(config.seed);
  for (const auto& [name, shape] : checkpoint_manifest(config))
    ckpt.tensors.emplace_back(name, init_tensor(shape, rng));
  return ckpt;
}

// --- checkpoint container -------------------------------------------------

namespace {

constexpr char kMagic[4] = {'B', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T read() {
    if (pos_ + sizeof(T) > data_.size())
      throw Error(Error::Kind::Format, path_ + ": truncated checkpoint payload");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string read_bytes(size_t n) {
    if (pos_ + n > data_.size())
      throw Error(Error::Kind::Format, path_ + ": truncated checkpoint payload");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool exhausted() const { return pos_ == data_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  write_raw(out, kVersion);
  const ModelConfig& c = checkpoint.config;
  write_raw(out, c.blocks);
  write_raw(out, c.mlp_layers);
  write_raw(out, c.node_width);
  write_raw(out, c.edge_width);
  write_raw(out, c.rbf_count);
  write_raw(out, c.cutoff);
  write_raw(out, c.species_count);
  write_raw(out, c.seed);
  write_raw(out, static_cast<uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, tensor] : checkpoint.tensors) {
    write_raw(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    write_raw(out, static_cast<uint32_t>(tensor.shape().size()));
    for (int64_t dim : tensor.shape()) write_raw(out, static_cast<uint64_t>(dim));
    write_raw(out, static_cast<uint8_t>(0));  // dtype: f32
    for (int64_t i = 0; i < tensor.size(); ++i)
      write_raw(out, static_cast<float>(tensor[i]));
  }
  std::ofstream f(path, std::ios::binary);
  require(f.good(), Error::Kind::Io, "cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(f.good(), Error::Kind::Io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), Error::Kind::Io, "cannot open for reading: " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path);

  const std::string magic = r.read_bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw Error(Error::Kind::Format, path + ": bad checkpoint magic");
  const uint32_t version = r.read<uint32_t>();
  if (version != kVersion)
    throw Error(Error::Kind::Format,
                path + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config.blocks = r.read<uint32_t>();
  ckpt.config.mlp_layers = r.read<uint32_t>();
  ckpt.config.node_width = r.read<uint32_t>();
  ckpt.config.edge_width = r.read<uint32_t>();
  ckpt.config.rbf_count = r.read<uint32_t>();
  ckpt.config.cutoff = r.read<double>();
  ckpt.config.species_count = r.read<uint32_t>();
  ckpt.config.seed = r.read<uint32_t>();
  ckpt.config.validate();

  const auto manifest = checkpoint_manifest(ckpt.config);
  const uint32_t count = r.read<uint32_t>();
  if (count != manifest.size())
    throw Error(Error::Kind::Format, path + ": checkpoint manifest mismatch (expected " +
                                         std::to_string(manifest.size()) + " tensors, file has " +
                                         std::to_string(count) + ")");
  for (const auto& [want_name, want_shape] : manifest) {
    const uint32_t name_len = r.read<uint32_t>();
    const std::string name = r.read_bytes(name_len);
    if (name != want_name)
      throw Error(Error::Kind::Format,
                  path + ": checkpoint manifest mismatch (expected tensor '" + want_name +
                      "', file has '" + name + "')");
    const uint32_t ndim = r.read<uint32_t>();
    Shape shape(ndim);
    for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int64_t>(r.read<uint64_t>());
    if (shape != want_shape)
      throw Error(Error::Kind::Format, path + ": tensor shape mismatch for '" + name + "'");
    const uint8_t dtype = r.read<uint8_t>();
    if (dtype != 0)
      throw Error(Error::Kind::Format, path + ": unsupported dtype tag for '" + name + "'");
    Tensor t(shape);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(r.read<float>());
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  if (!r.exhausted())
    throw Error(Error::Kind::Format, path + ": trailing bytes after tensor payload");
  return ckpt;
}

// --- forward graph ---------------------------------------------------------

Tensor radial_basis(const EdgeList& edges, const ModelConfig& config) {
  const int64_t ne = edges.count();
  const int64_t nr = config.rbf_count;
  const double cutoff = config.cutoff;
  const double width = cutoff / static_cast<double>(nr);
  Tensor rbf({ne, nr});
  for (int64_t k = 0; k < ne; ++k) {
    const double r = edges.distances[static_cast<size_t>(k)];
    // Smooth cosine envelope keeps features (and thus forces) continuous at
    // the cutoff.
    const double env = r < cutoff ? 0.5 * (std::cos(M_PI * r / cutoff) + 1.0) : 0.0;
    for (int64_t j = 0; j < nr; ++j) {
      const double center = cutoff * static_cast<double>(j + 1) / static_cast<double>(nr + 1);
      const double u = (r - center) / width;
      rbf.at(k, j) = env * std::exp(-0.5 * u * u);
    }
  }
  return rbf;
}

namespace {

// Incrementally turns checkpoint tensors into tape leaves, remembering the
// mapping for gradient readout.
class GraphBuilder {
 public:
  GraphBuilder(Tape& tape, const Checkpoint& ckpt) : tape_(tape), ckpt_(ckpt) {}

  Tape::Var param(const std::string& name) {
    for (const auto& [n, v] : params_)
      if (n == name) return v;
    params_.emplace_back(name, tape_.leaf(ckpt_.find(name), true));
    return params_.back().second;
  }

  Tape::Var affine(Tape::Var x, const std::string& prefix, const std::string& w,
                   const std::string& b) {
    return tape_.add_row(tape_.matmul(x, param(prefix + w)), param(prefix + b));
  }

  std::vector<std::pair<std::string, Tape::Var>> take_params() { return std::move(params_); }

 private:
  Tape& tape_;
  const Checkpoint& ckpt_;
  std::vector<std::pair<std::string, Tape::Var>> params_;
};

void check_sample(const Checkpoint& ckpt, const MolecularSample& sample, const EdgeList& edges) {
  require(sample.atom_count() >= 2, Error::Kind::InvalidArgument, "sample needs >= 2 atoms");
  for (int z : sample.atomic_numbers)
    require(z >= 0 && static_cast<uint32_t>(z) < ckpt.config.species_count,
            Error::Kind::InvalidArgument,
            "species " + std::to_string(z) + " out of range for species_count " +
                std::to_string(ckpt.config.species_count));
  require(edges.count() > 0, Error::Kind::InvalidArgument,
          "empty edge list (isolated atoms are unsupported)");
}

// FinalMLP plus the energy and force heads on top of an arbitrary
// concatenation var.
void build_head(Tape& tape, GraphBuilder& gb, const ModelConfig& config, const EdgeList& edges,
                Tape::Var concat, Tape::Var last_edge_features, Tape::Var rbf, ForwardGraph& g) {
  const int64_t n = tape.value(concat).rows();
  Tape::Var x = concat;
  for (uint32_t j = 1; j <= config.mlp_layers; ++j) {
    x = gb.affine(x, "final_mlp.layer" + std::to_string(j) + ".", "w", "b");
    if (j < config.mlp_layers) x = tape.silu(x);
    g.mlp_outputs.push_back(x);
  }
  g.g_out = x;

  Tape::Var per_atom = gb.affine(g.g_out, "head.energy.", "w", "b");  // [n,1]
  g.energy = tape.sum_all(per_atom);

  Tape::Var g_recv = tape.gather_rows(g.g_out, edges.receivers);
  Tape::Var g_send = tape.gather_rows(g.g_out, edges.senders);
  const Tape::Var force_in =
      tape.concat_cols(std::array{g_recv, g_send, last_edge_features, rbf});
  Tape::Var phi = gb.affine(force_in, "head.force.", "w", "b");  // [n_e,1]
  Tape::Var unit = tape.constant(edges.unit_vectors);
  Tape::Var contrib = tape.mul_col(unit, phi);
  g.forces = tape.scatter_add_rows(contrib, edges.receivers, n);
}

}  // namespace

ForwardGraph build_forward(Tape& tape, const Checkpoint& ckpt, const MolecularSample& sample,
                           const EdgeList& edges) {
  check_sample(ckpt, sample, edges);
  const ModelConfig& c = ckpt.config;
  const int64_t n = sample.atom_count();
  const int64_t ne = edges.count();

  GraphBuilder gb(tape, ckpt);
  ForwardGraph g;

  std::vector<int64_t> species_rows(sample.atomic_numbers.begin(), sample.atomic_numbers.end());
  Tape::Var h = tape.gather_rows(gb.param("embedding.table"), std::move(species_rows));
  g.block_nodes.push_back(h);

  Tape::Var rbf = tape.constant(radial_basis(edges, c));
  Tape::Var m = tape.constant(Tensor({ne, static_cast<int64_t>(c.edge_width)}));

  for (uint32_t i = 1; i < c.blocks; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    Tape::Var hs = tape.gather_rows(h, edges.senders);
    Tape::Var hr = tape.gather_rows(h, edges.receivers);
    Tape::Var edge_in = tape.concat_cols(std::array{m, hs, hr, rbf});
    Tape::Var e0 = tape.silu(gb.affine(edge_in, p + "edge_mlp.", "w0", "b0"));
    m = gb.affine(e0, p + "edge_mlp.", "w1", "b1");
    g.block_edges.push_back(m);

    Tape::Var agg = tape.scatter_add_rows(m, edges.receivers, n);
    Tape::Var n0 = tape.silu(gb.affine(agg, p + "node_mlp.", "w0", "b0"));
    Tape::Var delta = gb.affine(n0, p + "node_mlp.", "w1", "b1");
    h = tape.add(h, delta);
    g.block_nodes.push_back(h);
  }

  g.concat = tape.concat_cols(g.block_nodes);
  build_head(tape, gb, c, edges, g.concat, g.block_edges.back(), rbf, g);
  g.params = gb.take_params();
  return g;
}

LossVars build_loss(Tape& tape, const ForwardGraph& graph, const MolecularSample& sample,
                    const LossWeights& weights) {
  weights.validate();
  LossVars loss;
  Tape::Var energy_target = tape.constant(Tensor::scalar(sample.energy));
  Tape::Var abs_err = tape.l1_loss(graph.energy, energy_target);
  loss.energy_term = tape.scale(abs_err, 1.0 / static_cast<double>(sample.atom_count()));
  Tape::Var force_target = tape.constant(sample.forces);
  loss.force_term = tape.l1_loss(graph.forces, force_target);
  loss.total = tape.add(tape.scale(loss.energy_term, weights.energy_weight),
                        tape.scale(loss.force_term, weights.force_weight));
  return loss;
}

namespace {

FeatureBundle extract_features(const Tape& tape, const ForwardGraph& g, int64_t width) {
  FeatureBundle fb;
  for (Tape::Var v : g.block_nodes) fb.block_node_features.push_back(tape.value(v));
  for (Tape::Var v : g.block_edges) fb.block_edge_features.push_back(tape.value(v));
  fb.concatenated = tape.value(g.concat);
  fb.partition_width = width;
  return fb;
}

PredictResult finish_prediction(const Tape& tape, const ForwardGraph& g, const LossVars& loss,
                                const ModelConfig& config) {
  PredictResult out;
  out.prediction.energy = tape.value(g.energy)[0];
  out.prediction.forces = tape.value(g.forces);
  out.prediction.features = extract_features(tape, g, config.node_width);
  for (Tape::Var v : g.mlp_outputs) out.prediction.mlp_layer_outputs.push_back(tape.value(v));
  out.loss = tape.value(loss.total)[0];
  out.loss_energy = tape.value(loss.energy_term)[0];
  out.loss_force = tape.value(loss.force_term)[0];
  require(std::isfinite(out.loss) && out.prediction.forces.all_finite(), Error::Kind::Numeric,
          "non-finite prediction");
  return out;
}

}  // namespace

FeatureBundle forward_features(const Checkpoint& ckpt, const MolecularSample& sample,
                               const EdgeList& edges) {
  Tape tape;
  ForwardGraph g = build_forward(tape, ckpt, sample, edges);
  return extract_features(tape, g, ckpt.config.node_width);
}

PredictResult predict(const Checkpoint& ckpt, const MolecularSample& sample,
                      const EdgeList& edges, const LossWeights& weights) {
  Tape tape;
  ForwardGraph g = build_forward(tape, ckpt, sample, edges);
  LossVars loss = build_loss(tape, g, sample, weights);
  return finish_prediction(tape, g, loss, ckpt.config);
}

PredictResult predict_from_concat(const Checkpoint& ckpt, const MolecularSample& sample,
                                  const EdgeList& edges, const Tensor& concat,
                                  const Tensor& last_edge_features, const LossWeights& weights) {
  check_sample(ckpt, sample, edges);
  const ModelConfig& c = ckpt.config;
  require(concat.rank() == 2 && concat.rows() == sample.atom_count() &&
              concat.cols() == static_cast<int64_t>(c.node_width) * c.blocks,
          Error::Kind::InvalidArgument, "concat has wrong shape");
  Tape tape;
  GraphBuilder gb(tape, ckpt);
  ForwardGraph g;
  g.concat = tape.constant(concat);
  Tape::Var rbf = tape.constant(radial_basis(edges, c));
  build_head(tape, gb, c, edges, g.concat, tape.constant(last_edge_features), rbf, g);
  LossVars loss = build_loss(tape, g, sample, weights);
  return finish_prediction(tape, g, loss, c);
}

}  // namespace bf
