#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "tensor.hpp"

namespace bf {

// Architecture hyperparameters. `blocks` counts the embedding block plus the
// interaction blocks; the default mirrors the full-scale model's layout
// (one embedding block, six interaction blocks, five final MLP layers) at toy
// width.
struct ModelConfig {
  uint32_t blocks = 7;        // b, embedding included
  uint32_t mlp_layers = 5;    // m
  uint32_t node_width = 32;   // d
  uint32_t edge_width = 16;   // d_e
  uint32_t rbf_count = 8;     // radial basis functions
  double cutoff = 1.6;
  uint32_t species_count = 8;
  uint32_t seed = 0;

  void validate() const;
};

struct LossWeights {
  double energy_weight = 1.0;
  double force_weight = 10.0;

  void validate() const;
};

struct Checkpoint {
  ModelConfig config;
  // Parameters in canonical manifest order.
  std::vector<std::pair<std::string, Tensor>> tensors;

  Tensor& find(const std::string& name);
  const Tensor& find(const std::string& name) const;
  bool has(const std::string& name) const;
  int64_t param_total() const;
};

// Names and shapes implied by a config, in canonical order.
std::vector<std::pair<std::string, Shape>> checkpoint_manifest(const ModelConfig& config);

Checkpoint init_checkpoint(const ModelConfig& config);

// Binary container: magic "BFCK", version u32=1, config block, tensor table.
// Payloads are 32-bit floats; in-memory math is 64-bit.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Per-block features and their column concatenation, embedding first.
struct FeatureBundle {
  std::vector<Tensor> block_node_features;  // b entries, each [n,d]
  std::vector<Tensor> block_edge_features;  // b-1 entries, each [n_e,d_e]
  Tensor concatenated;                      // [n, d*b]
  int64_t partition_width = 0;              // d
};

struct Prediction {
  double energy = 0.0;
  Tensor forces;                          // [n,3]
  FeatureBundle features;
  std::vector<Tensor> mlp_layer_outputs;  // m entries, each [n,d]
};

struct PredictResult {
  Prediction prediction;
  double loss = 0.0;
  double loss_energy = 0.0;  // |E_hat - E| / n, unweighted
  double loss_force = 0.0;   // mean component |F_hat - F|, unweighted
};

// Tape-level handles into a forward graph; used by training, relevance and
// the instrumented FLOP count.
struct ForwardGraph {
  std::vector<std::pair<std::string, Tape::Var>> params;
  std::vector<Tape::Var> block_nodes;
  std::vector<Tape::Var> block_edges;
  Tape::Var concat = -1;
  std::vector<Tape::Var> mlp_outputs;
  Tape::Var g_out = -1;
  Tape::Var energy = -1;  // [1]
  Tape::Var forces = -1;  // [n,3]
};

Tensor radial_basis(const EdgeList& edges, const ModelConfig& config);

ForwardGraph build_forward(Tape& tape, const Checkpoint& checkpoint,
                           const MolecularSample& sample, const EdgeList& edges);

struct LossVars {
  Tape::Var total = -1;
  Tape::Var energy_term = -1;  // unweighted
  Tape::Var force_term = -1;   // unweighted
};

LossVars build_loss(Tape& tape, const ForwardGraph& graph, const MolecularSample& sample,
                    const LossWeights& weights);

FeatureBundle forward_features(const Checkpoint& checkpoint, const MolecularSample& sample,
                               const EdgeList& edges);

PredictResult predict(const Checkpoint& checkpoint, const MolecularSample& sample,
                      const EdgeList& edges, const LossWeights& weights = {});

// Runs the final MLP and heads on an externally supplied concatenation,
// holding the given edge features fixed. The downstream network is a pure
// function of (concat, last edge features, geometry).
PredictResult predict_from_concat(const Checkpoint& checkpoint, const MolecularSample& sample,
                                  const EdgeList& edges, const Tensor& concat,
                                  const Tensor& last_edge_features,
                                  const LossWeights& weights = {});

}  // namespace bf
