#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tensor.hpp"

namespace bf {

// One labeled configuration: species, coordinates, total energy and per-atom
// forces (the supervision targets).
struct MolecularSample {
  std::vector<int> atomic_numbers;  // n positive integers
  Tensor positions;                 // [n,3]
  double energy = 0.0;
  Tensor forces;                    // [n,3]

  int64_t atom_count() const { return static_cast<int64_t>(atomic_numbers.size()); }
};

// Directed neighbor list under a distance cutoff. Symmetric by construction:
// if i->j is present then j->i is present. Ordering is sender-major,
// receiver-minor.
struct EdgeList {
  std::vector<int64_t> senders;
  std::vector<int64_t> receivers;
  std::vector<double> distances;
  Tensor unit_vectors;  // [n_e,3], (pos[receiver]-pos[sender])/distance

  int64_t count() const { return static_cast<int64_t>(senders.size()); }
};

EdgeList build_edges(const Tensor& positions, double cutoff);
EdgeList build_edges(const MolecularSample& sample, double cutoff);

// Symmetric per-species-pair Lennard-Jones parameters. The base table depends
// only on (species_count, table_seed); downstream-task variants apply the
// scale factors on top, so they shift the same underlying potential.
struct LJTable {
  int species_count = 0;
  std::vector<double> epsilon;  // species_count^2, row-major
  std::vector<double> sigma;

  double eps(int zi, int zj) const;
  double sig(int zi, int zj) const;
};

inline constexpr uint64_t kDefaultLJTableSeed = 0x1a2b3c4d5e6f7081ull;

LJTable make_lj_table(int species_count, uint64_t table_seed, double epsilon_scale,
                      double sigma_scale);

struct OracleResult {
  double energy = 0.0;
  Tensor forces;  // [n,3]
};

// Full pairwise LJ sum with analytic forces; errors on coincident atoms.
OracleResult oracle_energy_forces(const Tensor& positions, const std::vector<int>& species,
                                  const LJTable& table);

struct GenSpec {
  uint64_t count = 100;
  int min_atoms = 6;
  int max_atoms = 12;
  int species_count = 4;
  double box_size = 3.5;
  uint64_t seed = 0;
  int relax_steps = 20;
  double relax_step_size = 0.01;
  double epsilon_scale = 1.0;  // downstream default 1.5
  double sigma_scale = 1.0;    // downstream default 1.1
  uint64_t table_seed = kDefaultLJTableSeed;
};

struct Dataset {
  std::vector<MolecularSample> samples;
  GenSpec spec{};
  std::string split = "all";

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
};

// Rejection-sampled cluster placement followed by a few steepest-descent
// relaxation steps; every sample is labeled by the oracle. Reproducible per
// (seed, index), so parallel generation would match serial output.
Dataset generate_dataset(const GenSpec& spec);

// Split assignment is a pure function of the sample index: index mod 10 in
// {0..7} -> train, 8 -> val, 9 -> test.
std::vector<int64_t> split_indices(int64_t dataset_size, std::string_view split);
Dataset split_subset(const Dataset& dataset, std::string_view split);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace bf
