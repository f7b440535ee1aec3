#include "data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rng.hpp"

namespace bf {

EdgeList build_edges(const Tensor& positions, double cutoff) {
  require(cutoff > 0.0, Error::Kind::InvalidArgument, "cutoff must be positive");
  require(positions.rank() == 2 && positions.cols() == 3, Error::Kind::InvalidArgument,
          "positions must be [n,3]");
  const int64_t n = positions.rows();
  EdgeList edges;
  std::vector<double> uv;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = positions.at(j, 0) - positions.at(i, 0);
      const double dy = positions.at(j, 1) - positions.at(i, 1);
      const double dz = positions.at(j, 2) - positions.at(i, 2);
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (r2 == 0.0)
        throw Error(Error::Kind::InvalidArgument,
                    "atoms " + std::to_string(i) + " and " + std::to_string(j) +
                        " are at identical positions");
      const double r = std::sqrt(r2);
      if (r >= cutoff) continue;
      edges.senders.push_back(i);
      edges.receivers.push_back(j);
      edges.distances.push_back(r);
      uv.push_back(dx / r);
      uv.push_back(dy / r);
      uv.push_back(dz / r);
    }
  }
  edges.unit_vectors = Tensor({edges.count(), 3}, std::move(uv));
  return edges;
}

EdgeList build_edges(const MolecularSample& sample, double cutoff) {
  return build_edges(sample.positions, cutoff);
}

double LJTable::eps(int zi, int zj) const {
  require(zi >= 1 && zi <= species_count && zj >= 1 && zj <= species_count,
          Error::Kind::InvalidArgument, "species out of table range");
  return epsilon[static_cast<size_t>((zi - 1) * species_count + (zj - 1))];
}

double LJTable::sig(int zi, int zj) const {
  require(zi >= 1 && zi <= species_count && zj >= 1 && zj <= species_count,
          Error::Kind::InvalidArgument, "species out of table range");
  return sigma[static_cast<size_t>((zi - 1) * species_count + (zj - 1))];
}

LJTable make_lj_table(int species_count, uint64_t table_seed, double epsilon_scale,
                      double sigma_scale) {
  require(species_count >= 1, Error::Kind::InvalidArgument, "species_count must be >= 1");
  LJTable t;
  t.species_count = species_count;
  t.epsilon.assign(static_cast<size_t>(species_count) * species_count, 0.0);
  t.sigma.assign(static_cast<size_t>(species_count) * species_count, 0.0);
  Rng rng(table_seed);
  for (int i = 0; i < species_count; ++i) {
    for (int j = i; j < species_count; ++j) {
      const double eps = rng.uniform(0.6, 1.4) * epsilon_scale;
      const double sig = rng.uniform(0.9, 1.1) * sigma_scale;
      t.epsilon[static_cast<size_t>(i * species_count + j)] = eps;
      t.epsilon[static_cast<size_t>(j * species_count + i)] = eps;
      t.sigma[static_cast<size_t>(i * species_count + j)] = sig;
      t.sigma[static_cast<size_t>(j * species_count + i)] = sig;
    }
  }
  return t;
}

OracleResult oracle_energy_forces(const Tensor& positions, const std::vector<int>& species,
                                  const LJTable& table) {
  const int64_t n = positions.rows();
  require(n == static_cast<int64_t>(species.size()), Error::Kind::InvalidArgument,
          "species count must match position rows");
  OracleResult out;
  out.forces = Tensor({n, 3});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) {
      const double dx = positions.at(i, 0) - positions.at(j, 0);
      const double dy = positions.at(i, 1) - positions.at(j, 1);
      const double dz = positions.at(i, 2) - positions.at(j, 2);
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (r2 == 0.0)
        throw Error(Error::Kind::InvalidArgument,
                    "coincident atoms " + std::to_string(i) + " and " + std::to_string(j));
      const double r = std::sqrt(r2);
      const double eps = table.eps(species[static_cast<size_t>(i)], species[static_cast<size_t>(j)]);
      const double sig = table.sig(species[static_cast<size_t>(i)], species[static_cast<size_t>(j)]);
      const double s6 = std::pow(sig / r, 6);
      const double s12 = s6 * s6;
      out.energy += 4.0 * eps * (s12 - s6);
      // dE/dr = (24 eps / r) (s6 - 2 s12); F_i = -dE/dr * (x_i - x_j)/r
      const double dedr = 24.0 * eps * (s6 - 2.0 * s12) / r;
      const double fx = -dedr * dx / r;
      const double fy = -dedr * dy / r;
      const double fz = -dedr * dz / r;
      out.forces.at(i, 0) += fx;
      out.forces.at(i, 1) += fy;
      out.forces.at(i, 2) += fz;
      out.forces.at(j, 0) -= fx;
      out.forces.at(j, 1) -= fy;
      out.forces.at(j, 2) -= fz;
    }
  }
  return out;
}

namespace {

constexpr int kMaxSampleAttempts = 64;
constexpr int kMaxPlacementTries = 256;
// Single-step displacement clamp so the steepest-descent relaxation stays
// stable in the steep repulsive region.
constexpr double kMaxRelaxMove = 0.1;

bool min_separation_ok(const Tensor& positions, const std::vector<int>& species,
                       const LJTable& table, int64_t upto) {
  for (int64_t i = 0; i < upto; ++i) {
    for (int64_t j = i + 1; j < upto; ++j) {
      const double dx = positions.at(i, 0) - positions.at(j, 0);
      const double dy = positions.at(i, 1) - positions.at(j, 1);
      const double dz = positions.at(i, 2) - positions.at(j, 2);
      const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
      const double sig = table.sig(species[static_cast<size_t>(i)], species[static_cast<size_t>(j)]);
      if (r < 0.7 * sig) return false;
    }
  }
  return true;
}

MolecularSample generate_sample(const GenSpec& spec, const LJTable& table, uint64_t index) {
  Rng rng(derive_seed(spec.seed, index));
  const int n = spec.min_atoms +
                static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.max_atoms - spec.min_atoms + 1)));

  for (int attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
    MolecularSample sample;
    sample.atomic_numbers.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      sample.atomic_numbers[static_cast<size_t>(i)] =
          1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.species_count)));
    sample.positions = Tensor({n, 3});

    // Grow a connected cluster: the first atom lands anywhere in the box,
    // each later atom is rejection-sampled near a random anchor atom at
    // roughly bonding distance.
    bool placed = true;
    for (int i = 0; i < n && placed; ++i) {
      placed = false;
      for (int tries = 0; tries < kMaxPlacementTries; ++tries) {
        if (i == 0) {
          sample.positions.at(i, 0) = rng.uniform(0.0, spec.box_size);
          sample.positions.at(i, 1) = rng.uniform(0.0, spec.box_size);
          sample.positions.at(i, 2) = rng.uniform(0.0, spec.box_size);
        } else {
          const int anchor = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i)));
          const double sig = table.sig(sample.atomic_numbers[static_cast<size_t>(i)],
                                       sample.atomic_numbers[static_cast<size_t>(anchor)]);
          const double radius = rng.uniform(0.9, 1.3) * sig;
          const double z = rng.uniform(-1.0, 1.0);
          const double phi = rng.uniform(0.0, 2.0 * M_PI);
          const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
          const double px = sample.positions.at(anchor, 0) + radius * rho * std::cos(phi);
          const double py = sample.positions.at(anchor, 1) + radius * rho * std::sin(phi);
          const double pz = sample.positions.at(anchor, 2) + radius * z;
          if (px < 0.0 || px > spec.box_size || py < 0.0 || py > spec.box_size || pz < 0.0 ||
              pz > spec.box_size)
            continue;
          sample.positions.at(i, 0) = px;
          sample.positions.at(i, 1) = py;
          sample.positions.at(i, 2) = pz;
        }
        if (min_separation_ok(sample.positions, sample.atomic_numbers, table, i + 1)) {
          placed = true;
          break;
        }
      }
    }
    if (!placed) continue;

    for (int step = 0; step < spec.relax_steps; ++step) {
      OracleResult r = oracle_energy_forces(sample.positions, sample.atomic_numbers, table);
      for (int i = 0; i < n; ++i) {
        double mx = spec.relax_step_size * r.forces.at(i, 0);
        double my = spec.relax_step_size * r.forces.at(i, 1);
        double mz = spec.relax_step_size * r.forces.at(i, 2);
        const double norm = std::sqrt(mx * mx + my * my + mz * mz);
        if (norm > kMaxRelaxMove) {
          const double s = kMaxRelaxMove / norm;
          mx *= s;
          my *= s;
          mz *= s;
        }
        sample.positions.at(i, 0) += mx;
        sample.positions.at(i, 1) += my;
        sample.positions.at(i, 2) += mz;
      }
    }

    if (!min_separation_ok(sample.positions, sample.atomic_numbers, table, n)) continue;

    OracleResult labels = oracle_energy_forces(sample.positions, sample.atomic_numbers, table);
    sample.energy = labels.energy;
    sample.forces = std::move(labels.forces);
    return sample;
  }
  throw Error(Error::Kind::Numeric,
              "sample placement failed after " + std::to_string(kMaxSampleAttempts) +
                  " attempts (box too small for requested atom count?)");
}

}  // namespace

Dataset generate_dataset(const GenSpec& spec) {
  require(spec.count >= 1, Error::Kind::InvalidArgument, "count must be >= 1");
  require(spec.min_atoms >= 2 && spec.max_atoms >= spec.min_atoms,
          Error::Kind::InvalidArgument, "atom range must satisfy 2 <= min <= max");
  require(spec.box_size > 0.0, Error::Kind::InvalidArgument, "box size must be positive");
  require(spec.species_count >= 1, Error::Kind::InvalidArgument, "species_count must be >= 1");
  const LJTable table =
      make_lj_table(spec.species_count, spec.table_seed, spec.epsilon_scale, spec.sigma_scale);
  Dataset ds;
  ds.spec = spec;
  ds.samples.reserve(spec.count);
  for (uint64_t i = 0; i < spec.count; ++i) ds.samples.push_back(generate_sample(spec, table, i));
  return ds;
}

std::vector<int64_t> split_indices(int64_t dataset_size, std::string_view split) {
  std::vector<int64_t> out;
  for (int64_t i = 0; i < dataset_size; ++i) {
    const int64_t slot = i % 10;
    const bool take = (split == "all") || (split == "train" && slot <= 7) ||
                      (split == "val" && slot == 8) || (split == "test" && slot == 9);
    if (take) out.push_back(i);
  }
  if (out.empty() && split != "all" && split != "train" && split != "val" && split != "test")
    throw Error(Error::Kind::InvalidArgument, "unknown split: " + std::string(split));
  return out;
}

Dataset split_subset(const Dataset& dataset, std::string_view split) {
  Dataset out;
  out.spec = dataset.spec;
  out.split = std::string(split);
  for (int64_t i : split_indices(dataset.size(), split))
    out.samples.push_back(dataset.samples[static_cast<size_t>(i)]);
  return out;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::string text;
  for (const MolecularSample& s : dataset.samples) {
    text += std::to_string(s.atom_count());
    text += '\n';
    text += "energy=";
    append_number(text, s.energy);
    text += '\n';
    for (int64_t i = 0; i < s.atom_count(); ++i) {
      text += std::to_string(s.atomic_numbers[static_cast<size_t>(i)]);
      for (int64_t c = 0; c < 3; ++c) {
        text += ' ';
        append_number(text, s.positions.at(i, c));
      }
      for (int64_t c = 0; c < 3; ++c) {
        text += ' ';
        append_number(text, s.forces.at(i, c));
      }
      text += '\n';
    }
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Error::Kind::Io, "cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(out.good(), Error::Kind::Io, "write failed: " + path);
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int64_t line, const std::string& what) {
  throw Error(Error::Kind::Format, path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Error::Kind::Io, "cannot open for reading: " + path);
  Dataset ds;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) parse_fail(path, lineno, "expected atom count, got empty line");
    int64_t n = 0;
    {
      std::istringstream iss(line);
      if (!(iss >> n) || !iss.eof()) parse_fail(path, lineno, "malformed atom count line");
    }
    if (n < 2) parse_fail(path, lineno, "atom count must be >= 2");

    if (!std::getline(in, line)) parse_fail(path, lineno + 1, "missing energy line");
    ++lineno;
    if (line.rfind("energy=", 0) != 0) parse_fail(path, lineno, "expected 'energy=<value>'");
    MolecularSample s;
    {
      std::istringstream iss(line.substr(7));
      if (!(iss >> s.energy) || !iss.eof()) parse_fail(path, lineno, "malformed energy value");
      if (!std::isfinite(s.energy)) parse_fail(path, lineno, "non-finite energy");
    }

    s.atomic_numbers.resize(static_cast<size_t>(n));
    s.positions = Tensor({n, 3});
    s.forces = Tensor({n, 3});
    for (int64_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) parse_fail(path, lineno + 1, "record truncated: missing atom line");
      ++lineno;
      std::istringstream iss(line);
      int z = 0;
      double x, y, zc, fx, fy, fz;
      if (!(iss >> z >> x >> y >> zc >> fx >> fy >> fz) || !iss.eof())
        parse_fail(path, lineno, "expected 'Z x y z fx fy fz'");
      if (z < 1) parse_fail(path, lineno, "atomic number must be positive");
      for (double v : {x, y, zc, fx, fy, fz})
        if (!std::isfinite(v)) parse_fail(path, lineno, "non-finite value");
      s.atomic_numbers[static_cast<size_t>(i)] = z;
      s.positions.at(i, 0) = x;
      s.positions.at(i, 1) = y;
      s.positions.at(i, 2) = zc;
      s.forces.at(i, 0) = fx;
      s.forces.at(i, 1) = fy;
      s.forces.at(i, 2) = fz;
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace bf
