#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "algebra.hpp"
#include "interaction.hpp"
#include "lattice.hpp"

namespace quasiloc {

inline Region chain(int n) {
  if (n < 1) throw DomainError("chain: need at least one site");
  std::vector<Site> v;
  for (int x = 0; x < n; ++x) v.push_back({x, 0});
  return Region(std::move(v));
}

// width columns (x) by height rows (y), lower-left corner at the origin
inline Region rectangle(int width, int height) {
  if (width < 1 || height < 1) throw DomainError("rectangle: empty");
  std::vector<Site> v;
  for (int x = 0; x < width; ++x)
    for (int y = 0; y < height; ++y) v.push_back({x, y});
  return Region(std::move(v));
}

/// Nearest-neighbour bonds of a region (pairs at distance 1), each listed once.
inline std::vector<Region> bonds(const Region& sites) {
  std::vector<Region> out;
  for (Site a : sites) {
    for (Site b : {Site{a.x + 1, a.y}, Site{a.x, a.y + 1}})
      if (sites.contains(b)) out.push_back(Region{a, b});
  }
  return out;
}

/// -J sum Z_i Z_j over nearest-neighbour bonds - h sum X_i.
inline Interaction tfim(const Region& sites, double J, double h) {
  Interaction phi(2);
  const Matrix zz = pauli_string("ZZ"), x = pauli('X');
  for (const Region& b : bonds(sites))
    if (J != 0) phi.add(b, -J * zz);
  for (Site s : sites)
    if (h != 0) phi.add(Region{s}, -h * x);
  return phi;
}

inline Interaction tfim_chain(int n, double J, double h) { return tfim(chain(n), J, h); }

/// Commuting model sum J_b Z Z + sum h_s Z with fixed couplings.
inline Interaction commuting_zz(const Region& sites, double J, double h) {
  Interaction phi(2);
  for (const Region& b : bonds(sites)) phi.add(b, J * pauli_string("ZZ"));
  for (Site s : sites) phi.add(Region{s}, h * pauli('Z'));
  return phi;
}

/// Z Z on every nearest-neighbour bond of the region: range 1, two-site supports, norm 1.
inline Interaction nearest_neighbor(const Region& sites, double coupling = 1.0) {
  Interaction phi(2);
  for (const Region& b : bonds(sites)) phi.add(b, coupling * pauli_string("ZZ"));
  return phi;
}

struct RandomTwoLocalOptions {
  double bond_scale = 1.0;   // bond terms have norm bond_scale
  double field_scale = 0.5;  // one-site terms have norm field_scale
  bool time_dependent = false;
  int local_dim = 2;
  // keep horizontal bonds (x,y)-(x+1,y) only for these x; empty keeps every bond
  std::vector<int> bond_columns;
};

namespace detail {

inline TimeProfile random_profile(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng), c = u(rng);
  return TimeProfile({0.0, 0.5, 1.0}, {{a, 2 * (b - a)}, {2 * b - c, 2 * (c - b)}});
}

inline Matrix unit_hermitian(Eigen::Index D, std::mt19937_64& rng, int d, const Region& r) {
  Matrix m = random_hermitian_matrix(D, rng);
  return m / op_norm(LocalOperator::on(r, m, d));
}

}  // namespace detail

/// Random Hermitian bond and field terms; `keep` filters term regions.
inline Interaction random_two_local(const Region& sites, std::uint64_t seed, RandomTwoLocalOptions opt = {},
                                    const std::function<bool(const Region&)>& keep = {}) {
  std::mt19937_64 rng(seed);
  const int d = opt.local_dim;
  Interaction phi(d);
  auto add = [&](const Region& r, double scale) {
    const auto D = Eigen::Index(ipow(d, r.size()));
    Matrix m = scale * detail::unit_hermitian(D, rng, d, r);
    TimeProfile g = opt.time_dependent ? detail::random_profile(rng) : TimeProfile::constant(1.0);
    const bool column_ok = opt.bond_columns.empty() || r.size() != 2 || r[0].y != r[1].y ||
                           std::find(opt.bond_columns.begin(), opt.bond_columns.end(), r[0].x) != opt.bond_columns.end();
    if (column_ok && (!keep || keep(r))) phi.add(r, std::move(m), std::move(g));
  };
  for (const Region& b : bonds(sites)) add(b, opt.bond_scale);
  for (Site s : sites) add(Region{s}, opt.field_scale);
  return phi;
}

/// random_two_local with every term confined to one of the given zones.
inline Interaction zone_respecting(const Region& sites, const std::vector<Region>& zones, std::uint64_t seed,
                                   RandomTwoLocalOptions opt = {}) {
  return random_two_local(sites, seed, opt, [&](const Region& r) {
    for (const Region& z : zones)
      if (r.subset_of(z)) return true;
    return false;
  });
}

struct FieldSpec {
  std::string name, type, default_value, description;
};

struct GeneratorSpec {
  std::string name, description;
  std::vector<FieldSpec> fields;
};

inline const std::vector<GeneratorSpec>& generator_catalog() {
  static const std::vector<GeneratorSpec> catalog = {
      {"tfim",
       "transverse-field Ising: -J ZZ on nearest-neighbour bonds, -h X on sites",
       {{"J", "float", "1.0", "bond coupling"},
        {"h", "float", "1.0", "transverse field"},
        {"sites", "int", "10", "chain length (ignored when width/height are given)"},
        {"width", "int", "0", "rectangle width; 0 selects a chain"},
        {"height", "int", "1", "rectangle height"}}},
      {"random-2local",
       "random Hermitian nearest-neighbour bond and one-site terms",
       {{"sites", "int", "6", "chain length (ignored when width/height are given)"},
        {"width", "int", "0", "rectangle width; 0 selects a chain"},
        {"height", "int", "1", "rectangle height"},
        {"seed", "u64", "1", "RNG seed"},
        {"bond_scale", "float", "1.0", "bond term norm"},
        {"field_scale", "float", "0.5", "one-site term norm"},
        {"time_dependent", "bool", "false", "piecewise-linear random profiles on [0,1]"},
        {"bond_columns", "int list", "[]", "keep horizontal bonds only between columns x and x+1 for listed x"}}},
      {"random-2local-zoned",
       "random-2local with terms straddling the sandwich zones removed",
       {{"sites", "int", "8", "chain length (ignored when width/height are given)"},
        {"width", "int", "0", "rectangle width; 0 selects a chain"},
        {"height", "int", "1", "rectangle height"},
        {"seed", "u64", "1", "RNG seed"},
        {"bond_scale", "float", "1.0", "bond term norm"},
        {"field_scale", "float", "0.5", "one-site term norm"},
        {"time_dependent", "bool", "false", "piecewise-linear random profiles on [0,1]"},
        {"bond_columns", "int list", "[]", "keep horizontal bonds only between columns x and x+1 for listed x"}}},
      {"commuting-zz",
       "commuting J ZZ + h Z model",
       {{"J", "float", "1.0", "bond coupling"},
        {"h", "float", "0.5", "longitudinal field"},
        {"sites", "int", "6", "chain length"}}},
      {"nearest-neighbor",
       "ZZ on nearest-neighbour bonds of a 2D region",
       {{"coupling", "float", "1.0", "bond coupling"},
        {"width", "int", "4", "rectangle width"},
        {"height", "int", "2", "rectangle height"}}},
  };
  return catalog;
}

}  // namespace quasiloc
