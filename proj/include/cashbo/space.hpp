#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cashbo/rng.hpp"

namespace cashbo {

enum class VarKind { continuous, count, categorical };

// One hyper-parameter dimension. Continuous variables live on [lower, upper]
// (optionally log-spaced); count variables on the integer grid
// lower..upper; categorical-ordinal variables enumerate levels
// 1..cardinality and otherwise behave like count variables.
struct VariableSpec {
  std::string name;
  VarKind kind = VarKind::continuous;
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;    // continuous only
  int cardinality = 0;       // categorical only; levels are 1..cardinality

  void validate() const;
  bool is_discrete() const { return kind != VarKind::continuous; }
  // Integer grid bounds for discrete kinds.
  long long grid_lower() const;
  long long grid_upper() const;
};

struct AlgorithmSpec {
  std::string name;
  std::vector<VariableSpec> variables;

  int dim() const { return static_cast<int>(variables.size()); }
};

// Heterogeneous per-algorithm hyper-parameter domains: the CASH search space.
struct SearchSpace {
  std::vector<AlgorithmSpec> algorithms;

  int num_algorithms() const { return static_cast<int>(algorithms.size()); }
  int dim(int algo) const { return algorithms.at(algo).dim(); }
  void validate() const;

  // Stable 64-bit hash of names, kinds, and bounds. Used to pair PTEM files
  // with the space they were trained on.
  std::uint64_t fingerprint() const;

  std::string to_json() const;
  static SearchSpace from_json(const std::string& text);
  static SearchSpace load(const std::string& path);
  void save(const std::string& path) const;
};

// A unit-scaled hyper-parameter vector for one algorithm. Every coordinate
// is in [0,1]; discrete coordinates sit exactly on their grid images.
struct HpVector {
  int algo = 0;
  std::vector<double> values;
};

// Unit scaling per variable. scale maps [lower,upper] (or the integer grid)
// onto [0,1]; unscale inverts it, exactly for discrete kinds.
double scale_to_unit(double raw, const VariableSpec& spec);
double unscale_from_unit(double unit, const VariableSpec& spec);

std::vector<double> scale_to_unit(const std::vector<double>& raw, const AlgorithmSpec& algo);
std::vector<double> unscale_from_unit(const std::vector<double>& unit, const AlgorithmSpec& algo);

HpVector sample_uniform(const SearchSpace& space, int algo, Rng& rng);

// Half-width of the discrete neighbor window from the local-search rule:
// Z = floor((upper - lower + 1) / 10).
long long discrete_neighbor_halfwidth(const VariableSpec& spec);

inline constexpr int kNeighborCount = 10;
inline constexpr double kNeighborStd = 0.1;
inline constexpr int kNeighborRedrawCap = 100;

// Draws kNeighborCount perturbed copies of center: continuous coordinates
// from N(center_i, 0.1) redrawn while outside [0,1] (clamped after
// kNeighborRedrawCap redraws), discrete coordinates uniform on the window
// [c-Z, c+Z] intersected with the grid.
std::vector<HpVector> neighbor_samples(const HpVector& center, const SearchSpace& space, Rng& rng);

const char* var_kind_name(VarKind kind);
VarKind var_kind_from_name(const std::string& name);

}  // namespace cashbo
