#include "cashbo/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cashbo/error.hpp"

namespace cashbo {

using nlohmann::json;

void VariableSpec::validate() const {
  switch (kind) {
    case VarKind::continuous:
      if (!(lower < upper)) throw ConfigError("variable '" + name + "': lower must be < upper");
      if (log_scale && lower <= 0.0)
        throw ConfigError("variable '" + name + "': log_scale requires lower > 0");
      break;
    case VarKind::count:
      if (!(lower < upper)) throw ConfigError("variable '" + name + "': lower must be < upper");
      if (lower != std::floor(lower) || upper != std::floor(upper))
        throw ConfigError("variable '" + name + "': count bounds must be integers");
      break;
    case VarKind::categorical:
      if (cardinality < 2)
        throw ConfigError("variable '" + name + "': categorical cardinality must be >= 2");
      break;
  }
}

long long VariableSpec::grid_lower() const {
  return kind == VarKind::categorical ? 1 : static_cast<long long>(lower);
}

long long VariableSpec::grid_upper() const {
  return kind == VarKind::categorical ? cardinality : static_cast<long long>(upper);
}

void SearchSpace::validate() const {
  if (algorithms.empty()) throw ConfigError("search space needs at least one algorithm");
  for (const auto& a : algorithms) {
    if (a.variables.empty())
      throw ConfigError("algorithm '" + a.name + "' needs at least one variable");
    for (const auto& v : a.variables) v.validate();
  }
}

namespace {

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_mix_str(std::uint64_t& h, const std::string& s) {
  fnv_mix(h, s.data(), s.size());
  const char sep = '\x1f';
  fnv_mix(h, &sep, 1);
}

void fnv_mix_f64(std::uint64_t& h, double x) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, sizeof(bits));
  fnv_mix(h, &bits, sizeof(bits));
}

}  // namespace

std::uint64_t SearchSpace::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& a : algorithms) {
    fnv_mix_str(h, a.name);
    for (const auto& v : a.variables) {
      fnv_mix_str(h, v.name);
      fnv_mix_str(h, var_kind_name(v.kind));
      fnv_mix_f64(h, v.lower);
      fnv_mix_f64(h, v.upper);
      const unsigned char lg = v.log_scale ? 1 : 0;
      fnv_mix(h, &lg, 1);
      fnv_mix(h, &v.cardinality, sizeof(v.cardinality));
    }
  }
  return h;
}

const char* var_kind_name(VarKind kind) {
  switch (kind) {
    case VarKind::continuous: return "continuous";
    case VarKind::count: return "count";
    case VarKind::categorical: return "categorical";
  }
  return "?";
}

VarKind var_kind_from_name(const std::string& name) {
  if (name == "continuous") return VarKind::continuous;
  if (name == "count") return VarKind::count;
  if (name == "categorical") return VarKind::categorical;
  throw ConfigError("unknown variable kind '" + name + "'");
}

double scale_to_unit(double raw, const VariableSpec& spec) {
  if (spec.kind == VarKind::continuous) {
    if (raw < spec.lower || raw > spec.upper)
      throw ConfigError("value " + std::to_string(raw) + " outside [" +
                        std::to_string(spec.lower) + ", " + std::to_string(spec.upper) +
                        "] for variable '" + spec.name + "'");
    if (spec.log_scale)
      return (std::log(raw) - std::log(spec.lower)) /
             (std::log(spec.upper) - std::log(spec.lower));
    return (raw - spec.lower) / (spec.upper - spec.lower);
  }
  const long long lo = spec.grid_lower(), hi = spec.grid_upper();
  const long long c = std::llround(raw);
  if (c < lo || c > hi || static_cast<double>(c) != raw)
    throw ConfigError("value " + std::to_string(raw) + " not on grid " + std::to_string(lo) +
                      ".." + std::to_string(hi) + " for variable '" + spec.name + "'");
  return static_cast<double>(c - lo) / static_cast<double>(hi - lo);
}

double unscale_from_unit(double unit, const VariableSpec& spec) {
  if (unit < 0.0 || unit > 1.0)
    throw ConfigError("unit value " + std::to_string(unit) + " outside [0,1] for variable '" +
                      spec.name + "'");
  if (spec.kind == VarKind::continuous) {
    if (spec.log_scale)
      return std::exp(std::log(spec.lower) +
                      unit * (std::log(spec.upper) - std::log(spec.lower)));
    return spec.lower + unit * (spec.upper - spec.lower);
  }
  const long long lo = spec.grid_lower(), hi = spec.grid_upper();
  const long long c = lo + std::llround(unit * static_cast<double>(hi - lo));
  return static_cast<double>(c < lo ? lo : (c > hi ? hi : c));
}

std::vector<double> scale_to_unit(const std::vector<double>& raw, const AlgorithmSpec& algo) {
  if (raw.size() != algo.variables.size())
    throw ConfigError("dimension mismatch scaling values for algorithm '" + algo.name + "'");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = scale_to_unit(raw[i], algo.variables[i]);
  return out;
}

std::vector<double> unscale_from_unit(const std::vector<double>& unit, const AlgorithmSpec& algo) {
  if (unit.size() != algo.variables.size())
    throw ConfigError("dimension mismatch unscaling values for algorithm '" + algo.name + "'");
  std::vector<double> out(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i)
    out[i] = unscale_from_unit(unit[i], algo.variables[i]);
  return out;
}

HpVector sample_uniform(const SearchSpace& space, int algo, Rng& rng) {
  if (algo < 0 || algo >= space.num_algorithms())
    throw ConfigError("algorithm index " + std::to_string(algo) + " out of range");
  const auto& spec = space.algorithms[algo];
  HpVector hp;
  hp.algo = algo;
  hp.values.resize(spec.variables.size());
  for (std::size_t i = 0; i < spec.variables.size(); ++i) {
    const auto& v = spec.variables[i];
    if (v.is_discrete()) {
      const long long c = rng.uniform_int(v.grid_lower(), v.grid_upper());
      hp.values[i] = scale_to_unit(static_cast<double>(c), v);
    } else {
      hp.values[i] = rng.uniform();
    }
  }
  return hp;
}

long long discrete_neighbor_halfwidth(const VariableSpec& spec) {
  return (spec.grid_upper() - spec.grid_lower() + 1) / 10;
}

std::vector<HpVector> neighbor_samples(const HpVector& center, const SearchSpace& space,
                                       Rng& rng) {
  const auto& spec = space.algorithms.at(center.algo);
  if (center.values.size() != spec.variables.size())
    throw ConfigError("neighbor_samples: center dimension mismatch");

  std::vector<HpVector> out(kNeighborCount);
  for (int s = 0; s < kNeighborCount; ++s) {
    HpVector nb;
    nb.algo = center.algo;
    nb.values.resize(center.values.size());
    for (std::size_t i = 0; i < center.values.size(); ++i) {
      const auto& v = spec.variables[i];
      if (v.is_discrete()) {
        const long long z = discrete_neighbor_halfwidth(v);
        const auto c = static_cast<long long>(std::llround(unscale_from_unit(center.values[i], v)));
        const long long lo = std::max(v.grid_lower(), c - z);
        const long long hi = std::min(v.grid_upper(), c + z);
        nb.values[i] = scale_to_unit(static_cast<double>(rng.uniform_int(lo, hi)), v);
      } else {
        double x = rng.normal(center.values[i], kNeighborStd);
        int redraws = 0;
        while ((x < 0.0 || x > 1.0) && redraws < kNeighborRedrawCap) {
          x = rng.normal(center.values[i], kNeighborStd);
          ++redraws;
        }
        nb.values[i] = std::min(1.0, std::max(0.0, x));
      }
    }
    out[s] = std::move(nb);
  }
  return out;
}

std::string SearchSpace::to_json() const {
  json j;
  j["version"] = 1;
  j["algorithms"] = json::array();
  for (const auto& a : algorithms) {
    json ja;
    ja["name"] = a.name;
    ja["variables"] = json::array();
    for (const auto& v : a.variables) {
      json jv;
      jv["name"] = v.name;
      jv["kind"] = var_kind_name(v.kind);
      if (v.kind == VarKind::categorical) {
        jv["cardinality"] = v.cardinality;
      } else {
        jv["lower"] = v.lower;
        jv["upper"] = v.upper;
        if (v.kind == VarKind::continuous) jv["log_scale"] = v.log_scale;
      }
      ja["variables"].push_back(jv);
    }
    j["algorithms"].push_back(ja);
  }
  return j.dump(2);
}

SearchSpace SearchSpace::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("search space: invalid JSON: ") + e.what());
  }
  if (!j.contains("algorithms")) throw ConfigError("search space: missing 'algorithms'");
  if (j.value("version", 1) != 1) throw ConfigError("search space: unsupported version");
  SearchSpace space;
  for (const auto& ja : j["algorithms"]) {
    AlgorithmSpec a;
    a.name = ja.value("name", "");
    for (const auto& jv : ja.value("variables", json::array())) {
      VariableSpec v;
      v.name = jv.value("name", "");
      v.kind = var_kind_from_name(jv.value("kind", "continuous"));
      if (v.kind == VarKind::categorical) {
        v.cardinality = jv.value("cardinality", 0);
        v.lower = 1.0;
        v.upper = static_cast<double>(v.cardinality);
      } else {
        v.lower = jv.value("lower", 0.0);
        v.upper = jv.value("upper", 1.0);
        v.log_scale = jv.value("log_scale", false);
      }
      a.variables.push_back(v);
    }
    space.algorithms.push_back(std::move(a));
  }
  space.validate();
  return space;
}

SearchSpace SearchSpace::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open search space file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void SearchSpace::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write search space file '" + path + "'");
  out << to_json() << "\n";
}

}  // namespace cashbo
