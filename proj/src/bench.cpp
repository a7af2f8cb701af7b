#include "cashbo/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cashbo/error.hpp"

namespace cashbo {

namespace {

constexpr int kSuiteDims[] = {2, 3, 3, 5};
constexpr int kSuiteAlgos = 4;

VariableSpec synthetic_variable(int j) {
  VariableSpec v;
  v.name = "x" + std::to_string(j);
  v.kind = VarKind::continuous;
  if (j == 1) {
    v.lower = 1e-3;
    v.upper = 1e3;
    v.log_scale = true;
  } else if (j == 0) {
    v.lower = 0.0;
    v.upper = 10.0;
  } else {
    v.lower = -5.0;
    v.upper = 5.0;
  }
  return v;
}

}  // namespace

SyntheticSuite make_synthetic_suite(double descriptor, std::uint64_t family_seed,
                                    const std::string& id) {
  if (descriptor < 0.0 || descriptor > 1.0)
    throw ConfigError("suite descriptor must lie in [0,1]");
  SyntheticSuite suite;
  suite.id = id;
  suite.family_seed = family_seed;
  suite.descriptor = descriptor;

  Rng family(family_seed);
  const int d = kSyntheticLatentDim;
  for (int m = 0; m < kSuiteAlgos; ++m) {
    const int dim = kSuiteDims[m];
    AlgorithmSpec algo;
    algo.name = "alg" + std::to_string(m);
    for (int j = 0; j < dim; ++j) algo.variables.push_back(synthetic_variable(j));
    suite.space.algorithms.push_back(algo);

    auto rng = family.fork(m);
    SyntheticTask task;
    task.algo = m;
    task.dim = dim;
    // Optimum slides on a fixed segment inside the cube as the descriptor
    // moves, so same-family suites are geometrically related.
    task.u_star.resize(dim);
    for (int j = 0; j < dim; ++j) {
      const double a = 0.2 + 0.6 * rng.uniform();
      const double b = 0.2 + 0.6 * rng.uniform();
      task.u_star[j] = (1.0 - descriptor) * a + descriptor * b;
    }
    task.S.resize(d * dim);
    for (auto& s : task.S) s = rng.uniform_real(-1.5, 1.5);
    // Rotation times a mild per-axis gain keeps the bowl depth order one.
    const double theta = rng.uniform_real(0.0, 2.0 * 3.14159265358979323846);
    const double q0 = 0.6 + 0.3 * rng.uniform();
    const double q1 = 0.6 + 0.3 * rng.uniform();
    task.Q = {std::cos(theta) * q0, -std::sin(theta) * q1,
              std::sin(theta) * q0, std::cos(theta) * q1};
    suite.tasks.push_back(std::move(task));
  }
  suite.space.validate();
  return suite;
}

double synth_eval(const SyntheticTask& task, const HpVector& x, Rng& rng) {
  if (x.algo != task.algo) throw ConfigError("point belongs to a different algorithm");
  if (static_cast<int>(x.values.size()) != task.dim)
    throw ConfigError("point dimension mismatch");
  const int d = kSyntheticLatentDim;
  double bowl = 0.0;
  std::vector<double> t(d);
  for (int i = 0; i < d; ++i) {
    double z = 0.0;
    for (int j = 0; j < task.dim; ++j)
      z += task.S[i * task.dim + j] * (x.values[j] - task.u_star[j]);
    t[i] = std::tanh(z);
  }
  for (int i = 0; i < d; ++i) {
    double c = 0.0;
    for (int k = 0; k < d; ++k) c += task.Q[i * d + k] * t[k];
    bowl += c * c;
  }
  double y = task.y_star - bowl;
  if (task.noise_std > 0.0) y += task.noise_std * rng.normal();
  return std::clamp(y, 0.0, 1.0);
}

ObservationSet sample_source_observations(const SyntheticSuite& suite, int per_algo,
                                          Rng& rng) {
  if (per_algo < 1) throw ConfigError("need at least one observation per algorithm");
  ObservationSet out;
  out.reserve(per_algo * suite.tasks.size());
  for (const auto& task : suite.tasks)
    for (int i = 0; i < per_algo; ++i) {
      Observation o;
      o.x = sample_uniform(suite.space, task.algo, rng);
      o.y = synth_eval(task, o.x, rng);
      out.push_back(std::move(o));
    }
  return out;
}

std::vector<double> SyntheticSuite::meta_extras() const { return {descriptor}; }

DatasetStats SyntheticSuite::dataset_stats() const {
  // Synthetic stand-ins: smooth in the descriptor so meta-feature distance
  // tracks transfer distance.
  DatasetStats s;
  s.n_samples = 500.0 + 4500.0 * descriptor;
  s.n_features = 8.0 + 24.0 * descriptor;
  s.n_classes = 2.0 + 8.0 * descriptor;
  s.class_entropy = 0.5 + 0.5 * descriptor;
  s.fraction_categorical = 0.25;
  s.fraction_missing = 0.05 * descriptor;
  s.skew_mean = 2.0 * descriptor - 1.0;
  s.skew_std = 0.5;
  s.extras = meta_extras();
  return s;
}

std::vector<double> SyntheticSuite::meta_features() const {
  return make_meta_features(dataset_stats(), kSyntheticExtraLen);
}

std::string suite_to_json(const SyntheticSuite& suite) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["id"] = suite.id;
  j["family_seed"] = suite.family_seed;
  j["descriptor"] = suite.descriptor;
  return j.dump(2) + "\n";
}

SyntheticSuite suite_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("not a suite config");
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != 1)
    throw ConfigError("unsupported suite config version");
  if (!j.contains("id") || !j["id"].is_string() || !j.contains("family_seed") ||
      !j["family_seed"].is_number() || !j.contains("descriptor") ||
      !j["descriptor"].is_number())
    throw ConfigError("suite config is missing fields");
  return make_synthetic_suite(j["descriptor"].get<double>(),
                              j["family_seed"].get<std::uint64_t>(),
                              j["id"].get<std::string>());
}

void save_suite(const SyntheticSuite& suite, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << suite_to_json(suite);
}

SyntheticSuite load_suite(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return suite_from_json(buf.str());
}

}  // namespace cashbo
