#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cashbo/rank.hpp"
#include "cashbo/rng.hpp"
#include "cashbo/space.hpp"
#include "cashbo/surrogate.hpp"

namespace cashbo {

// Dimension of the shared quadratic bowl every synthetic task maps into.
inline constexpr int kSyntheticLatentDim = 2;
// Meta-feature extras exported by synthetic suites (just the descriptor).
inline constexpr int kSyntheticExtraLen = 1;

// One synthetic objective over the unit cube:
// y = clamp(y_star - ||Q tanh(S (u - u_star))||^2 + noise, 0, 1).
struct SyntheticTask {
  int algo = 0;
  int dim = 0;
  double y_star = 0.9;
  double noise_std = 0.01;
  std::vector<double> u_star;  // optimum, strictly inside the unit cube
  std::vector<double> S;       // row-major kSyntheticLatentDim x dim
  std::vector<double> Q;       // row-major kSyntheticLatentDim x kSyntheticLatentDim
};

// A family of four synthetic "algorithms" with dims {2,3,3,5}. Suites built
// from the same family seed share every map and anchor; the descriptor only
// slides the planted optima, so descriptor distance is the transfer distance.
struct SyntheticSuite {
  std::string id;
  std::uint64_t family_seed = 0;
  double descriptor = 0.0;  // in [0,1]
  SearchSpace space;
  std::vector<SyntheticTask> tasks;

  std::vector<double> meta_extras() const;
  DatasetStats dataset_stats() const;
  std::vector<double> meta_features() const;
};

SyntheticSuite make_synthetic_suite(double descriptor, std::uint64_t family_seed,
                                    const std::string& id);

// Deterministic given the rng; noise is drawn only when noise_std > 0.
double synth_eval(const SyntheticTask& task, const HpVector& x, Rng& rng);

// per_algo uniform evaluations of every algorithm, in algorithm order.
ObservationSet sample_source_observations(const SyntheticSuite& suite, int per_algo,
                                          Rng& rng);

// Regeneration parameters as a small structured-text config file.
std::string suite_to_json(const SyntheticSuite& suite);
SyntheticSuite suite_from_json(const std::string& text);
void save_suite(const SyntheticSuite& suite, const std::string& path);
SyntheticSuite load_suite(const std::string& path);

// Child-process objective speaking one structured-text object per line:
// request {"id", "algorithm", "values": {name: raw value}}, response either
// {"id", "accuracy"} or {"id", "error"}. One request is in flight at a time.
class ExternalEvaluator {
 public:
  ExternalEvaluator(std::vector<std::string> command, double timeout_seconds = 60.0);
  ~ExternalEvaluator();
  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  // Sends the unit point's raw (unscaled) values; returns the accuracy.
  double evaluate(const SearchSpace& space, const HpVector& x);

 private:
  std::string read_line();

  long long pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  double timeout_seconds_;
  long long next_id_ = 1;
  std::string buffer_;
};

}  // namespace cashbo
