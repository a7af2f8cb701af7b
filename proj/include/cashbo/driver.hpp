#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cashbo/bench.hpp"
#include "cashbo/mlp.hpp"
#include "cashbo/ptem.hpp"
#include "cashbo/space.hpp"
#include "cashbo/surrogate.hpp"

namespace cashbo {

// proposed*: multi-task surrogate over embedded points. The random-ptem arm
// is mechanically the proposed arm; it differs only in how the caller picked
// the bundle. independent_gp: one single-task GP per algorithm on unit
// coordinates. random_search: uniform draws.
enum class Arm {
  proposed,
  proposed_no_pretrain,
  proposed_random_ptem,
  independent_gp,
  random_search,
};

Arm arm_from_name(const std::string& name);
std::string arm_name(Arm arm);

// Objective callback: unit-scaled point in, score in [0,1] out. Throwing
// signals an evaluation failure and is handled per the config's policy.
using Objective = std::function<double(const HpVector&)>;

struct RunConfig {
  SearchSpace space;
  Arm arm = Arm::proposed;
  int iterations = 50;
  int init_per_algo = 2;
  double alpha = 1e-3;
  double beta = 1e-4;  // recorded for provenance; pre-training happens upstream
  int latent_dim = kLatentDim;
  int fit_steps = 50;
  std::uint64_t seed = 0;
  MaskMode mask = MaskMode::last_layer;
  bool fail_fast = false;
  std::string ptem_source = "none";  // provenance label for the log
  std::optional<PtemBundle> ptem;

  // Arm-specific consistency: proposed arms that transfer need a bundle whose
  // fingerprint matches the space; every other arm must not carry one.
  void validate() const;
};

struct RunRecord {
  bool init = false;
  int t = 0;  // 1-based BO iteration, 0 for init draws
  int algo = 0;
  std::vector<double> unit;
  std::vector<double> raw;
  bool ok = true;
  std::string error;  // set when !ok
  double y = 0.0;     // valid when ok
  double y_best = 0.0;
  double acq = 0.0;            // EI at the chosen point; 0 for init/random draws
  std::vector<double> kernel;  // packed kernel params after the fit, empty otherwise
};

struct RunResult {
  int algo = 0;
  std::vector<double> unit;
  std::vector<double> raw;
  double y_best = 0.0;
};

struct RunLog {
  std::string arm;
  std::uint64_t seed = 0;
  int iterations = 0;
  int init_per_algo = 0;
  std::string config_line;  // structured-text snapshot, first line of the file
  std::vector<RunRecord> records;
  RunResult result;

  // y_best after each BO iteration, length = iterations.
  std::vector<double> best_trace() const;

  std::string to_jsonl() const;
  static RunLog from_jsonl(const std::string& text);
};

void save_run_log(const RunLog& log, const std::string& path);
RunLog load_run_log(const std::string& path);

// Algorithm-1 loop for every arm. Evaluation failures are recorded and
// skipped unless cfg.fail_fast; a run with zero successful evaluations has
// no incumbent and raises an evaluation error at the end. Iterations where
// too few observations exist to fit fall back to a uniform draw.
RunLog run_bo(const RunConfig& cfg, const Objective& objective);

// Evaluates the suite's tasks with a private noise stream; deterministic
// given the seed and call sequence.
Objective make_synthetic_objective(const SyntheticSuite& suite, std::uint64_t seed);

struct ArmSummary {
  std::string arm;
  // Entry per BO iteration t = 1..T.
  std::vector<double> rank_mean, rank_se, ybest_mean, ybest_se;
};

struct Report {
  int iterations = 0;
  std::vector<ArmSummary> arms;
  std::string ranks_tsv() const;
  std::string curves_tsv() const;
};

// Paired per-seed ranking across arms (rank 1 = highest y_best, ties share
// the average rank) plus mean best-so-far curves. Logs must agree on T and
// every arm must cover the same seeds.
Report make_report(const std::vector<RunLog>& logs);

// Observation sets as one structured-text record per line.
std::string observations_to_jsonl(const ObservationSet& obs);
ObservationSet observations_from_jsonl(const std::string& text);
void save_observations(const ObservationSet& obs, const std::string& path);
ObservationSet load_observations(const std::string& path);

}  // namespace cashbo
