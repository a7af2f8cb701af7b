#pragma once

#include <vector>

#include "cashbo/space.hpp"
#include "cashbo/surrogate.hpp"

namespace cashbo {

// Expected improvement of a Gaussian posterior over the incumbent:
// sigma > 0 -> (mu - y_best) Phi(z) + sigma phi(z), z = (mu - y_best)/sigma;
// sigma = 0 -> max(mu - y_best, 0).
double expected_improvement(double mu, double sigma, double y_best);

// EI at a point through the surrogate posterior.
double acquisition_at(const Surrogate& s, const HpVector& x, double y_best);

struct AcqOptions {
  int restarts = 10;
  int max_iters = 100;
  // Categorical dimensions at or below this cardinality are enumerated
  // exhaustively inside each candidate evaluation.
  int exhaustive_cat_limit = 4;
};

struct AcqResult {
  HpVector x;
  double value = 0.0;
  int restarts = 0;
  long iterations = 0;
  // EI at each restart's initial center, in (algorithm, restart) order.
  std::vector<double> restart_init_values;
};

// Per-algorithm multi-restart hill climb: each restart repeatedly draws 10
// neighbors of the incumbent, moves on strict improvement, stops otherwise
// or at the iteration cap. Deterministic given rng; restarts use pre-forked
// substreams so the parallel route reproduces the serial one.
AcqResult maximize_acquisition(const Surrogate& s, const SearchSpace& space, double y_best,
                               Rng& rng, const AcqOptions& opt = {});

}  // namespace cashbo
