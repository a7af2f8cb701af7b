#include "cashbo/acquire.hpp"

#include <cmath>

#include "cashbo/error.hpp"
#include "cashbo/parallel.hpp"

namespace cashbo {

double expected_improvement(double mu, double sigma, double y_best) {
  const double diff = mu - y_best;
  if (sigma <= 0.0) return diff > 0.0 ? diff : 0.0;
  const double z = diff / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  const double ei = diff * cdf + sigma * pdf;
  return ei > 0.0 ? ei : 0.0;
}

double acquisition_at(const Surrogate& s, const HpVector& x, double y_best) {
  const auto p = s.posterior(x);
  return expected_improvement(p.mean, std::sqrt(p.var), y_best);
}

namespace {

struct Candidate {
  HpVector x;
  double value = 0.0;
};

// Evaluate a point, enumerating every combination of its small categorical
// coordinates. The best combination becomes the candidate.
Candidate evaluate_expanded(const Surrogate& s, const SearchSpace& space, const HpVector& pt,
                            double y_best, int cat_limit) {
  const auto& vars = space.algorithms[pt.algo].variables;
  std::vector<std::size_t> cat_dims;
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i].kind == VarKind::categorical && vars[i].cardinality <= cat_limit)
      cat_dims.push_back(i);

  Candidate best;
  best.x = pt;
  best.value = -1.0;
  std::vector<long long> level(cat_dims.size(), 1);
  HpVector probe = pt;
  while (true) {
    for (std::size_t c = 0; c < cat_dims.size(); ++c)
      probe.values[cat_dims[c]] = scale_to_unit(static_cast<double>(level[c]), vars[cat_dims[c]]);
    const double v = acquisition_at(s, probe, y_best);
    if (v > best.value) {
      best.value = v;
      best.x = probe;
    }
    // Odometer over categorical levels; empty cat_dims runs exactly once.
    std::size_t c = 0;
    for (; c < cat_dims.size(); ++c) {
      if (level[c] < vars[cat_dims[c]].cardinality) {
        ++level[c];
        break;
      }
      level[c] = 1;
    }
    if (c == cat_dims.size()) break;
  }
  return best;
}

struct RestartOutcome {
  Candidate best;
  double init_value = 0.0;
  long iterations = 0;
};

RestartOutcome run_restart(const Surrogate& s, const SearchSpace& space, int algo, double y_best,
                           Rng rng, const AcqOptions& opt) {
  RestartOutcome out;
  HpVector center = sample_uniform(space, algo, rng);
  Candidate incumbent = evaluate_expanded(s, space, center, y_best, opt.exhaustive_cat_limit);
  out.init_value = incumbent.value;
  center = incumbent.x;

  for (int it = 0; it < opt.max_iters; ++it) {
    ++out.iterations;
    const auto nbs = neighbor_samples(center, space, rng);
    Candidate best_nb;
    best_nb.value = -1.0;
    for (const auto& nb : nbs) {
      const auto c = evaluate_expanded(s, space, nb, y_best, opt.exhaustive_cat_limit);
      if (c.value > best_nb.value) best_nb = c;
    }
    if (best_nb.value > incumbent.value) {
      incumbent = best_nb;
      center = incumbent.x;
    } else {
      break;
    }
  }
  out.best = incumbent;
  return out;
}

}  // namespace

AcqResult maximize_acquisition(const Surrogate& s, const SearchSpace& space, double y_best,
                               Rng& rng, const AcqOptions& opt) {
  const int M = space.num_algorithms();
  if (M != s.num_tasks()) throw ConfigError("space and surrogate disagree on algorithm count");
  const int total = M * opt.restarts;
  std::vector<RestartOutcome> outcomes(total);

  // Substreams depend only on (seed, tag): identical results on any schedule.
  std::vector<Rng> streams;
  streams.reserve(total);
  for (int m = 0; m < M; ++m)
    for (int r = 0; r < opt.restarts; ++r)
      streams.push_back(rng.fork(static_cast<std::uint64_t>(m) * opt.restarts + r));

#pragma omp parallel for schedule(dynamic) num_threads(parallel::effective_threads()) \
    if (parallel::enabled())
  for (int idx = 0; idx < total; ++idx)
    outcomes[idx] = run_restart(s, space, idx / opt.restarts, y_best, streams[idx], opt);

  AcqResult result;
  result.restarts = total;
  result.restart_init_values.reserve(total);
  bool have = false;
  for (int idx = 0; idx < total; ++idx) {
    const auto& o = outcomes[idx];
    result.iterations += o.iterations;
    result.restart_init_values.push_back(o.init_value);
    // Fixed scan order makes the tie-break (value, algorithm, restart) exact.
    if (!have || o.best.value > result.value) {
      have = true;
      result.value = o.best.value;
      result.x = o.best.x;
    }
  }
  return result;
}

}  // namespace cashbo
