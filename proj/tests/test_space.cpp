// Search-space scaling, sampling, and neighbor-generation tests.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "cashbo/error.hpp"
#include "cashbo/space.hpp"

using namespace cashbo;

namespace {

VariableSpec cont(double lo, double hi, bool log_scale = false) {
  VariableSpec v;
  v.name = "c";
  v.kind = VarKind::continuous;
  v.lower = lo;
  v.upper = hi;
  v.log_scale = log_scale;
  return v;
}

VariableSpec count_var(long long lo, long long hi) {
  VariableSpec v;
  v.name = "n";
  v.kind = VarKind::count;
  v.lower = static_cast<double>(lo);
  v.upper = static_cast<double>(hi);
  return v;
}

VariableSpec cat(int k) {
  VariableSpec v;
  v.name = "k";
  v.kind = VarKind::categorical;
  v.cardinality = k;
  v.lower = 1.0;
  v.upper = static_cast<double>(k);
  return v;
}

SearchSpace one_algo_space(std::vector<VariableSpec> vars) {
  SearchSpace s;
  AlgorithmSpec a;
  a.name = "a0";
  a.variables = std::move(vars);
  s.algorithms.push_back(std::move(a));
  return s;
}

}  // namespace

TEST_CASE("scaling maps bounds to 0 and 1") {
  const auto lin = cont(-2.0, 6.0);
  CHECK(scale_to_unit(-2.0, lin) == 0.0);
  CHECK(scale_to_unit(6.0, lin) == 1.0);

  const auto lg = cont(1e-4, 1e2, true);
  CHECK(scale_to_unit(1e-4, lg) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(scale_to_unit(1e2, lg) == doctest::Approx(1.0).epsilon(1e-12));

  const auto cnt = count_var(1, 50);
  CHECK(scale_to_unit(1.0, cnt) == 0.0);
  CHECK(scale_to_unit(50.0, cnt) == 1.0);
}

TEST_CASE("count 25 on grid 1..50 scales to 24/49 and round-trips") {
  const auto cnt = count_var(1, 50);
  const double unit = scale_to_unit(25.0, cnt);
  CHECK(unit == doctest::Approx(24.0 / 49.0).epsilon(1e-15));
  CHECK(unscale_from_unit(unit, cnt) == 25.0);
}

TEST_CASE("round-trip is exact on grids and tight for continuous") {
  Rng rng(7);

  const auto cnt = count_var(2, 512);
  for (long long c = 2; c <= 512; ++c) {
    const double raw = static_cast<double>(c);
    CHECK(unscale_from_unit(scale_to_unit(raw, cnt), cnt) == raw);
  }

  const auto kat = cat(4);
  for (long long c = 1; c <= 4; ++c) {
    const double raw = static_cast<double>(c);
    CHECK(unscale_from_unit(scale_to_unit(raw, kat), kat) == raw);
  }

  const auto lin = cont(-3.0, 11.0);
  const auto lg = cont(1e-5, 1e3, true);
  for (int i = 0; i < 1000; ++i) {
    const double rl = rng.uniform_real(-3.0, 11.0);
    CHECK(unscale_from_unit(scale_to_unit(rl, lin), lin) ==
          doctest::Approx(rl).epsilon(1e-12));
    const double rg = std::exp(rng.uniform_real(std::log(1e-5), std::log(1e3)));
    CHECK(unscale_from_unit(scale_to_unit(rg, lg), lg) ==
          doctest::Approx(rg).epsilon(1e-12));
  }
}

TEST_CASE("out-of-range and off-grid values are rejected") {
  const auto lin = cont(0.0, 1.0);
  CHECK_THROWS_AS(scale_to_unit(1.5, lin), ConfigError);
  CHECK_THROWS_AS(scale_to_unit(-0.1, lin), ConfigError);
  const auto cnt = count_var(1, 50);
  CHECK_THROWS_AS(scale_to_unit(25.5, cnt), ConfigError);
  CHECK_THROWS_AS(scale_to_unit(51.0, cnt), ConfigError);
  CHECK_THROWS_AS(unscale_from_unit(1.01, lin), ConfigError);
}

TEST_CASE("variable validation rejects malformed specs") {
  auto bad = cont(2.0, 2.0);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto badlog = cont(-1.0, 1.0, true);
  CHECK_THROWS_AS(badlog.validate(), ConfigError);
  auto badcnt = count_var(1, 50);
  badcnt.upper = 50.5;
  CHECK_THROWS_AS(badcnt.validate(), ConfigError);
  auto badcat = cat(1);
  CHECK_THROWS_AS(badcat.validate(), ConfigError);
}

TEST_CASE("sample_uniform stays in domain and is seed-deterministic") {
  const auto space =
      one_algo_space({cont(0.0, 1.0), cont(1e-3, 1e1, true), count_var(1, 50), cat(3)});

  Rng rng_a(42), rng_b(42);
  for (int i = 0; i < 200; ++i) {
    const auto hp = sample_uniform(space, 0, rng_a);
    const auto hp2 = sample_uniform(space, 0, rng_b);
    REQUIRE(hp.values.size() == 4);
    CHECK(hp.values == hp2.values);
    for (double x : hp.values) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
    // Discrete coordinates sit exactly on grid images.
    const auto raw2 = unscale_from_unit(hp.values[2], space.algorithms[0].variables[2]);
    CHECK(scale_to_unit(raw2, space.algorithms[0].variables[2]) == hp.values[2]);
    const auto raw3 = unscale_from_unit(hp.values[3], space.algorithms[0].variables[3]);
    CHECK(scale_to_unit(raw3, space.algorithms[0].variables[3]) == hp.values[3]);
  }

  // All grid levels get hit eventually.
  std::set<double> levels;
  Rng rng_c(1);
  for (int i = 0; i < 500; ++i)
    levels.insert(unscale_from_unit(sample_uniform(space, 0, rng_c).values[3],
                                    space.algorithms[0].variables[3]));
  CHECK(levels.size() == 3);
}

TEST_CASE("discrete neighbor half-width follows the floor rule") {
  CHECK(discrete_neighbor_halfwidth(count_var(1, 50)) == 5);
  CHECK(discrete_neighbor_halfwidth(count_var(2, 512)) == 51);
  CHECK(discrete_neighbor_halfwidth(cat(2)) == 0);
  CHECK(discrete_neighbor_halfwidth(count_var(1, 9)) == 0);
  CHECK(discrete_neighbor_halfwidth(count_var(0, 9)) == 1);
}

TEST_CASE("neighbor_samples returns 10 in-domain points around random centers") {
  const auto space =
      one_algo_space({cont(0.0, 1.0), count_var(1, 50), cat(2), cont(1e-2, 1e2, true)});
  const auto& vars = space.algorithms[0].variables;
  Rng rng(123);

  for (int trial = 0; trial < 10000; ++trial) {
    const auto center = sample_uniform(space, 0, rng);
    const auto nbs = neighbor_samples(center, space, rng);
    REQUIRE(nbs.size() == 10);
    for (const auto& nb : nbs) {
      REQUIRE(nb.values.size() == center.values.size());
      for (std::size_t i = 0; i < nb.values.size(); ++i) {
        CHECK(nb.values[i] >= 0.0);
        CHECK(nb.values[i] <= 1.0);
        if (vars[i].is_discrete()) {
          const auto c =
              static_cast<long long>(std::llround(unscale_from_unit(center.values[i], vars[i])));
          const auto n =
              static_cast<long long>(std::llround(unscale_from_unit(nb.values[i], vars[i])));
          const long long z = discrete_neighbor_halfwidth(vars[i]);
          CHECK(n >= std::max(vars[i].grid_lower(), c - z));
          CHECK(n <= std::min(vars[i].grid_upper(), c + z));
          // Exactly on a grid image.
          CHECK(scale_to_unit(static_cast<double>(n), vars[i]) == nb.values[i]);
        }
      }
    }
  }
}

TEST_CASE("continuous neighbor spread matches the 0.1 perturbation scale") {
  const auto space = one_algo_space({cont(0.0, 1.0)});
  HpVector center;
  center.algo = 0;
  center.values = {0.5};
  Rng rng(2024);

  double sum = 0.0, sumsq = 0.0;
  const int draws = 100000;
  int seen = 0;
  while (seen < draws) {
    for (const auto& nb : neighbor_samples(center, space, rng)) {
      const double off = nb.values[0] - 0.5;
      sum += off;
      sumsq += off * off;
      ++seen;
    }
  }
  const double mean = sum / seen;
  const double sd = std::sqrt(sumsq / seen - mean * mean);
  CHECK(sd > 0.08);
  CHECK(sd < 0.12);
}

TEST_CASE("neighbor_samples is deterministic for a fixed seed") {
  const auto space = one_algo_space({cont(0.0, 1.0), count_var(1, 50)});
  HpVector center;
  center.algo = 0;
  center.values = {0.2, scale_to_unit(10.0, space.algorithms[0].variables[1])};

  Rng a(99), b(99);
  const auto na = neighbor_samples(center, space, a);
  const auto nb = neighbor_samples(center, space, b);
  REQUIRE(na.size() == nb.size());
  for (std::size_t i = 0; i < na.size(); ++i) CHECK(na[i].values == nb[i].values);
}

TEST_CASE("rng fork gives substreams independent of consumption") {
  Rng a(5), b(5);
  (void)a.uniform();
  (void)a.uniform();
  auto fa = a.fork(17);
  auto fb = b.fork(17);
  for (int i = 0; i < 16; ++i) CHECK(fa.next_u64() == fb.next_u64());
  // Distinct tags give distinct streams.
  auto fc = b.fork(18);
  int same = 0;
  auto fd = b.fork(17);
  for (int i = 0; i < 16; ++i) same += (fc.next_u64() == fd.next_u64());
  CHECK(same == 0);
}

TEST_CASE("space JSON serialization round-trips and fingerprints are stable") {
  SearchSpace s;
  {
    AlgorithmSpec a;
    a.name = "svm";
    a.variables = {cont(1e-3, 1e3, true), cont(0.0, 1.0)};
    a.variables[0].name = "C";
    a.variables[1].name = "gamma";
    s.algorithms.push_back(a);
  }
  {
    AlgorithmSpec a;
    a.name = "knn";
    a.variables = {count_var(1, 50), cat(2)};
    a.variables[0].name = "k";
    a.variables[1].name = "weights";
    s.algorithms.push_back(a);
  }
  s.validate();

  const auto text = s.to_json();
  const auto back = SearchSpace::from_json(text);
  CHECK(back.num_algorithms() == 2);
  CHECK(back.dim(0) == 2);
  CHECK(back.dim(1) == 2);
  CHECK(back.algorithms[1].variables[1].kind == VarKind::categorical);
  CHECK(back.algorithms[1].variables[1].cardinality == 2);
  CHECK(back.fingerprint() == s.fingerprint());

  // Fingerprint reacts to bound changes.
  auto mutated = s;
  mutated.algorithms[0].variables[0].upper = 1e4;
  CHECK(mutated.fingerprint() != s.fingerprint());

  CHECK_THROWS_AS(SearchSpace::from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(SearchSpace::from_json("{\"version\":9,\"algorithms\":[]}"), ConfigError);
}
