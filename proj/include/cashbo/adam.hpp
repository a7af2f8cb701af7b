#pragma once

#include <cmath>
#include <vector>

#include "cashbo/error.hpp"

namespace cashbo {

// Adam minimizer over one flat parameter block. Coordinates whose gradient
// is identically zero (masked-out parameters) accumulate zero moments and
// never move, so freezing is exact.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  explicit Adam(double learning_rate) : lr(learning_rate) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != grad.size()) throw ConfigError("adam: size mismatch");
    if (m.empty()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

}  // namespace cashbo
