#pragma once

#include <vector>

#include "cashbo/kernels.hpp"
#include "cashbo/mlp.hpp"
#include "cashbo/ptem.hpp"
#include "cashbo/space.hpp"

namespace cashbo {

// One scored evaluation: unit-scaled point and its objective value.
struct Observation {
  HpVector x;
  double y = 0.0;
};
using ObservationSet = std::vector<Observation>;

// Kernel hyper-parameters of the multi-task GP. Positive quantities live in
// log domain; the task covariance is rank 1 plus diagonal.
struct KernelParams {
  double log_ell = 0.0;
  std::vector<double> w;
  std::vector<double> log_v;
  double log_noise = 0.0;

  // Mild cross-task coupling at start: w = 0.5, v = 1, ell = 0.5,
  // noise variance 1e-2.
  static KernelParams init(int num_tasks);

  int num_tasks() const { return static_cast<int>(w.size()); }
  double ell() const { return std::exp(log_ell); }
  double noise() const { return std::exp(log_noise); }
  TaskCov task_cov() const;

  // Flat layout [log_ell, w..., log_v..., log_noise] for the optimizer.
  std::vector<double> pack() const;
  void unpack(const std::vector<double>& p);
  // Keep the optimizer inside a numerically safe box:
  // ell in [1e-3,1e3], noise in [1e-8,1e2], v in [1e-8,1e3], |w| <= 1e3.
  void clamp();
};

struct Posterior {
  double mean = 0.0;
  double var = 0.0;
};

struct FitOptions {
  int steps = 200;
  double lr_kernel = 1e-2;
  double lr_embed = 1e-3;
  double alpha = 1e-3;
  MaskMode mask = MaskMode::last_layer;
  bool standardize = true;
};

// Multi-task GP over (embedded point, algorithm) pairs with prior mean
// mu0(u) = -||u||^2 + y_best. Observations are standardized per refresh and
// the same affine map is applied to the prior mean, so posteriors come back
// in raw score units.
class Surrogate {
public:
  Surrogate(std::vector<Mlp> models, double prior_y_best, bool standardize = true);

  int num_tasks() const { return static_cast<int>(models_.size()); }
  const std::vector<Mlp>& models() const { return models_; }
  std::vector<Mlp>& models() { return models_; }
  const KernelParams& params() const { return params_; }
  KernelParams& params() { return params_; }
  double prior_y_best() const { return prior_y_best_; }
  void set_prior_best(double y);
  const ObservationSet& data() const { return obs_; }
  double jitter() const { return jitter_; }

  void set_data(ObservationSet obs);
  void add_observation(Observation o);

  // Rebuild every cache (embeddings, standardization, residuals, Cholesky)
  // from the current parameters. Must run after any parameter change before
  // posterior queries.
  void refresh();

  std::vector<double> embed(const HpVector& x) const;
  double prior_mean_raw(const std::vector<double>& u) const;

  // Posterior in raw units; with no observations returns the prior.
  Posterior posterior(const HpVector& x) const;

  // Regularized negative log marginal likelihood:
  //   1/2 r^T C^-1 r + 1/2 log|C| + alpha * sum_m (1/K_m) ||theta_m - pre_m||^2.
  // pre == nullptr drops the regularizer.
  double nll(double alpha, const PtemBundle* pre) const;

  // nll plus exact gradients. kgrad follows KernelParams::pack; egrad[m] is
  // the per-model parameter gradient with masked-out coordinates zeroed.
  double nll_grad(double alpha, const PtemBundle* pre, MaskMode mask, std::vector<double>& kgrad,
                  std::vector<std::vector<double>>& egrad) const;

  // Adam descent on nll over kernel params and unmasked embedding params.
  // Keeps the best iterate seen; returns its loss. Needs >= 2 observations.
  double fit(const FitOptions& opt, const PtemBundle* pre);

private:
  std::vector<Mlp> models_;
  KernelParams params_;
  double prior_y_best_ = 0.0;
  bool standardize_ = true;
  ObservationSet obs_;

  // Caches, valid when fresh_ is set.
  bool fresh_ = false;
  std::vector<HpVector> pts_;
  std::vector<int> tasks_;
  Matrix U_;
  double shift_ = 0.0, scale_ = 1.0;
  Vector r_;  // standardized residual y_hat - mu0_hat
  Matrix L_;
  double jitter_ = 0.0;
  Vector a_;  // C^-1 r

  void require_fresh() const;
};

}  // namespace cashbo
