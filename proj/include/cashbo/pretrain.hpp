#pragma once

#include <cstdint>
#include <vector>

#include "cashbo/mlp.hpp"
#include "cashbo/ptem.hpp"
#include "cashbo/space.hpp"
#include "cashbo/surrogate.hpp"

namespace cashbo {

struct PretrainConfig {
  double beta = 1e-4;
  int epochs = 300;         // outer embedding steps
  int inner_steps = 5;      // classifier steps per outer step
  double lr_embed = 1e-3;
  double lr_classifier = 1e-2;
  int latent_dim = kLatentDim;
  int classifier_hidden = 16;
  std::uint64_t seed = 0;
};

struct PretrainReport {
  double initial_objective = 0.0;  // combined objective at epoch 0
  double final_objective = 0.0;    // at the returned (best) parameters
  double initial_pre_loss = 0.0;   // sum of quadratic-surface losses
  double final_pre_loss = 0.0;
  bool degenerate = false;  // all source scores equal
  std::vector<double> objective_trace;
};

// Quadratic-surface regression loss for one algorithm's model:
// (1/N) sum_n (ytil_n - ||phi(lambda_n)||^2)^2 with ytil_n = y_best - y_n.
double pretrain_loss(const Mlp& model, const ObservationSet& obs, double y_best);
// Same value, accumulating d/dtheta into grad (resized if empty).
double pretrain_loss_grad(const Mlp& model, const ObservationSet& obs, double y_best,
                          std::vector<double>& grad);

// Classifier output sigma(z) with the logit clamped to [-30, 30], so
// probabilities stay strictly inside (0, 1).
double classifier_prob(const Mlp& g, const std::vector<double>& u);

// Mean binary cross-entropy of g telling algorithm m (label 1) from m'
// (label 0) on their embedded points.
double adversarial_ce_loss(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                           const std::vector<std::vector<double>>& emb_mp);
// Gradient w.r.t. classifier parameters.
double adversarial_ce_grad_params(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                                  const std::vector<std::vector<double>>& emb_mp,
                                  std::vector<double>& grad);
// Gradients w.r.t. the embedded points themselves (per point, same order as
// inputs: m block then m' block).
double adversarial_ce_grad_inputs(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                                  const std::vector<std::vector<double>>& emb_mp,
                                  std::vector<std::vector<double>>& dudm,
                                  std::vector<std::vector<double>>& dudmp);

// Alternating min-max pre-training: inner_steps Adam steps per pair
// classifier on the cross-entropy (embeddings frozen), then one Adam step on
// sum_m pretrain_loss_m - beta * sum_pairs CE over all embedding parameters
// (classifiers frozen). Keeps the best-objective iterate. Requires at least
// two observations per algorithm. Deterministic under cfg.seed.
PtemBundle train_ptem(const ObservationSet& source_obs, const SearchSpace& space,
                      const PretrainConfig& cfg, PretrainReport* report = nullptr);

// Post-hoc probe: train a fresh classifier on frozen embeddings and report
// accuracy on held-out points. Used to measure how separable two algorithms'
// latent clouds remain after pre-training.
Mlp train_probe_classifier(const std::vector<std::vector<double>>& emb_m,
                           const std::vector<std::vector<double>>& emb_mp, int steps, double lr,
                           int hidden, Rng& rng);
double classifier_accuracy(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                           const std::vector<std::vector<double>>& emb_mp);

}  // namespace cashbo
