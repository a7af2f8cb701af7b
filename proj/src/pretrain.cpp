#include "cashbo/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "cashbo/adam.hpp"
#include "cashbo/error.hpp"

namespace cashbo {

namespace {

constexpr double kLogitClamp = 30.0;

double clamp_logit(double z) { return std::min(kLogitClamp, std::max(-kLogitClamp, z)); }

// softplus(x) = log(1 + e^x) without overflow; -log sigma(z) = softplus(-z).
double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double pretrain_loss(const Mlp& model, const ObservationSet& obs, double y_best) {
  if (obs.empty()) throw ConfigError("pretrain loss needs at least one observation");
  double loss = 0.0;
  for (const auto& o : obs) {
    const auto u = model.forward(o.x.values);
    double sq = 0.0;
    for (double c : u) sq += c * c;
    const double ytil = y_best - o.y;
    loss += (ytil - sq) * (ytil - sq);
  }
  return loss / static_cast<double>(obs.size());
}

double pretrain_loss_grad(const Mlp& model, const ObservationSet& obs, double y_best,
                          std::vector<double>& grad) {
  if (obs.empty()) throw ConfigError("pretrain loss needs at least one observation");
  if (grad.empty()) grad.assign(model.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(obs.size());
  double loss = 0.0;
  std::vector<double> up;
  for (const auto& o : obs) {
    const auto u = model.forward(o.x.values);
    double sq = 0.0;
    for (double c : u) sq += c * c;
    const double ytil = y_best - o.y;
    loss += (ytil - sq) * (ytil - sq);
    // d/du of (ytil - ||u||^2)^2 = 4 (||u||^2 - ytil) u, averaged over points.
    up.assign(u.size(), 0.0);
    for (std::size_t c = 0; c < u.size(); ++c) up[c] = 4.0 * (sq - ytil) * u[c] * inv_n;
    model.backward(o.x.values, up, grad);
  }
  return loss * inv_n;
}

double classifier_prob(const Mlp& g, const std::vector<double>& u) {
  return sigmoid(clamp_logit(g.forward(u)[0]));
}

double adversarial_ce_loss(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                           const std::vector<std::vector<double>>& emb_mp) {
  if (emb_m.empty() || emb_mp.empty())
    throw ConfigError("adversarial loss needs points from both algorithms");
  double loss = 0.0;
  for (const auto& u : emb_m) loss += softplus(-clamp_logit(g.forward(u)[0]));
  for (const auto& u : emb_mp) loss += softplus(clamp_logit(g.forward(u)[0]));
  return loss / static_cast<double>(emb_m.size() + emb_mp.size());
}

namespace {

// Shared CE backward: dloss/dz = sigma(z) - label, zeroed where the clamp is
// active so gradients match the clamped forward value.
double ce_backward(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                   const std::vector<std::vector<double>>& emb_mp, std::vector<double>* pgrad,
                   std::vector<std::vector<double>>* dudm, std::vector<std::vector<double>>* dudmp) {
  const double inv_n = 1.0 / static_cast<double>(emb_m.size() + emb_mp.size());
  double loss = 0.0;
  if (dudm) dudm->assign(emb_m.size(), {});
  if (dudmp) dudmp->assign(emb_mp.size(), {});
  auto run = [&](const std::vector<double>& u, double label, std::vector<double>* du) {
    const double z_raw = g.forward(u)[0];
    const double z = clamp_logit(z_raw);
    loss += label > 0.5 ? softplus(-z) : softplus(z);
    double dz = sigmoid(z) - label;
    if (z_raw != z) dz = 0.0;  // clamp region is flat
    std::vector<double> local;
    std::vector<double>& sink = pgrad ? *pgrad : local;
    if (!pgrad) local.assign(g.param_count(), 0.0);
    const auto dx = g.backward(u, {dz * inv_n}, sink);
    if (du) *du = dx;
  };
  for (std::size_t i = 0; i < emb_m.size(); ++i)
    run(emb_m[i], 1.0, dudm ? &(*dudm)[i] : nullptr);
  for (std::size_t i = 0; i < emb_mp.size(); ++i)
    run(emb_mp[i], 0.0, dudmp ? &(*dudmp)[i] : nullptr);
  return loss * inv_n;
}

}  // namespace

double adversarial_ce_grad_params(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                                  const std::vector<std::vector<double>>& emb_mp,
                                  std::vector<double>& grad) {
  if (emb_m.empty() || emb_mp.empty())
    throw ConfigError("adversarial loss needs points from both algorithms");
  if (grad.empty()) grad.assign(g.param_count(), 0.0);
  return ce_backward(g, emb_m, emb_mp, &grad, nullptr, nullptr);
}

double adversarial_ce_grad_inputs(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                                  const std::vector<std::vector<double>>& emb_mp,
                                  std::vector<std::vector<double>>& dudm,
                                  std::vector<std::vector<double>>& dudmp) {
  if (emb_m.empty() || emb_mp.empty())
    throw ConfigError("adversarial loss needs points from both algorithms");
  return ce_backward(g, emb_m, emb_mp, nullptr, &dudm, &dudmp);
}

PtemBundle train_ptem(const ObservationSet& source_obs, const SearchSpace& space,
                      const PretrainConfig& cfg, PretrainReport* report) {
  space.validate();
  if (cfg.epochs < 1) throw ConfigError("pre-training needs at least one epoch");
  if (cfg.beta < 0.0) throw ConfigError("beta must be nonnegative");
  const int M = space.num_algorithms();

  std::vector<ObservationSet> by_algo(M);
  for (const auto& o : source_obs) {
    if (o.x.algo < 0 || o.x.algo >= M)
      throw ConfigError("source observation names an unknown algorithm");
    by_algo[o.x.algo].push_back(o);
  }
  for (int m = 0; m < M; ++m)
    if (by_algo[m].size() < 2)
      throw ConfigError("pre-training needs at least two observations per algorithm");

  double y_best = -std::numeric_limits<double>::infinity();
  double y_min = std::numeric_limits<double>::infinity();
  for (const auto& o : source_obs) {
    y_best = std::max(y_best, o.y);
    y_min = std::min(y_min, o.y);
  }
  const bool degenerate = y_best - y_min < 1e-12;
  if (degenerate)
    std::cerr << "warning: all source scores are equal; quadratic targets are zero\n";

  Rng rng(cfg.seed);
  auto init_rng = rng.fork(1);
  PtemBundle bundle = make_random_ptem(space, cfg.latent_dim, init_rng);
  bundle.y_best = y_best;

  struct Pair {
    int m, mp;
    Mlp g;
    Adam opt;
  };
  std::vector<Pair> pairs;
  const int d = cfg.latent_dim;
  for (int m = 0; m < M; ++m)
    for (int mp = m + 1; mp < M; ++mp) {
      auto sub = rng.fork(1000 + static_cast<std::uint64_t>(m) * M + mp);
      pairs.push_back(
          {m, mp, Mlp::create({d, cfg.classifier_hidden, 1}, sub), Adam(cfg.lr_classifier)});
    }

  std::vector<Adam> embed_opt(M, Adam(cfg.lr_embed));

  auto embeddings_of = [&](int m) {
    std::vector<std::vector<double>> out(by_algo[m].size());
    for (std::size_t i = 0; i < by_algo[m].size(); ++i)
      out[i] = bundle.models[m].forward(by_algo[m][i].x.values);
    return out;
  };

  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params(M);
  double best_pre_loss = 0.0;
  if (report) *report = PretrainReport{};
  if (report) report->degenerate = degenerate;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Inner: adapt each pair classifier to the frozen embeddings.
    std::vector<std::vector<std::vector<double>>> embs(M);
    for (int m = 0; m < M; ++m) embs[m] = embeddings_of(m);
    for (auto& p : pairs) {
      for (int k = 0; k < cfg.inner_steps; ++k) {
        std::vector<double> grad(p.g.param_count(), 0.0);
        adversarial_ce_grad_params(p.g, embs[p.m], embs[p.mp], grad);
        p.opt.step(p.g.params(), grad);
      }
    }

    // Outer objective and its gradient at the current parameters.
    double pre_sum = 0.0, ce_sum = 0.0;
    std::vector<std::vector<double>> grads(M);
    for (int m = 0; m < M; ++m) {
      grads[m].assign(bundle.models[m].param_count(), 0.0);
      pre_sum += pretrain_loss_grad(bundle.models[m], by_algo[m], y_best, grads[m]);
    }
    for (auto& p : pairs) {
      std::vector<std::vector<double>> dm, dmp;
      ce_sum += adversarial_ce_grad_inputs(p.g, embs[p.m], embs[p.mp], dm, dmp);
      // Maximizing CE w.r.t. embeddings: subtract beta times its gradient.
      for (std::size_t i = 0; i < dm.size(); ++i) {
        for (auto& v : dm[i]) v *= -cfg.beta;
        bundle.models[p.m].backward(by_algo[p.m][i].x.values, dm[i], grads[p.m]);
      }
      for (std::size_t i = 0; i < dmp.size(); ++i) {
        for (auto& v : dmp[i]) v *= -cfg.beta;
        bundle.models[p.mp].backward(by_algo[p.mp][i].x.values, dmp[i], grads[p.mp]);
      }
    }
    const double objective = pre_sum - cfg.beta * ce_sum;
    if (report) {
      report->objective_trace.push_back(objective);
      if (epoch == 0) {
        report->initial_objective = objective;
        report->initial_pre_loss = pre_sum;
      }
    }
    if (objective < best_obj) {
      best_obj = objective;
      best_pre_loss = pre_sum;
      for (int m = 0; m < M; ++m) best_params[m] = bundle.models[m].params();
    }

    for (int m = 0; m < M; ++m) embed_opt[m].step(bundle.models[m].params(), grads[m]);
  }

  // Score the post-update parameters once so the last step can win too.
  {
    double pre_sum = 0.0, ce_sum = 0.0;
    std::vector<std::vector<std::vector<double>>> embs(M);
    for (int m = 0; m < M; ++m) {
      embs[m] = embeddings_of(m);
      pre_sum += pretrain_loss(bundle.models[m], by_algo[m], y_best);
    }
    for (auto& p : pairs) ce_sum += adversarial_ce_loss(p.g, embs[p.m], embs[p.mp]);
    const double objective = pre_sum - cfg.beta * ce_sum;
    if (objective < best_obj) {
      best_obj = objective;
      best_pre_loss = pre_sum;
      for (int m = 0; m < M; ++m) best_params[m] = bundle.models[m].params();
    }
  }

  for (int m = 0; m < M; ++m) bundle.models[m].params() = best_params[m];
  if (report) {
    report->final_objective = best_obj;
    report->final_pre_loss = best_pre_loss;
  }
  return bundle;
}

Mlp train_probe_classifier(const std::vector<std::vector<double>>& emb_m,
                           const std::vector<std::vector<double>>& emb_mp, int steps, double lr,
                           int hidden, Rng& rng) {
  if (emb_m.empty() || emb_mp.empty())
    throw ConfigError("probe classifier needs points from both algorithms");
  const int d = static_cast<int>(emb_m.front().size());
  Mlp g = Mlp::create({d, hidden, 1}, rng);
  Adam opt(lr);
  for (int k = 0; k < steps; ++k) {
    std::vector<double> grad(g.param_count(), 0.0);
    adversarial_ce_grad_params(g, emb_m, emb_mp, grad);
    opt.step(g.params(), grad);
  }
  return g;
}

double classifier_accuracy(const Mlp& g, const std::vector<std::vector<double>>& emb_m,
                           const std::vector<std::vector<double>>& emb_mp) {
  if (emb_m.empty() && emb_mp.empty()) throw ConfigError("accuracy needs at least one point");
  double correct = 0.0;
  for (const auto& u : emb_m) correct += classifier_prob(g, u) > 0.5 ? 1.0 : 0.0;
  for (const auto& u : emb_mp) correct += classifier_prob(g, u) <= 0.5 ? 1.0 : 0.0;
  return correct / static_cast<double>(emb_m.size() + emb_mp.size());
}

}  // namespace cashbo
