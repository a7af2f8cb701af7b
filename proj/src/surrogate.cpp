#include "cashbo/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cashbo/adam.hpp"
#include "cashbo/error.hpp"

namespace cashbo {

KernelParams KernelParams::init(int num_tasks) {
  KernelParams p;
  p.log_ell = std::log(0.5);
  p.w.assign(num_tasks, 0.5);
  p.log_v.assign(num_tasks, 0.0);
  p.log_noise = std::log(1e-2);
  return p;
}

TaskCov KernelParams::task_cov() const {
  TaskCov B;
  B.w = w;
  B.v.resize(log_v.size());
  for (std::size_t m = 0; m < log_v.size(); ++m) B.v[m] = std::exp(log_v[m]);
  return B;
}

std::vector<double> KernelParams::pack() const {
  std::vector<double> p;
  p.reserve(2 * w.size() + 2);
  p.push_back(log_ell);
  p.insert(p.end(), w.begin(), w.end());
  p.insert(p.end(), log_v.begin(), log_v.end());
  p.push_back(log_noise);
  return p;
}

void KernelParams::unpack(const std::vector<double>& p) {
  const std::size_t M = w.size();
  if (p.size() != 2 * M + 2) throw ConfigError("kernel params: bad packed size");
  log_ell = p[0];
  for (std::size_t m = 0; m < M; ++m) w[m] = p[1 + m];
  for (std::size_t m = 0; m < M; ++m) log_v[m] = p[1 + M + m];
  log_noise = p[1 + 2 * M];
}

void KernelParams::clamp() {
  const auto box = [](double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); };
  log_ell = box(log_ell, std::log(1e-3), std::log(1e3));
  log_noise = box(log_noise, std::log(1e-8), std::log(1e2));
  for (auto& x : log_v) x = box(x, std::log(1e-8), std::log(1e3));
  for (auto& x : w) x = box(x, -1e3, 1e3);
}

Surrogate::Surrogate(std::vector<Mlp> models, double prior_y_best, bool standardize)
    : models_(std::move(models)),
      params_(KernelParams::init(static_cast<int>(models_.size()))),
      prior_y_best_(prior_y_best),
      standardize_(standardize) {
  if (models_.empty()) throw ConfigError("surrogate needs at least one embedding model");
  const int d = models_.front().output_dim();
  for (const auto& m : models_)
    if (m.output_dim() != d) throw ConfigError("surrogate models disagree on latent dimension");
}

void Surrogate::set_prior_best(double y) {
  prior_y_best_ = y;
  fresh_ = false;
}

void Surrogate::set_data(ObservationSet obs) {
  for (const auto& o : obs)
    if (o.x.algo < 0 || o.x.algo >= num_tasks())
      throw ConfigError("observation names an unknown algorithm");
  obs_ = std::move(obs);
  fresh_ = false;
}

void Surrogate::add_observation(Observation o) {
  if (o.x.algo < 0 || o.x.algo >= num_tasks())
    throw ConfigError("observation names an unknown algorithm");
  obs_.push_back(std::move(o));
  fresh_ = false;
}

std::vector<double> Surrogate::embed(const HpVector& x) const {
  return models_.at(x.algo).forward(x.values);
}

double Surrogate::prior_mean_raw(const std::vector<double>& u) const {
  double sq = 0.0;
  for (double c : u) sq += c * c;
  return -sq + prior_y_best_;
}

void Surrogate::refresh() {
  const auto n = static_cast<Eigen::Index>(obs_.size());
  pts_.resize(obs_.size());
  tasks_.resize(obs_.size());
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    pts_[i] = obs_[i].x;
    tasks_[i] = obs_[i].x.algo;
  }

  if (standardize_ && n > 0) {
    double mean = 0.0;
    for (const auto& o : obs_) mean += o.y;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& o : obs_) var += (o.y - mean) * (o.y - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    shift_ = mean;
    scale_ = sd < 1e-12 ? 1.0 : sd;
  } else {
    shift_ = 0.0;
    scale_ = 1.0;
  }

  U_ = embed_batch(models_, pts_);
  if (n == 0) {
    r_.resize(0);
    a_.resize(0);
    L_.resize(0, 0);
    jitter_ = 0.0;
    fresh_ = true;
    return;
  }

  r_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> u(U_.cols());
    for (Eigen::Index j = 0; j < U_.cols(); ++j) u[j] = U_(i, j);
    r_[i] = (obs_[i].y - prior_mean_raw(u)) / scale_;
  }

  Matrix C = gram(U_, tasks_, params_.task_cov(), params_.ell());
  C.diagonal().array() += params_.noise();
  auto f = factor_spd(C);
  L_ = std::move(f.L);
  jitter_ = f.jitter;
  a_ = chol_solve(L_, r_);
  fresh_ = true;
}

void Surrogate::require_fresh() const {
  if (!fresh_) throw ConfigError("surrogate caches stale: call refresh() first");
}

Posterior Surrogate::posterior(const HpVector& x) const {
  require_fresh();
  const auto u = embed(x);
  const auto B = params_.task_cov();
  const double prior_var = B(x.algo, x.algo);
  const double mu0_std = (prior_mean_raw(u) - shift_) / scale_;

  if (obs_.empty())
    return {prior_mean_raw(u), prior_var * scale_ * scale_};

  Matrix Q(1, static_cast<Eigen::Index>(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j) Q(0, j) = u[j];
  const Matrix k = cross_kernel_serial(Q, {x.algo}, U_, tasks_, B, params_.ell());

  double mu = mu0_std;
  for (Eigen::Index i = 0; i < a_.size(); ++i) mu += k(0, i) * a_[i];

  const Vector kv = k.row(0).transpose();
  const Vector vvec = chol_solve_lower(L_, kv);
  double var = prior_var;
  for (Eigen::Index i = 0; i < vvec.size(); ++i) var -= vvec[i] * vvec[i];
  var = std::max(0.0, var);

  return {mu * scale_ + shift_, var * scale_ * scale_};
}

namespace {

double reg_term(const std::vector<Mlp>& models, double alpha, const PtemBundle* pre) {
  if (pre == nullptr || alpha == 0.0) return 0.0;
  double reg = 0.0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& cur = models[m].params();
    const auto& ref = pre->models.at(m).params();
    if (cur.size() != ref.size())
      throw ConfigError("pretrained bundle does not match surrogate models");
    double sq = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) sq += (cur[i] - ref[i]) * (cur[i] - ref[i]);
    reg += sq / static_cast<double>(models[m].param_count());
  }
  return alpha * reg;
}

}  // namespace

double Surrogate::nll(double alpha, const PtemBundle* pre) const {
  require_fresh();
  if (obs_.empty()) throw ConfigError("nll needs at least one observation");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < r_.size(); ++i) loss += r_[i] * a_[i];
  loss *= 0.5;
  loss += 0.5 * chol_log_det(L_);
  loss += reg_term(models_, alpha, pre);
  return loss;
}

double Surrogate::nll_grad(double alpha, const PtemBundle* pre, MaskMode mask,
                           std::vector<double>& kgrad,
                           std::vector<std::vector<double>>& egrad) const {
  require_fresh();
  if (obs_.empty()) throw ConfigError("nll needs at least one observation");
  const auto n = static_cast<Eigen::Index>(obs_.size());
  const int M = num_tasks();
  const auto B = params_.task_cov();
  const double ell = params_.ell();
  const double noise = params_.noise();

  // C^-1 column by column through the cached factor.
  Matrix Cinv(n, n);
  Vector e = Vector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    Cinv.col(j) = chol_solve(L_, e);
    e[j] = 0.0;
  }

  // dL/dC with L = 1/2 r^T C^-1 r + 1/2 log|C|.
  Matrix G(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) G(i, j) = -0.5 * a_[i] * a_[j] + 0.5 * Cinv(i, j);

  // Pairwise squared distances and base-kernel values.
  Matrix S(n, n), E(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double sq = 0.0;
      for (Eigen::Index c = 0; c < U_.cols(); ++c) {
        const double d = U_(i, c) - U_(j, c);
        sq += d * d;
      }
      S(i, j) = sq;
      E(i, j) = std::exp(-sq / (2.0 * ell * ell));
    }

  double g_log_ell = 0.0, g_log_noise = 0.0;
  std::vector<double> g_w(M, 0.0), g_log_v(M, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    g_log_noise += noise * G(i, i);
    for (Eigen::Index j = 0; j < n; ++j) {
      const int ti = tasks_[i], tj = tasks_[j];
      const double GE = G(i, j) * E(i, j);
      g_log_ell += G(i, j) * B(ti, tj) * E(i, j) * S(i, j) / (ell * ell);
      g_w[ti] += GE * B.w[tj];
      g_w[tj] += GE * B.w[ti];
      if (ti == tj) g_log_v[ti] += GE * B.v[ti];
    }
  }

  kgrad.clear();
  kgrad.reserve(2 * M + 2);
  kgrad.push_back(g_log_ell);
  kgrad.insert(kgrad.end(), g_w.begin(), g_w.end());
  kgrad.insert(kgrad.end(), g_log_v.begin(), g_log_v.end());
  kgrad.push_back(g_log_noise);

  // Latent gradients, then backprop through each point's network.
  egrad.assign(M, {});
  for (int m = 0; m < M; ++m) egrad[m].assign(models_[m].param_count(), 0.0);
  const auto d = U_.cols();
  std::vector<double> du(d), x(0);
  for (Eigen::Index nidx = 0; nidx < n; ++nidx) {
    const int tn = tasks_[nidx];
    for (Eigen::Index c = 0; c < d; ++c) du[c] = a_[nidx] * 2.0 * U_(nidx, c) / scale_;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == nidx) continue;
      const double coef = -2.0 * G(nidx, j) * B(tn, tasks_[j]) * E(nidx, j) / (ell * ell);
      for (Eigen::Index c = 0; c < d; ++c) du[c] += coef * (U_(nidx, c) - U_(j, c));
    }
    models_[tn].backward(pts_[nidx].values, du, egrad[tn]);
  }

  // Regularizer gradient, then the mask.
  for (int m = 0; m < M; ++m) {
    if (pre != nullptr && alpha != 0.0) {
      const auto& cur = models_[m].params();
      const auto& ref = pre->models.at(m).params();
      const double c = 2.0 * alpha / static_cast<double>(models_[m].param_count());
      for (std::size_t i = 0; i < cur.size(); ++i) egrad[m][i] += c * (cur[i] - ref[i]);
    }
    const auto msk = models_[m].trainable_mask(mask);
    for (std::size_t i = 0; i < msk.size(); ++i)
      if (!msk[i]) egrad[m][i] = 0.0;
  }

  return nll(alpha, pre);
}

double Surrogate::fit(const FitOptions& opt, const PtemBundle* pre) {
  if (obs_.size() < 2) throw ConfigError("fit needs at least two observations");

  Adam adam_kernel(opt.lr_kernel);
  std::vector<Adam> adam_embed(num_tasks(), Adam(opt.lr_embed));

  standardize_ = opt.standardize;
  refresh();

  double best_loss = std::numeric_limits<double>::infinity();
  auto best_kernel = params_;
  std::vector<std::vector<double>> best_embed(num_tasks());
  for (int m = 0; m < num_tasks(); ++m) best_embed[m] = models_[m].params();

  std::vector<double> kgrad;
  std::vector<std::vector<double>> egrad;
  for (int step = 0; step < opt.steps; ++step) {
    const double loss = nll_grad(opt.alpha, pre, opt.mask, kgrad, egrad);
    if (loss < best_loss) {
      best_loss = loss;
      best_kernel = params_;
      for (int m = 0; m < num_tasks(); ++m) best_embed[m] = models_[m].params();
    }
    auto packed = params_.pack();
    adam_kernel.step(packed, kgrad);
    params_.unpack(packed);
    params_.clamp();
    for (int m = 0; m < num_tasks(); ++m) adam_embed[m].step(models_[m].params(), egrad[m]);
    refresh();
  }

  // The last update produced parameters no step has scored yet.
  const double final_loss = nll(opt.alpha, pre);
  if (final_loss < best_loss) {
    best_loss = final_loss;
    best_kernel = params_;
    for (int m = 0; m < num_tasks(); ++m) best_embed[m] = models_[m].params();
  }

  params_ = best_kernel;
  for (int m = 0; m < num_tasks(); ++m) models_[m].params() = best_embed[m];
  refresh();
  return best_loss;
}

}  // namespace cashbo
