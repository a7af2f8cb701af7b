#include "cashbo/kernels.hpp"

#include <cmath>

#include "cashbo/error.hpp"
#include "cashbo/parallel.hpp"

namespace cashbo {

double kernel_eval(const TaskCov& B, double ell, const Eigen::Ref<const Vector>& u, int m,
                   const Eigen::Ref<const Vector>& up, int mp) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double d = u[i] - up[i];
    sq += d * d;
  }
  return B(m, mp) * std::exp(-sq / (2.0 * ell * ell));
}

namespace {

void embed_row(const std::vector<Mlp>& models, const HpVector& pt, Matrix& out,
               Eigen::Index row) {
  const auto u = models[pt.algo].forward(pt.values);
  for (Eigen::Index j = 0; j < out.cols(); ++j) out(row, j) = u[j];
}

double gram_entry(const Matrix& U, const std::vector<int>& tasks, const TaskCov& B, double ell,
                  Eigen::Index i, Eigen::Index j) {
  double sq = 0.0;
  for (Eigen::Index k = 0; k < U.cols(); ++k) {
    const double d = U(i, k) - U(j, k);
    sq += d * d;
  }
  return B(tasks[i], tasks[j]) * std::exp(-sq / (2.0 * ell * ell));
}

}  // namespace

Matrix embed_batch_serial(const std::vector<Mlp>& models, const std::vector<HpVector>& pts) {
  if (pts.empty()) return Matrix(0, models.empty() ? 0 : models.front().output_dim());
  Matrix out(static_cast<Eigen::Index>(pts.size()), models[pts.front().algo].output_dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) embed_row(models, pts[i], out, i);
  return out;
}

Matrix embed_batch_omp(const std::vector<Mlp>& models, const std::vector<HpVector>& pts) {
  if (pts.empty()) return Matrix(0, models.empty() ? 0 : models.front().output_dim());
  Matrix out(static_cast<Eigen::Index>(pts.size()), models[pts.front().algo].output_dim());
  const Eigen::Index n = out.rows();
#pragma omp parallel for schedule(static) num_threads(parallel::effective_threads())
  for (Eigen::Index i = 0; i < n; ++i) embed_row(models, pts[i], out, i);
  return out;
}

Matrix embed_batch(const std::vector<Mlp>& models, const std::vector<HpVector>& pts) {
  return parallel::enabled() ? embed_batch_omp(models, pts) : embed_batch_serial(models, pts);
}

Matrix gram_serial(const Matrix& U, const std::vector<int>& tasks, const TaskCov& B, double ell) {
  const Eigen::Index n = U.rows();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double k = gram_entry(U, tasks, B, ell, i, j);
      K(i, j) = k;
      K(j, i) = k;
    }
  return K;
}

Matrix gram_omp(const Matrix& U, const std::vector<int>& tasks, const TaskCov& B, double ell) {
  const Eigen::Index n = U.rows();
  Matrix K(n, n);
#pragma omp parallel for schedule(dynamic, 4) num_threads(parallel::effective_threads())
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double k = gram_entry(U, tasks, B, ell, i, j);
      K(i, j) = k;
      K(j, i) = k;
    }
  return K;
}

Matrix gram(const Matrix& U, const std::vector<int>& tasks, const TaskCov& B, double ell) {
  return parallel::enabled() ? gram_omp(U, tasks, B, ell) : gram_serial(U, tasks, B, ell);
}

Matrix cross_kernel_serial(const Matrix& Q, const std::vector<int>& qtasks, const Matrix& U,
                           const std::vector<int>& tasks, const TaskCov& B, double ell) {
  Matrix out(Q.rows(), U.rows());
  for (Eigen::Index q = 0; q < Q.rows(); ++q)
    for (Eigen::Index i = 0; i < U.rows(); ++i)
      out(q, i) = kernel_eval(B, ell, Q.row(q), qtasks[q], U.row(i), tasks[i]);
  return out;
}

Matrix cross_kernel_omp(const Matrix& Q, const std::vector<int>& qtasks, const Matrix& U,
                        const std::vector<int>& tasks, const TaskCov& B, double ell) {
  Matrix out(Q.rows(), U.rows());
  const Eigen::Index nq = Q.rows();
#pragma omp parallel for schedule(static) num_threads(parallel::effective_threads())
  for (Eigen::Index q = 0; q < nq; ++q)
    for (Eigen::Index i = 0; i < U.rows(); ++i)
      out(q, i) = kernel_eval(B, ell, Q.row(q), qtasks[q], U.row(i), tasks[i]);
  return out;
}

Matrix cross_kernel(const Matrix& Q, const std::vector<int>& qtasks, const Matrix& U,
                    const std::vector<int>& tasks, const TaskCov& B, double ell) {
  return parallel::enabled() ? cross_kernel_omp(Q, qtasks, U, tasks, B, ell)
                             : cross_kernel_serial(Q, qtasks, U, tasks, B, ell);
}

bool cholesky(const Matrix& A, Matrix& L) {
  const Eigen::Index n = A.rows();
  L = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = A(j, j);
    for (Eigen::Index k = 0; k < j; ++k) s -= L(j, k) * L(j, k);
    if (!(s > 0.0) || !std::isfinite(s)) return false;
    const double d = std::sqrt(s);
    L(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double t = A(i, j);
      for (Eigen::Index k = 0; k < j; ++k) t -= L(i, k) * L(j, k);
      L(i, j) = t / d;
    }
  }
  return true;
}

Vector chol_solve_lower(const Matrix& L, const Vector& b) {
  const Eigen::Index n = L.rows();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b[i];
    for (Eigen::Index k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  return y;
}

Vector chol_solve_upper(const Matrix& L, const Vector& b) {
  const Eigen::Index n = L.rows();
  Vector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (Eigen::Index k = i + 1; k < n; ++k) s -= L(k, i) * x[k];
    x[i] = s / L(i, i);
  }
  return x;
}

Vector chol_solve(const Matrix& L, const Vector& b) {
  return chol_solve_upper(L, chol_solve_lower(L, b));
}

double chol_log_det(const Matrix& L) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

CholFactor factor_spd(const Matrix& C) {
  CholFactor f;
  if (cholesky(C, f.L)) return f;
  for (double jitter = 1e-8; jitter <= 1e-4 * (1.0 + 1e-12); jitter *= 10.0) {
    Matrix Cj = C;
    Cj.diagonal().array() += jitter;
    if (cholesky(Cj, f.L)) {
      f.jitter = jitter;
      return f;
    }
  }
  throw NumericalError("covariance factorization failed at maximum jitter");
}

}  // namespace cashbo
