#pragma once

#include <vector>

#include <Eigen/Core>

#include "cashbo/mlp.hpp"
#include "cashbo/space.hpp"

namespace cashbo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Rank-1-plus-diagonal task covariance B = w w^T + diag(v), one entry per
// algorithm pair. v > 0 keeps B positive definite.
struct TaskCov {
  std::vector<double> w;
  std::vector<double> v;

  int num_tasks() const { return static_cast<int>(w.size()); }
  double operator()(int m, int mp) const {
    return w[m] * w[mp] + (m == mp ? v[m] : 0.0);
  }
};

// Gaussian base kernel over the latent space scaled by the task covariance:
// B[m,m'] * exp(-||u - u'||^2 / (2 ell^2)).
double kernel_eval(const TaskCov& B, double ell, const Eigen::Ref<const Vector>& u, int m,
                   const Eigen::Ref<const Vector>& up, int mp);

// Batch embedding of unit-scaled points through their algorithm's network.
// Row i of the result is models[pts[i].algo].forward(pts[i].values).
// The _serial and _omp routes compute identical elements in a fixed order;
// results are bitwise equal. embed_batch dispatches on the thread cap.
Matrix embed_batch_serial(const std::vector<Mlp>& models, const std::vector<HpVector>& pts);
Matrix embed_batch_omp(const std::vector<Mlp>& models, const std::vector<HpVector>& pts);
Matrix embed_batch(const std::vector<Mlp>& models, const std::vector<HpVector>& pts);

// Gram matrix K[i,j] = kernel_eval(B, ell, U.row(i), tasks[i], U.row(j), tasks[j]).
Matrix gram_serial(const Matrix& U, const std::vector<int>& tasks, const TaskCov& B, double ell);
Matrix gram_omp(const Matrix& U, const std::vector<int>& tasks, const TaskCov& B, double ell);
Matrix gram(const Matrix& U, const std::vector<int>& tasks, const TaskCov& B, double ell);

// Cross-covariance between query points and the training set:
// out[q,i] = kernel_eval(B, ell, Q.row(q), qtasks[q], U.row(i), tasks[i]).
Matrix cross_kernel_serial(const Matrix& Q, const std::vector<int>& qtasks, const Matrix& U,
                           const std::vector<int>& tasks, const TaskCov& B, double ell);
Matrix cross_kernel_omp(const Matrix& Q, const std::vector<int>& qtasks, const Matrix& U,
                        const std::vector<int>& tasks, const TaskCov& B, double ell);
Matrix cross_kernel(const Matrix& Q, const std::vector<int>& qtasks, const Matrix& U,
                    const std::vector<int>& tasks, const TaskCov& B, double ell);

// Unblocked lower Cholesky with fixed left-to-right accumulation. The strict
// ordering makes factors reproducible across runs and keeps exact zeros in
// place when the input has a block-diagonal zero pattern, so tasks that are
// uncoupled in B stay uncoupled to the last bit. Returns false if a pivot is
// not strictly positive.
bool cholesky(const Matrix& A, Matrix& L);

// Solve L y = b and L^T x = y.
Vector chol_solve_lower(const Matrix& L, const Vector& b);
Vector chol_solve_upper(const Matrix& L, const Vector& b);
// Both substitutions: (L L^T)^{-1} b.
Vector chol_solve(const Matrix& L, const Vector& b);

double chol_log_det(const Matrix& L);

// Factor C, retrying with diagonal jitter 1e-8..1e-4 (x10 steps) when the
// plain factorization fails. Throws NumericalError past the last rung.
struct CholFactor {
  Matrix L;
  double jitter = 0.0;
};
CholFactor factor_spd(const Matrix& C);

}  // namespace cashbo
