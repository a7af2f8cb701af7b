#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cashbo/kernels.hpp"
#include "cashbo/parallel.hpp"
#include "cashbo/rng.hpp"
#include "cashbo/surrogate.hpp"

using namespace cashbo;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timing and agreement check for the serial and OpenMP kernel routes"};
  std::vector<int> sizes = {64, 128, 256};
  int reps = 5;
  app.add_option("--sizes", sizes, "Training-set sizes to benchmark");
  app.add_option("--reps", reps, "Repetitions per measurement (best is kept)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<int> dims = {2, 3, 3, 5};
  const int M = static_cast<int>(dims.size());
  Rng rng(1);
  std::vector<Mlp> models;
  for (int m = 0; m < M; ++m) models.push_back(Mlp::create({dims[m], 32, 32, 3}, rng));
  const TaskCov B = KernelParams::init(M).task_cov();
  const double ell = 0.5;

  std::printf("threads: %d\n", parallel::effective_threads());
  std::printf("%-12s %6s %12s %12s %9s %6s\n", "op", "n", "serial ms", "omp ms", "speedup",
              "match");

  for (int n : sizes) {
    std::vector<HpVector> pts;
    std::vector<int> tasks;
    for (int i = 0; i < n; ++i) {
      const int m = i % M;
      HpVector x;
      x.algo = m;
      for (int j = 0; j < dims[m]; ++j) x.values.push_back(rng.uniform());
      pts.push_back(x);
      tasks.push_back(m);
    }

    Matrix U;
    const double embed_s = time_ms([&] { U = embed_batch_serial(models, pts); }, reps);
    Matrix U2;
    const double embed_p = time_ms([&] { U2 = embed_batch_omp(models, pts); }, reps);
    std::printf("%-12s %6d %12.3f %12.3f %8.2fx %6s\n", "embed", n, embed_s, embed_p,
                embed_s / embed_p, same(U, U2) ? "yes" : "NO");

    Matrix K, K2;
    const double gram_s = time_ms([&] { K = gram_serial(U, tasks, B, ell); }, reps);
    const double gram_p = time_ms([&] { K2 = gram_omp(U, tasks, B, ell); }, reps);
    std::printf("%-12s %6d %12.3f %12.3f %8.2fx %6s\n", "gram", n, gram_s, gram_p,
                gram_s / gram_p, same(K, K2) ? "yes" : "NO");

    Matrix C, C2;
    const double cross_s =
        time_ms([&] { C = cross_kernel_serial(U, tasks, U, tasks, B, ell); }, reps);
    const double cross_p =
        time_ms([&] { C2 = cross_kernel_omp(U, tasks, U, tasks, B, ell); }, reps);
    std::printf("%-12s %6d %12.3f %12.3f %8.2fx %6s\n", "cross", n, cross_s, cross_p,
                cross_s / cross_p, same(C, C2) ? "yes" : "NO");
  }
  return 0;
}
