// Serial reference kernels against their OpenMP versions on a fitted model.

#include <benchmark/benchmark.h>

#include <cmath>

#include "sbart/interaction.hpp"
#include "sbart/kernels.hpp"
#include "sbart/sampler.hpp"
#include "sbart/varselect.hpp"

namespace {

using namespace sbart;

struct Fixture {
  Matrix X;
  RegressionDraws fit;
  FlatForest flat;

  static Fixture make() {
    Rng rng(1);
    const std::size_t n = 500, p = 20;
    Matrix X(n, p);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) X(i, j) = rng.uniform();
      y[i] = 10 * std::sin(M_PI * X(i, 0) * X(i, 1)) + 20 * (X(i, 2) - 0.5) * (X(i, 2) - 0.5) + 10 * X(i, 3) +
             5 * X(i, 4) + rng.normal();
    }
    BartConfig c;
    c.num_trees = 100;
    c.ndpost = 300;
    auto fit = fit_regression(X, y, c);
    FlatForest flat(fit.chain.ensembles, fit.grid);
    return {std::move(X), std::move(fit), std::move(flat)};
  }
};

const Fixture& fixture() {
  static const Fixture f = Fixture::make();
  return f;
}

void BM_latent_serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(kernels::latent_serial(f.flat, f.X));
}
void BM_latent_omp(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(kernels::latent_omp(f.flat, f.X));
}
void BM_varcount_serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(kernels::varcount_serial(f.fit.chain.ensembles, f.X.cols()));
}
void BM_varcount_omp(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(kernels::varcount_omp(f.fit.chain.ensembles, f.X.cols()));
}
void BM_pairs_serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(kernels::pair_counts_serial(f.fit.chain.ensembles, f.X.cols()));
}
void BM_pairs_omp(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(kernels::pair_counts_omp(f.fit.chain.ensembles, f.X.cols()));
}
void BM_draw_mean_serial(benchmark::State& s) {
  const auto& f = fixture();
  const Matrix m = kernels::latent_serial(f.flat, f.X);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::draw_mean_serial(m));
}
void BM_draw_mean_omp(benchmark::State& s) {
  const auto& f = fixture();
  const Matrix m = kernels::latent_serial(f.flat, f.X);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::draw_mean_omp(m));
}

BENCHMARK(BM_latent_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_latent_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_varcount_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_varcount_omp)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_pairs_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_pairs_omp)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_draw_mean_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_draw_mean_omp)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
