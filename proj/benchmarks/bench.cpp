#include <benchmark/benchmark.h>

#include "bilinear/completion.hpp"
#include "bilinear/environment.hpp"
#include "bilinear/estr.hpp"
#include "bilinear/linalg.hpp"
#include "bilinear/lowoful.hpp"

using namespace bilinear;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

Matrix unit_rows(std::size_t n, std::size_t p, Rng& rng) {
  Matrix m = random_matrix(n, p, rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = norm2(m.row(i));
    for (double& v : m.row(i)) v /= s;
  }
  return m;
}

void BM_ThinSvd(benchmark::State& state) {
  Rng rng(1);
  const auto d = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(d, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(thin_svd(a));
}
BENCHMARK(BM_ThinSvd)->Arg(8)->Arg(16)->Arg(64);

void BM_Completion(benchmark::State& state) {
  Rng rng(2);
  const Matrix k = random_matrix(8, 1, rng) * random_matrix(1, 8, rng);
  Matrix noisy = k;
  for (double& v : noisy.data()) v += 0.01 * rng.normal();
  const Mask mask(8, 8, true);
  const auto method = state.range(0) ? CompletionMethod::OptSpaceStyle
                                     : CompletionMethod::BurerMonteiro;
  for (auto _ : state) benchmark::DoNotOptimize(complete(noisy, mask, 1, method));
}
BENCHMARK(BM_Completion)->Arg(0)->Arg(1);

void BM_LowOfulUpdate(benchmark::State& state) {
  Rng rng(3);
  const auto p = static_cast<std::size_t>(state.range(0));
  LowOfulConfig cfg;
  cfg.p = p;
  cfg.k = p / 4;
  cfg.lambda_perp = 100.0;
  LowOfulState s(cfg);
  const Matrix arms = unit_rows(256, p, rng);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.update(arms.row(i), 0.5));
    i = (i + 1) % arms.rows();
  }
}
BENCHMARK(BM_LowOfulUpdate)->Arg(16)->Arg(64);

void BM_ArmSelection(benchmark::State& state) {
  Rng rng(4);
  LowOfulConfig cfg;
  cfg.p = 64;
  cfg.k = 15;
  cfg.lambda_perp = 100.0;
  LowOfulState s(cfg);
  const Matrix arms = unit_rows(256, 64, rng);
  for (int t = 0; t < 100; ++t) s.update(arms.row(t), rng.normal());
  if (state.range(0)) {
    const CachedArmScorer scorer(arms, s);
    for (auto _ : state) benchmark::DoNotOptimize(scorer.select(s));
  } else {
    for (auto _ : state) benchmark::DoNotOptimize(select_arm(s, arms));
  }
}
BENCHMARK(BM_ArmSelection)->Arg(0)->Arg(1);

void BM_ShortEstr(benchmark::State& state) {
  Rng rng(5);
  const BilinearEnvironment env(make_low_rank_theta(8, 8, 1, 1.0, rng), 0.01);
  const ArmSet X = generate_sphere_arms(16, 8, rng), Z = generate_sphere_arms(16, 8, rng);
  EstrConfig cfg;
  cfg.T = 1000;
  cfg.T1 = 256;
  cfg.c = 0.1;
  for (auto _ : state) {
    Rng run(6);
    benchmark::DoNotOptimize(run_estr(env, X, Z, cfg, run));
  }
}
BENCHMARK(BM_ShortEstr)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
