#include <benchmark/benchmark.h>

#include "csbp/evolution.hpp"
#include "csbp/mechanism.hpp"
#include "csbp/rng.hpp"
#include "csbp/simulate.hpp"
#include "csbp/skeleton.hpp"

namespace {

using namespace csbp;

const BranchingMechanism kSuper = BranchingMechanism::feller(1.0, 1.0);
const BranchingMechanism kSub = BranchingMechanism::feller(-1.0, 1.0);
const BranchingMechanism kE1{1.0, 0.5, LevyMeasure::exponential(1.0, 1.0)};
const BranchingMechanism kStable{-0.5, 0.0, LevyMeasure::stable_tail(1.0, 1.5)};

void BM_PsiExponential(benchmark::State& st) {
  double th = 0.1;
  for (auto _ : st) {
    benchmark::DoNotOptimize(psi(kE1, th));
    th = th < 10 ? th + 0.01 : 0.1;
  }
}
BENCHMARK(BM_PsiExponential);

void BM_PsiStable(benchmark::State& st) {
  double th = 0.1;
  for (auto _ : st) {
    benchmark::DoNotOptimize(psi(kStable, th));
    th = th < 10 ? th + 0.01 : 0.1;
  }
}
BENCHMARK(BM_PsiStable);

void BM_UInfinityFeller(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(u_infinity(kSub, 1.0));
}
BENCHMARK(BM_UInfinityFeller)->Unit(benchmark::kMicrosecond);

void BM_UInfinityStable(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(u_infinity(kStable, 1.0));
}
BENCHMARK(BM_UInfinityStable)->Unit(benchmark::kMicrosecond);

void BM_SolveU(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(u_at(kE1, 2.0, 1.0));
}
BENCHMARK(BM_SolveU)->Unit(benchmark::kMicrosecond);

// One path per iteration at dt = 1e-3 over [0, 1].
void BM_EulerCsbpPath(benchmark::State& st) {
  PathConfig cfg;
  const PathModel model =
      st.range(0) == 0 ? PathModel::csbp(kSuper, cfg) : PathModel::csbp(kE1, cfg);
  std::uint64_t i = 0;
  for (auto _ : st) {
    Rng rng(1, i++);
    benchmark::DoNotOptimize(model.run(1.0, rng).final_mass());
  }
}
BENCHMARK(BM_EulerCsbpPath)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_ExactFeller(benchmark::State& st) {
  std::uint64_t i = 0;
  for (auto _ : st) {
    Rng rng(1, i++);
    benchmark::DoNotOptimize(sample_feller_exact(kSuper, 1.0, 1.0, rng));
  }
}
BENCHMARK(BM_ExactFeller);

void BM_LambdaSkeletonPath(benchmark::State& st) {
  PathConfig cfg;
  const LambdaSkeleton sk(kSuper, 1.0, cfg);
  std::uint64_t i = 0;
  for (auto _ : st) {
    Rng rng(2, i++);
    benchmark::DoNotOptimize(sk.run(1.0, InitialLaw::poisson(1.0), rng).final_z());
  }
}
BENCHMARK(BM_LambdaSkeletonPath)->Unit(benchmark::kMicrosecond);

void BM_TSkeletonPath(benchmark::State& st) {
  PathConfig cfg;
  const TSkeleton sk(kSub, 2.0, cfg);
  const double uT = u_infinity(kSub, 2.0);
  std::uint64_t i = 0;
  for (auto _ : st) {
    Rng rng(3, i++);
    benchmark::DoNotOptimize(sk.run(1.0, InitialLaw::poisson(uT), rng).final_z());
  }
}
BENCHMARK(BM_TSkeletonPath)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
