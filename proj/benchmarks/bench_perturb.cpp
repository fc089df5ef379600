#include <benchmark/benchmark.h>

#include <random>

#include "hsdlab/errors.hpp"
#include "hsdlab/perturb.hpp"

namespace {

using namespace hsd;

Vec random_obs(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = u(rng);
  return v;
}

void BM_Fgsm(benchmark::State& state) {
  const QNetwork net(288, {128, 128}, 6, HeadKind::Plain, 4);
  const Vec obs = random_obs(288, 5);
  for (auto _ : state) benchmark::DoNotOptimize(fgsm_direction(net, obs, PNorm::Linf));
}
BENCHMARK(BM_Fgsm);

template <Direction (*Solve)(const ActionScorer&, const Observation&, const SolverConfig&, SolverTrace*)>
void BM_Solver(benchmark::State& state) {
  const QNetwork net(288, {128, 128}, 6, HeadKind::Plain, 4);
  const Vec obs = random_obs(288, 6);
  SolverConfig cfg;
  cfg.inner_steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(Solve(net, obs, cfg, nullptr));
    } catch (const SolverError&) {
    }
  }
}
BENCHMARK_TEMPLATE(BM_Solver, cw_direction)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Solver, enr_direction)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
