#include <benchmark/benchmark.h>

#include <random>

#include "hsdlab/envs.hpp"
#include "hsdlab/policy.hpp"

namespace {

using namespace hsd;

Vec random_obs(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = u(rng);
  return v;
}

void BM_Score(benchmark::State& state) {
  const QNetwork net(288, {128, 128}, 6, static_cast<HeadKind>(state.range(0)), 1);
  const Vec obs = random_obs(288, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net.score(obs));
}
BENCHMARK(BM_Score)->Arg(0)->Arg(1);

void BM_ScoreBatch(benchmark::State& state) {
  const QNetwork net(288, {128, 128}, 6, HeadKind::Plain, 1);
  const auto batch = static_cast<int>(state.range(0));
  Mat inputs(batch, 288);
  for (int i = 0; i < batch; ++i) inputs.row(i) = random_obs(288, static_cast<std::uint64_t>(i)).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(net.score_batch(inputs));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ScoreBatch)->Arg(32)->Arg(256);

void BM_GradInputMargin(benchmark::State& state) {
  const QNetwork net(288, {128, 128}, 6, static_cast<HeadKind>(state.range(0)), 1);
  const Vec obs = random_obs(288, 3);
  const int a = argmax(net.score(obs));
  for (auto _ : state) benchmark::DoNotOptimize(grad_input(net, obs, MarginLoss{a, 0.0}));
}
BENCHMARK(BM_GradInputMargin)->Arg(0)->Arg(1);

}  // namespace
