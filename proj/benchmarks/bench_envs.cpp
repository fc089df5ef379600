#include <benchmark/benchmark.h>

#include "hsdlab/envs.hpp"
#include "hsdlab/policy.hpp"

namespace {

using namespace hsd;

void BM_Rollout(benchmark::State& state) {
  const MdpSpec mdp = default_spec(static_cast<DynamicsKind>(state.range(0)), "bench", 1);
  const QNetwork net(mdp.obs_dim(), {128, 128}, mdp.action_count, HeadKind::Plain, 2);
  Seed seed = 0;
  long steps = 0;
  for (auto _ : state) {
    const EpisodeRecord ep = rollout(mdp, net, seed++);
    steps += static_cast<long>(ep.steps.size());
  }
  state.SetItemsProcessed(steps);
}
BENCHMARK(BM_Rollout)->Arg(0)->Arg(1)->Arg(2);

void BM_EnvStep(benchmark::State& state) {
  GridMdp env(default_spec(DynamicsKind::Dodger, "bench", 1));
  Seed seed = 0;
  env.reset(seed);
  for (auto _ : state) {
    if (env.done()) env.reset(++seed);
    benchmark::DoNotOptimize(env.step(2));
  }
}
BENCHMARK(BM_EnvStep);

}  // namespace
