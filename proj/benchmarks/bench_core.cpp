#include <benchmark/benchmark.h>

#include "crpt/autodiff.hpp"
#include "crpt/collect.hpp"
#include "crpt/env.hpp"
#include "crpt/intrinsic.hpp"
#include "crpt/protolearn.hpp"
#include "crpt/rng.hpp"
#include "crpt/sinkhorn.hpp"

using namespace crpt;

namespace {

nd::Tensor random_frames(std::size_t b, std::size_t c, std::size_t hw, std::uint64_t seed) {
  Rng rng(seed);
  nd::Tensor t({b, c, hw, hw});
  for (double& v : t.data) v = rng.uniform();
  return t;
}

void BM_EncoderForward(benchmark::State& state) {
  proto::Arch arch;
  proto::EncoderStack stack(arch, 1);
  nd::Tensor frames = random_frames(std::size_t(state.range(0)), arch.in_channels, arch.render, 2);
  for (auto _ : state) benchmark::DoNotOptimize(stack.encode(frames));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(16)->Arg(64);

void BM_SslTrainStep(benchmark::State& state) {
  proto::Arch arch;
  proto::SslConfig cfg;
  cfg.metrics_every = 0;
  collect::DomainBuffer buf = collect::collect_random("pendulum", envs::EnvOptions{}, 600, 1000, 3);
  proto::SslLearner learner(arch, cfg, 7);
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(learner.train_step({&buf}, 0, rng, false));
}
BENCHMARK(BM_SslTrainStep);

void BM_SinkhornTargets(benchmark::State& state) {
  const std::size_t m = std::size_t(state.range(0));
  Rng rng(9);
  nd::Tensor z({m, 64}), c({m, 64});
  for (double& v : z.data) v = rng.normal();
  for (double& v : c.data) v = rng.normal();
  nd::Tensor scores = sinkhorn::score_matrix(nd::l2_normalize_rows(z), nd::l2_normalize_rows(c));
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn::assignment_targets(scores));
}
BENCHMARK(BM_SinkhornTargets)->Arg(16)->Arg(64)->Arg(512);

void BM_KnnReward(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0));
  Rng rng(11);
  intrinsic::ProjectionSet q(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(64);
    for (double& x : v) x = rng.normal();
    q.push(std::move(v));
  }
  std::vector<double> query(64);
  for (double& x : query) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(intrinsic::knn_reward(query, q, 3));
}
BENCHMARK(BM_KnnReward)->Arg(256)->Arg(2048);

void BM_EnvStep(benchmark::State& state) {
  static const char* names[] = {"pendulum", "cartpole", "pointmass"};
  auto env = envs::make_env(names[state.range(0)], envs::EnvOptions{});
  env->reset(1);
  std::vector<double> action(env->spec().action_dim, 0.3);
  for (auto _ : state) {
    envs::Transition tr = env->step(action);
    benchmark::DoNotOptimize(tr);
    if (tr.terminal) env->reset(1);
  }
}
BENCHMARK(BM_EnvStep)->Arg(0)->Arg(1)->Arg(2);

void BM_AugmentShift(benchmark::State& state) {
  nd::Tensor batch = random_frames(64, 3, 32, 4);
  Rng rng(8);
  for (auto _ : state) benchmark::DoNotOptimize(proto::augment_shift(batch, 4, rng));
}
BENCHMARK(BM_AugmentShift);

}  // namespace

BENCHMARK_MAIN();
