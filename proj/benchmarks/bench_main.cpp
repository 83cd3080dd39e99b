#include <benchmark/benchmark.h>

#include "otblab/estimators.hpp"
#include "otblab/harness/instances.hpp"
#include "otblab/oracle.hpp"

namespace {

using namespace otblab;

Policy make_policy(PolicyKind kind, int vocab, int t_max) {
  PolicyShape shape;
  shape.kind = kind;
  shape.vocab = vocab;
  shape.t_max = t_max;
  return Policy::create(shape, InitScheme{InitScheme::Kind::Gaussian, 1.0, 7});
}

void BM_Enumerate(benchmark::State& state) {
  const Policy policy = make_policy(PolicyKind::TabularPrefix, 4, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(enumerate(policy, 0, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_Enumerate)->DenseRange(3, 6);

void BM_ExactVarianceOtb(benchmark::State& state) {
  const int t_max = static_cast<int>(state.range(0));
  const Policy policy = make_policy(PolicyKind::LinearSoftmax, 4, t_max);
  const RewardModel reward{TerminalTarget{}};
  const EnumeratedSpace space = enumerate(policy, 0, t_max);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        exact_estimator_variance(space, reward, EstimatorForm::Causal, otb_schedule(space, reward)));
  }
}
BENCHMARK(BM_ExactVarianceOtb)->DenseRange(3, 5);

void BM_OtbHat(benchmark::State& state) {
  const Policy policy = make_policy(PolicyKind::TabularPrefix, 3, 8);
  const RewardModel reward{TerminalTarget{}};
  Philox rng(1, 0);
  const GroupBatch group =
      harness::to_group(harness::sample_group(policy, reward, 0, static_cast<std::size_t>(state.range(0)), rng));
  for (auto _ : state) {
    for (std::size_t t = 1; t <= 8; ++t) benchmark::DoNotOptimize(otb_hat(group, t));
  }
}
BENCHMARK(BM_OtbHat)->RangeMultiplier(4)->Range(4, 256);

void BM_EstimateBatch(benchmark::State& state) {
  const Policy policy = make_policy(PolicyKind::LinearSoftmax, 8, 16);
  const RewardModel reward{TerminalTarget{}};
  Philox rng(2, 0);
  const auto members = harness::sample_group(policy, reward, 0, static_cast<std::size_t>(state.range(0)), rng);
  EstimatorSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_batch(members, spec));
}
BENCHMARK(BM_EstimateBatch)->RangeMultiplier(4)->Range(4, 64);

void BM_ProxyVersusScore(benchmark::State& state) {
  const Policy policy = make_policy(PolicyKind::LinearSoftmax, 64, 4);
  const std::vector<Token> prefix{3, 5};
  if (state.range(0) == 0) {
    for (auto _ : state) benchmark::DoNotOptimize(policy.proxy_norm(0, prefix, 9));
  } else {
    for (auto _ : state) benchmark::DoNotOptimize(policy.score_function(0, prefix, 9).squared_norm());
  }
}
BENCHMARK(BM_ProxyVersusScore)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
