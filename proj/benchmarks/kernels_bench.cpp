#include <benchmark/benchmark.h>

#include "sparsecd/init.hpp"
#include "sparsecd/ops.hpp"

namespace {

using namespace sparsecd;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  NoGradGuard no_grad;
  Rng rng(1);
  const auto a = init::normal<float>(Shape{n, n}, 0.0f, 1.0f, rng);
  const auto b = init::normal<float>(Shape{n, n}, 0.0f, 1.0f, rng);
  for (auto _ : state) {
    auto c = ops::matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * static_cast<double>(n * n * n),
                                                 benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(64, 512);

void BM_Conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  NoGradGuard no_grad;
  Rng rng(2);
  const auto x = init::normal<float>(Shape{8, c, 16, 16}, 0.0f, 1.0f, rng);
  const auto w = init::fan_in_uniform<float>(Shape{32, c, 3, 3}, c * 9, rng);
  const Tensor<float> bias;
  for (auto _ : state) {
    auto y = ops::conv2d(x, w, bias, 1, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv3x3)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

}  // namespace
