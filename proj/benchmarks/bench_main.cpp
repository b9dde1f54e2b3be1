#include <benchmark/benchmark.h>

#include "mvlatent/graph.hpp"
#include "mvlatent/mlp.hpp"
#include "mvlatent/rng.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace {

using namespace mvlatent::nn;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Tensor t = Tensor::zeros({r, c});
  Rng rng(seed);
  for (auto& v : t.data) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Tensor a = random_matrix(n, n, 1);
  Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Tensor c = t_matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_MlpForward(benchmark::State& state) {
  MlpSpec spec;
  spec.layer_widths = {273, 1500, 1500, 1500, 70};
  Rng rng(3);
  ParamSet params = init_params(spec, rng);
  Tensor x = random_matrix(200, 273, 4);
  for (auto _ : state) {
    MlpOutput out = forward_mlp(spec, params, x);
    benchmark::DoNotOptimize(out.first.data.data());
  }
}
BENCHMARK(BM_MlpForward);

void BM_MlpForwardBackward(benchmark::State& state) {
  MlpSpec spec;
  spec.layer_widths = {273, 1500, 70};
  Rng rng(5);
  ParamSet params = init_params(spec, rng);
  Tensor x = random_matrix(200, 273, 6);
  for (auto _ : state) {
    Graph g;
    std::vector<Value> leaves = bind_params(g, params);
    Value input = g.constant(x, "x");
    MlpValues out = apply_mlp(g, spec, leaves, input);
    Value loss = ops::mean_all(ops::square(out.first));
    g.backward(loss);
    benchmark::DoNotOptimize(g.grad(leaves[0]).data.data());
  }
}
BENCHMARK(BM_MlpForwardBackward);

}  // namespace

BENCHMARK_MAIN();
