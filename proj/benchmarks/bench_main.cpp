#include <benchmark/benchmark.h>

#include <random>

#include "agrn/experiment.hpp"

using namespace agrn;

namespace {

Matrix random_signals(std::size_t channels, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(channels, samples);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

ElectrodeGraph random_graph(std::size_t n, std::uint64_t seed) {
  return ElectrodeGraph::from_adjacency(pearson_adjacency(random_signals(n, 256, seed)));
}

Tensor random_input(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Tensor t(shape);
  for (double& v : t.mutable_values()) v = normal(rng);
  return t;
}

void BM_PearsonAdjacency(benchmark::State& state) {
  const Matrix signals = random_signals(64, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(pearson_adjacency(signals));
}
BENCHMARK(BM_PearsonAdjacency)->Arg(1024)->Arg(16384);

void BM_ChebConv(benchmark::State& state) {
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  const auto pyramid = GraphPyramid::build(random_graph(64, 2), 0, 1);
  const ChebConvParams params{random_input({k, 16, 16}, 3), Tensor({16})};
  const Tensor x = random_input({64, pyramid.padded_nodes(), 16}, 4);
  NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(cheb_conv(x, pyramid.laplacians[0], params));
}
BENCHMARK(BM_ChebConv)->Arg(1)->Arg(3)->Arg(8);

void BM_GraclusCoarsen(benchmark::State& state) {
  const auto graph = random_graph(64, 5);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto h = graclus_coarsen(graph, static_cast<std::size_t>(state.range(0)), seed++);
    benchmark::DoNotOptimize(build_permutation(h));
  }
}
BENCHMARK(BM_GraclusCoarsen)->Arg(2)->Arg(6);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig config;
  config.convs_per_block = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = static_cast<std::size_t>(state.range(1));
  const auto pyramid = GraphPyramid::build(random_graph(64, 6), config.n_pool_stages(), 7);
  auto params = init_params(config, pyramid, 8);
  const Tensor raw = random_input({batch * 64}, 9);
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % 4);
  std::vector<Tensor> tensors;
  for (const auto& p : named_parameters(params)) tensors.push_back(p.tensor);
  AdamState adam = AdamState::for_params(tensors, {});
  for (auto _ : state) {
    for (auto& t : tensors) t.zero_grad();
    const Tensor logits = model_forward_raw(config, params, pyramid, raw.values(), batch, true);
    cross_entropy_l2(logits, labels, params, {}).backward();
    adam_step(tensors, adam);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}
BENCHMARK(BM_TrainStep)->Args({2, 64})->Args({3, 64})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
