#include <benchmark/benchmark.h>

#include "cloven/eval.hpp"
#include "cloven/losses.hpp"
#include "cloven/train.hpp"

namespace {

using namespace cloven;

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = Tensor::rand_uniform(n, n, 1.0, rng);
  const Tensor b = Tensor::rand_uniform(n, n, 1.0, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_KernelMatrix(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor hidden = Tensor::rand_uniform(n, 128, 1.0, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel_matrix(hidden, 0.15, false));
  }
}
BENCHMARK(BM_KernelMatrix)->Arg(64)->Arg(128);

ModelConfig bench_model() {
  ModelConfig cfg;
  cfg.views = 2;
  cfg.encoder_widths = {{10, 64, 32}, {10, 64, 32}};
  cfg.common_dim = 32;
  cfg.fusion_layers = 2;
  cfg.clusters = 3;
  cfg.clustering_hidden_width = 128;
  return cfg;
}

void BM_TrainStep(benchmark::State& state) {
  Rng init(3);
  CloVenModel model(bench_model(), init);
  Rng data_rng(4);
  const std::vector<Tensor> views{Tensor::rand_uniform(64, 10, 1.0, data_rng),
                                  Tensor::rand_uniform(64, 10, 1.0, data_rng)};
  std::vector<Tensor> params = model.parameter_list();
  AdamState adam;
  TrainConfig tc;
  LossConfig lc;
  Rng dropout_rng(5);
  for (auto _ : state) {
    Graph tape;
    ForwardProducts fwd = model.forward(views, Mode::kTrain, &dropout_rng);
    TotalLoss loss = total_loss(fwd, lc);
    for (Tensor& p : params) p.zero_grad();
    tape.backward(loss.value);
    adam_step(params, adam, tc);
    benchmark::DoNotOptimize(loss.parts.total);
  }
}
BENCHMARK(BM_TrainStep);

void BM_KMeans(benchmark::State& state) {
  Rng rng(6);
  const Tensor points = Tensor::rand_uniform(600, 32, 1.0, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kmeans(points, 3, 1, 100, 10));
  }
}
BENCHMARK(BM_KMeans);

}  // namespace

BENCHMARK_MAIN();
