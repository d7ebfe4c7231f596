#include <benchmark/benchmark.h>

#include "emu/ensemble.hpp"
#include "emu/loss.hpp"
#include "emu/rng.hpp"

namespace {

emu::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  emu::Rng rng(seed);
  emu::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform();
  return m;
}

// Full-size ensemble with an identity-like preprocessor.
emu::Ensemble table_one(std::size_t members) {
  emu::Ensemble e;
  e.train_config.arch = emu::ArchSpec{12, 500, 5, 400, 1e-6};
  for (std::size_t m = 0; m < members; ++m) e.members.emplace_back(e.train_config.arch, m + 1);
  e.preprocessor.x_mean.assign(12, 0.5);
  e.preprocessor.x_std.assign(12, 0.29);
  e.preprocessor.y_mean.assign(500, 0.0);
  e.preprocessor.y_std.assign(500, 0.1);
  return e;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  const emu::Matrix a = random_matrix(n, k, 1);
  const emu::Matrix b = random_matrix(k, m, 2);
  for (auto _ : state) benchmark::DoNotOptimize(emu::matmul(a, b));
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * n * k * m, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Matmul)->Args({64, 140, 128})->Args({512, 800, 400})->Args({1, 800, 400});

void BM_Predict(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const emu::Ensemble ens = table_one(static_cast<std::size_t>(state.range(1)));
  const emu::Matrix x = random_matrix(batch, 12, 3);
  for (auto _ : state) benchmark::DoNotOptimize(emu::predict(ens, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_Predict)
    ->ArgNames({"batch", "members"})
    ->Args({1, 1})
    ->Args({64, 1})
    ->Args({512, 1})
    ->Args({1800, 1})
    ->Args({512, 2})
    ->Args({512, 6})
    ->Unit(benchmark::kMillisecond);

void BM_AdversarialStep(benchmark::State& state) {
  const emu::ArchSpec spec{12, 64, 3, 128, 1e-6};
  const emu::ProbNet net(spec, 4);
  const emu::Matrix x = random_matrix(64, 12, 5);
  const emu::Matrix y = random_matrix(64, 64, 6);
  const emu::LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(emu::adversarial_loss(net, x, y, cfg));
}
BENCHMARK(BM_AdversarialStep)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
