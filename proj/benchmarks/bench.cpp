#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "vstack/learners.hpp"
#include "vstack/pipeline.hpp"
#include "vstack/random.hpp"
#include "vstack/voting.hpp"

using namespace vstack;

namespace {

Dataset blobs(std::size_t n, std::size_t c, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s{"b" + std::to_string(i), {}, i % c};
    for (std::size_t j = 0; j < d; ++j) s.features.push_back(static_cast<double>(s.label) + rng.normal());
    rows.push_back(std::move(s));
  }
  return Dataset(std::move(rows), c, d);
}

void BM_FitSoftmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto train = blobs(n, 5, 15, 1);
  const auto val = blobs(n / 5, 5, 15, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 10;
  for (auto _ : state) benchmark::DoNotOptimize(fit_softmax(train, val, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * cfg.max_epochs));
}
BENCHMARK(BM_FitSoftmax)->Arg(256)->Arg(1024)->Arg(4096);

void BM_SoftVote(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<ProbabilityVector> ps;
  for (std::size_t i = 0; i < t; ++i) {
    std::vector<double> v(5);
    double total = 0.0;
    for (auto& x : v) total += (x = rng.uniform() + 1e-3);
    for (auto& x : v) x /= total;
    ps.push_back(renormalize_probability_vector(v, kIngestTolerance));
  }
  for (auto _ : state) benchmark::DoNotOptimize(soft_vote(ps));
}
BENCHMARK(BM_SoftVote)->Arg(3)->Arg(10)->Arg(50);

void BM_KnnPredict(benchmark::State& state) {
  const auto train = blobs(static_cast<std::size_t>(state.range(0)), 5, 15, 4);
  const auto model = fit_knn(train, 5);
  const auto probe = train[0].features;
  for (auto _ : state) benchmark::DoNotOptimize(knn_predict(model, probe));
}
BENCHMARK(BM_KnnPredict)->Arg(500)->Arg(5000);

void BM_SyntheticTablePipeline(benchmark::State& state) {
  RunConfig cfg;
  cfg.synthetic_table.samples_per_class = static_cast<std::size_t>(state.range(0));
  cfg.meta.train.learning_rate = 0.01;
  cfg.ablation = false;
  for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(cfg).report.stack.modes.size());
}
BENCHMARK(BM_SyntheticTablePipeline)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
