#include <span>

#include <benchmark/benchmark.h>

#include "nliart/artifacts.hpp"
#include "nliart/metrics.hpp"
#include "nliart/model.hpp"
#include "nliart/synth.hpp"
#include "nliart/train.hpp"

namespace nliart {
namespace {

const SynthCorpus& Corpus() {
  static const SynthCorpus c = [] {
    SynthConfig sc;
    sc.n_train = 4000;
    sc.n_test = 1000;
    return Generate(sc);
  }();
  return c;
}

void BM_Tokenize(benchmark::State& state) {
  const auto& train = Corpus().train;
  std::size_t tokens = 0;
  for (auto _ : state) {
    for (const Example& ex : train) {
      tokens += Tokenize(ex.premise).size() + Tokenize(ex.hypothesis).size();
    }
  }
  benchmark::DoNotOptimize(tokens);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(train.size()));
}
BENCHMARK(BM_Tokenize);

void BM_ProfileAll(benchmark::State& state) {
  const auto& train = Corpus().train;
  const ProfileOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(ProfileAll(train, opts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(train.size()));
}
BENCHMARK(BM_ProfileAll);

void BM_Evaluate(benchmark::State& state) {
  const auto& test = Corpus().test_anti;
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double a = static_cast<double>(i % 7) / 10.0;
    preds.push_back(MakePrediction(test[i].id, {a, 0.5 - a / 2, 0.5 - a / 2}));
  }
  const auto profiles = ProfileAll(test, {});
  const auto pairs = Align(test, preds);
  for (auto _ : state) benchmark::DoNotOptimize(Evaluate(pairs, profiles));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(test.size()));
}
BENCHMARK(BM_Evaluate);

Batch TrainBatch(int size, const ModelConfig& config) {
  return MakeBatch(std::span(Corpus().train).first(static_cast<std::size_t>(size)), config);
}

void BM_Forward(benchmark::State& state) {
  ModelConfig config;
  const Batch batch = TrainBatch(static_cast<int>(state.range(0)), config);
  const ModelParams params = InitParams(config, 0);
  for (auto _ : state) benchmark::DoNotOptimize(Forward(batch, params, config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(32)->Arg(64);

void BM_Backward(benchmark::State& state) {
  ModelConfig config;
  const Batch batch = TrainBatch(static_cast<int>(state.range(0)), config);
  const ModelParams params = InitParams(config, 0);
  for (auto _ : state) benchmark::DoNotOptimize(Backward(batch, params, config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Arg(16)->Arg(32)->Arg(64);

void BM_ContrastiveLoss(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  Tensor proj(b, 32);
  std::vector<Label> labels;
  for (int i = 0; i < b; ++i) {
    labels.push_back(LabelFromIndex(i % 3));
    for (int j = 0; j < 32; ++j) proj.at(i, j) = static_cast<double>((i * 31 + j * 17) % 13) - 6;
  }
  Tensor grad;
  double gt = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ContrastiveLoss(proj, labels, 1.0, ContrastiveVariant::kLiteral, &grad, &gt));
  }
}
BENCHMARK(BM_ContrastiveLoss)->Arg(32)->Arg(128);

}  // namespace
}  // namespace nliart

BENCHMARK_MAIN();
