#include "procap/metrics.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace procap;

namespace {

std::vector<ScoredCaption> corpus(int samples) {
  const std::vector<std::string> words{"a", "the", "red", "blue", "cat", "dog", "on", "in", "sky", "plate",
                                       "wall", "tall", "small", "green", "flag", "star"};
  std::mt19937_64 rng(6);
  auto sentence = [&] {
    std::string s;
    const int len = 5 + static_cast<int>(rng() % 6);
    for (int i = 0; i < len; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return s;
  };
  std::vector<ScoredCaption> c;
  for (int i = 0; i < samples; ++i) c.push_back({sentence(), {sentence(), sentence(), sentence()}});
  return c;
}

}  // namespace

static void BM_Bleu(benchmark::State& state) {
  const auto c = corpus(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bleu4(c));
}
BENCHMARK(BM_Bleu)->Arg(32)->Arg(512);

static void BM_Cider(benchmark::State& state) {
  const auto c = corpus(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cider_d(c));
}
BENCHMARK(BM_Cider)->Arg(32)->Arg(512);

static void BM_Meteor(benchmark::State& state) {
  const auto c = corpus(64);
  for (auto _ : state) {
    double s = 0.0;
    for (const auto& item : c) s += meteor_lite(item.hypothesis, item.references);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_Meteor);
BENCHMARK_MAIN();
