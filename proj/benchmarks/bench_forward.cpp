#include "procap/model.hpp"
#include "procap/trainer.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace procap;

namespace {

Image noise_image(int size, std::uint64_t seed) {
  Image img(size, size, 3);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.data) v = u(rng);
  return img;
}

Vocabulary toy_vocab() {
  return Vocabulary::build({"a red apple on a white plate", "a brick wall beside a tall window"});
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const ProCapModel model(ModelConfig{}, toy_vocab());
  const Image img = noise_image(static_cast<int>(state.range(0)), 1);
  ag::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(img, nullptr, {}).prompts.projection.value().data());
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  ProCapModel model(ModelConfig{}, toy_vocab());
  const Image img = noise_image(64, 2);
  Image mask(64, 64, 1, 0.0);
  for (int y = 16; y < 48; ++y) {
    for (int x = 16; x < 48; ++x) mask.at(y, x, 0) = 1.0;
  }
  TrainItem item;
  item.sample_id = "bench";
  item.composite = &img;
  item.gt_mask = &mask;
  item.scene_captions = {model.vocab().encode("a brick wall beside a tall window", 32)};
  item.projection_captions = {model.vocab().encode("a red apple on a white plate", 32)};
  const std::vector<TrainItem> batch(static_cast<std::size_t>(state.range(0)), item);
  Trainer trainer(model, nullptr, TrainConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch, 1e-4).total);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_GreedyCaption(benchmark::State& state) {
  const ProCapModel model(ModelConfig{}, toy_vocab());
  const Image img = noise_image(64, 3);
  GenerateOptions gen;
  gen.max_len = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(model.caption(img, nullptr, gen).projection.size());
}
BENCHMARK(BM_GreedyCaption)->Arg(8)->Arg(30)->Unit(benchmark::kMillisecond);
