#include "procap/semantic_memory.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace procap;

static void BM_Retrieve(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int dim = 64;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  KnowledgeBase kb;
  kb.dim = dim;
  for (int e = 0; e < size; ++e) {
    Eigen::VectorXd key(dim);
    for (int j = 0; j < dim; ++j) key(j) = n(rng);
    key.normalize();
    kb.entries.push_back({key, "name" + std::to_string(e % (size / 2 + 1))});
  }
  ag::Matrix q(8, dim);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(retrieve(q, kb, 9).indices.data());
  state.SetComplexityN(size);
}
BENCHMARK(BM_Retrieve)->RangeMultiplier(4)->Range(8, 8192)->Complexity();
