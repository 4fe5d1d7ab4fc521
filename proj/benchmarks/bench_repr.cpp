#include <benchmark/benchmark.h>

#include <random>

#include "sgcrl/repr.hpp"

namespace {

using namespace sgcrl;

TripletBatch random_batch(int num_states, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<StateId> pick(0, num_states - 1);
  TripletBatch b;
  for (int i = 0; i < size; ++i) {
    b.anchors.push_back(pick(rng));
    b.futures.push_back(pick(rng));
  }
  return b;
}

// FourRooms-11 sized table, varying batch size.
void BM_InfonceStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  EmbeddingTable table = init_table(121, dim, 1.0, 0.1, 7);
  const TripletBatch b = random_batch(121, batch, 11);
  UpdateConfig cfg;
  cfg.batch_size = batch;
  for (auto _ : state) {
    infonce_step(table, b, cfg);
    benchmark::DoNotOptimize(table.vectors().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_InfonceStep)->Args({32, 64})->Args({128, 64})->Args({512, 64})->Args({128, 256});

void BM_ScalarStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  ScalarSimTable table = ScalarSimTable::from_embeddings(init_table(121, 64, 1.0, 0.1, 7));
  const TripletBatch b = random_batch(121, batch, 11);
  UpdateConfig cfg;
  cfg.batch_size = batch;
  for (auto _ : state) {
    scalar_step(table, b, cfg);
    benchmark::DoNotOptimize(table.sims().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ScalarStep)->Arg(32)->Arg(128)->Arg(512);

}  // namespace
