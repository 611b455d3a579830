// Microbenchmarks for exact retrieval over a desk-scale corpus
// (N = 5000, d = 64): top-k search, single-target ranking, and the
// threaded batch ranking path.
#include <benchmark/benchmark.h>

#include <adafuse/numerics.hpp>
#include <adafuse/retrieval.hpp>
#include <adafuse/rng.hpp>

#include <cstdint>
#include <vector>

namespace {

using namespace adafuse;

constexpr std::size_t kCorpusSize = 5000;
constexpr std::size_t kDim = 64;

EmbeddingIndex make_index() {
  Rng rng(31);
  Matrix m(kCorpusSize, kDim);
  std::vector<std::uint64_t> ids(kCorpusSize);
  for (std::size_t i = 0; i < kCorpusSize; ++i) {
    Vector v(kDim);
    for (std::size_t j = 0; j < kDim; ++j) v[j] = real(rng.gaussian());
    v = l2_normalize(v);
    for (std::size_t j = 0; j < kDim; ++j) m.at(i, j) = v[j];
    ids[i] = i;
  }
  return EmbeddingIndex(std::move(ids), std::move(m));
}

Vector random_query(Rng& rng) {
  Vector v(kDim);
  for (std::size_t j = 0; j < kDim; ++j) v[j] = real(rng.gaussian());
  return l2_normalize(v);
}

void bench_top_k(benchmark::State& state) {
  EmbeddingIndex index = make_index();
  Rng rng(32);
  Vector q = random_query(rng);
  const std::size_t k = std::size_t(state.range(0));
  for (auto _ : state) {
    RankedList r = top_k(index, q, k);
    benchmark::DoNotOptimize(r.entries.data());
  }
}
BENCHMARK(bench_top_k)->Arg(10)->Arg(100);

void bench_rank_of(benchmark::State& state) {
  EmbeddingIndex index = make_index();
  Rng rng(33);
  Vector q = random_query(rng);
  for (auto _ : state) {
    std::size_t r = rank_of(index, q, 2500);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(bench_rank_of);

void bench_batch_rank_of(benchmark::State& state) {
  EmbeddingIndex index = make_index();
  Rng rng(34);
  std::vector<Vector> queries;
  std::vector<std::uint64_t> targets;
  for (std::size_t i = 0; i < 64; ++i) {
    queries.push_back(random_query(rng));
    targets.push_back(rng.uniform_index(kCorpusSize));
  }
  const unsigned threads = unsigned(state.range(0));
  for (auto _ : state) {
    std::vector<std::size_t> r = batch_rank_of(index, queries, targets, threads);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(bench_batch_rank_of)->Arg(1)->Arg(4);

} // namespace

BENCHMARK_MAIN();
