#include "adafuse/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <thread>
#include <utility>

#include "adafuse/errors.hpp"

namespace adafuse {

namespace {

constexpr double kUnitTolerance = 1e-4;

// The total order behind every ranking: higher score first, then lower id.
bool better(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

void require_query(const EmbeddingIndex& index, const Vector& query) {
  if (query.dim() != index.dim()) {
    throw ShapeError("query dim " + std::to_string(query.dim()) +
                     " vs index dim " + std::to_string(index.dim()));
  }
  const double n = norm(query);
  if (std::abs(n - 1.0) > kUnitTolerance) {
    throw ContractError("query norm " + std::to_string(n) + " is not unit");
  }
}

} // namespace

EmbeddingIndex::EmbeddingIndex(std::vector<std::uint64_t> ids, Matrix matrix)
    : ids_(std::move(ids)), matrix_(std::move(matrix)) {
  if (ids_.empty()) {
    throw ValidationError("index: empty id list");
  }
  if (ids_.size() != matrix_.rows()) {
    throw ValidationError("index: " + std::to_string(ids_.size()) +
                          " ids for " + std::to_string(matrix_.rows()) +
                          " rows");
  }
  for (std::size_t i = 0; i < matrix_.rows(); ++i) {
    const double n =
        std::sqrt(dot_accum(matrix_.row(i), matrix_.row(i), matrix_.cols()));
    if (std::abs(n - 1.0) > kUnitTolerance) {
      throw ValidationError("index: row " + std::to_string(i) + " has norm " +
                            std::to_string(n) + ", expected unit");
    }
  }
  row_by_id_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!row_by_id_.emplace(ids_[i], i).second) {
      throw ValidationError("index: duplicate id " + std::to_string(ids_[i]));
    }
  }
}

std::size_t EmbeddingIndex::row_of(std::uint64_t id) const {
  auto it = row_by_id_.find(id);
  if (it == row_by_id_.end()) {
    throw LookupError("index: unknown id " + std::to_string(id));
  }
  return it->second;
}

RankedList top_k(const EmbeddingIndex& index, const Vector& query,
                 std::size_t k) {
  if (k == 0) {
    throw ContractError("top_k: k must be at least 1");
  }
  require_query(index, query);

  RankedList result;
  if (k > index.size()) {
    k = index.size();
    result.k_clamped = true;
  }

  // Min-heap under `better`: the top is the weakest entry kept so far.
  std::priority_queue<ScoredId, std::vector<ScoredId>,
                      bool (*)(const ScoredId&, const ScoredId&)>
      heap(&better);
  const Matrix& m = index.matrix();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const ScoredId cand{index.ids()[i],
                        dot_accum(query.data(), m.row(i), m.cols())};
    if (heap.size() < k) {
      heap.push(cand);
    } else if (better(cand, heap.top())) {
      heap.pop();
      heap.push(cand);
    }
  }

  result.entries.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    result.entries[i] = heap.top();
    heap.pop();
  }
  return result;
}

std::size_t rank_of(const EmbeddingIndex& index, const Vector& query,
                    std::uint64_t target_id) {
  require_query(index, query);
  const std::size_t target_row = index.row_of(target_id);
  const Matrix& m = index.matrix();
  const ScoredId target{target_id,
                        dot_accum(query.data(), m.row(target_row), m.cols())};
  std::size_t strictly_better = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i == target_row) continue;
    const ScoredId cand{index.ids()[i],
                        dot_accum(query.data(), m.row(i), m.cols())};
    if (better(cand, target)) ++strictly_better;
  }
  return 1 + strictly_better;
}

std::vector<std::size_t> batch_rank_of(const EmbeddingIndex& index,
                                       const std::vector<Vector>& queries,
                                       const std::vector<std::uint64_t>& targets,
                                       unsigned threads) {
  if (queries.size() != targets.size()) {
    throw ShapeError("batch_rank_of: " + std::to_string(queries.size()) +
                     " queries for " + std::to_string(targets.size()) +
                     " targets");
  }
  // Validate everything up front so the workers only do pure arithmetic.
  for (const Vector& q : queries) require_query(index, q);
  for (std::uint64_t t : targets) (void)index.row_of(t);

  std::vector<std::size_t> ranks(queries.size());
  auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      ranks[i] = rank_of(index, queries[i], targets[i]);
    }
  };

  const std::size_t n = queries.size();
  if (threads <= 1 || n < 2) {
    run(0, n);
    return ranks;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(run, lo, hi);
  }
  for (std::thread& t : pool) t.join();
  return ranks;
}

} // namespace adafuse
