#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "adafuse/numerics.hpp"

namespace adafuse {

struct ScoredId {
  std::uint64_t id = 0;
  double score = 0;
};

// Top-k result ordered by (score desc, id asc). k_clamped records that the
// requested k exceeded the corpus size.
struct RankedList {
  std::vector<ScoredId> entries;
  bool k_clamped = false;
};

// Immutable exact-search index over unit rows. Queries are read-only and
// safe to run concurrently.
class EmbeddingIndex {
public:
  // Validates unit norms (within 1e-4) and id uniqueness.
  EmbeddingIndex(std::vector<std::uint64_t> ids, Matrix matrix);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return matrix_.cols(); }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  const Matrix& matrix() const { return matrix_; }
  std::size_t row_of(std::uint64_t id) const; // throws LookupError

private:
  std::vector<std::uint64_t> ids_;
  Matrix matrix_;
  std::unordered_map<std::uint64_t, std::size_t> row_by_id_;
};

// Exact top-k under (score desc, id asc); k > N clamps and sets k_clamped.
RankedList top_k(const EmbeddingIndex& index, const Vector& query,
                 std::size_t k);

// 1 + number of corpus items strictly better than the target under the same
// total order. Throws LookupError for unknown target ids.
std::size_t rank_of(const EmbeddingIndex& index, const Vector& query,
                    std::uint64_t target_id);

// Batch variant; output order matches input order regardless of thread
// count (each query writes its own slot).
std::vector<std::size_t> batch_rank_of(const EmbeddingIndex& index,
                                       const std::vector<Vector>& queries,
                                       const std::vector<std::uint64_t>& targets,
                                       unsigned threads);

} // namespace adafuse
