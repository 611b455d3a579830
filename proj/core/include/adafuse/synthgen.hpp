#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "adafuse/numerics.hpp"

namespace adafuse {

// Synthetic-data knobs. Text embeddings sharpen geometrically with the
// round index (noise sigma0 * gamma^n); generated-image embeddings point at
// the target with probability rho and at a uniformly chosen other corpus
// item otherwise, both blurred by sigma_good.
struct GenConfig {
  std::size_t corpus_size = 5000; // N
  std::size_t dim = 64;           // d
  std::size_t dialogues = 500;    // M
  std::size_t rounds = 11;        // R, rounds 0..R-1
  double sigma0 = 0.9;
  double gamma = 0.85;
  double rho = 0.6;       // probability the image is aligned with the target
  double sigma_good = 0.3;
  std::uint64_t seed = 0;

  double sigma_text(std::size_t round) const;

  void validate() const;

  bool operator==(const GenConfig&) const = default;
};

struct Corpus {
  std::vector<std::uint64_t> ids;
  Matrix embeddings; // N x d, unit rows

  std::size_t size() const { return ids.size(); }
  // Row index for an id; throws LookupError for unknown ids.
  std::size_t row_of(std::uint64_t id) const;

private:
  friend Corpus make_corpus(std::vector<std::uint64_t> ids, Matrix embeddings);
  std::unordered_map<std::uint64_t, std::size_t> row_by_id_;
};

// Validates shapes and id uniqueness and builds the id lookup.
Corpus make_corpus(std::vector<std::uint64_t> ids, Matrix embeddings);

struct DialogueSample {
  std::uint64_t dialogue_id = 0;
  std::uint64_t target_id = 0;
  std::vector<Vector> z_t; // per round, unit
  std::vector<Vector> z_d; // per round, unit
  // Generator-side ground truth for analysis; never shown to the model.
  std::vector<std::uint8_t> is_corrupt;

  std::size_t rounds() const { return z_t.size(); }
};

// N unit directions, ids 0..N-1. Deterministic per seed.
Corpus generate_corpus(const GenConfig& config);

// Dialogues with ids first_id..first_id+count-1. Each dialogue draws from
// its own substream of (seed, dialogue_id), so any id range is reproducible
// independently of the others; held-out sets are just a disjoint id range.
std::vector<DialogueSample> generate_dialogues(const GenConfig& config,
                                               const Corpus& corpus,
                                               std::uint64_t first_id,
                                               std::size_t count);

// The default range 0..M-1.
std::vector<DialogueSample> generate_dialogues(const GenConfig& config,
                                               const Corpus& corpus);

// Corpus file: magic "ADEC", version u32 LE, N u32 LE, d u32 LE, N*d 32-bit
// LE floats; row->id manifest as JSON lines at <path>.manifest.jsonl.
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

// Dialogue files: JSON lines (one sample per line, embeddings as arrays) or
// the binary twin, magic "ADED". load_dialogues() detects the format.
void save_dialogues_jsonl(const std::string& path,
                          const std::vector<DialogueSample>& samples);
void save_dialogues_binary(const std::string& path,
                           const std::vector<DialogueSample>& samples);
std::vector<DialogueSample> load_dialogues(const std::string& path);

} // namespace adafuse
