#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adafuse/fusion.hpp"
#include "adafuse/retrieval.hpp"
#include "adafuse/synthgen.hpp"

namespace adafuse {

// Method tags; these exact strings appear in CSV/JSON output.
inline constexpr const char* kMethodTextOnly = "text_only";
inline constexpr const char* kMethodStatic = "static";
inline constexpr const char* kMethodAdafuse = "adafuse";

// Target rank per (dialogue, round) for one query method; rectangular grid.
// scores carries the query-target dot product alongside each rank, for the
// per-query CSV dump.
struct RankTable {
  std::string method;
  std::vector<std::uint64_t> dialogue_ids;
  std::size_t rounds = 0;
  std::vector<std::size_t> ranks;  // dialogue-major, rounds consecutive
  std::vector<double> scores;      // same layout

  std::size_t dialogues() const { return dialogue_ids.size(); }
  std::size_t rank(std::size_t dialogue, std::size_t round) const {
    return ranks[dialogue * rounds + round];
  }

  // Rectangularity and rank >= 1; throws ValidationError.
  void validate() const;
};

// curve[n] = fraction of dialogues whose best rank over rounds 0..n is <= k.
std::vector<double> hits_at_k_accumulated(const RankTable& table,
                                          std::size_t k);

// Fraction of dialogues strictly worse than text-only at round n; ties are
// not degraded.
double degradation_rate(const RankTable& fused, const RankTable& text,
                        std::size_t round);

// Mean rank worsening over the degraded subset at round n; 0 when empty.
double avg_rank_drop(const RankTable& fused, const RankTable& text,
                     std::size_t round);

struct GateAnalysis {
  double slope = 0;
  double intercept = 0;
  double pearson_r = 0;
  std::size_t count = 0;
};

// OLS fit of image_weight against cos_td over all records. Requires >= 3
// records and non-constant cos_td (DegenerateRegressionError otherwise);
// pearson_r is 0 by convention when image_weight has no variance.
GateAnalysis gate_analysis(const std::vector<GateRecord>& records);

struct DegradationCurve {
  std::vector<double> rate;
  std::vector<double> avg_drop;
};

struct EvalReport {
  std::size_t k = 10;
  real static_w = real(0.55);
  std::size_t rounds = 0;
  std::vector<std::string> methods;
  std::map<std::string, std::vector<double>> hits; // method -> per-round curve
  // Fused method vs text-only; present only when both were evaluated.
  std::map<std::string, DegradationCurve> degradation;
  std::optional<GateAnalysis> gate;

  // Raw per-query data; populated by evaluate_methods, not serialized into
  // the report JSON.
  std::map<std::string, RankTable> rank_tables;
  std::vector<GateRecord> gate_records;
};

// Ranks every requested method over all dialogues and rounds and assembles
// hits/degradation/gate metrics. `params` may be null unless "adafuse" is
// requested. Deterministic; thread count only affects wall time.
EvalReport evaluate_methods(const EmbeddingIndex& index,
                            const std::vector<DialogueSample>& dialogues,
                            const FusionParams* params, real static_w,
                            std::size_t k,
                            const std::vector<std::string>& methods,
                            unsigned threads = 1);

// Figure-data CSVs. Column names are part of the file contract.
void write_hits_csv(const std::string& path, const EvalReport& report);
void write_degradation_csv(const std::string& path, const EvalReport& report);
void write_gate_scatter_csv(const std::string& path,
                            const std::vector<GateRecord>& records);
// query_id,rank,target_id,score with query_id = dialogue_id * rounds + round.
void write_ranks_csv(const std::string& path, const RankTable& table,
                     const std::vector<std::uint64_t>& target_ids);

void write_report_json(const std::string& path, const EvalReport& report);
EvalReport read_report_json(const std::string& path);

} // namespace adafuse
