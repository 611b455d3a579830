#include "adafuse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <string>

#include "adafuse/errors.hpp"
#include "adafuse/json.hpp"

namespace adafuse {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_r(real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw IoError("cannot open " + path);
  }
  return os;
}

void finish_csv(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) {
    throw IoError("write failed for " + path);
  }
}

void require_comparable(const RankTable& fused, const RankTable& text,
                        std::size_t round) {
  fused.validate();
  text.validate();
  if (fused.dialogue_ids != text.dialogue_ids || fused.rounds != text.rounds) {
    throw ValidationError("rank tables " + fused.method + " and " +
                          text.method + " cover different dialogues");
  }
  if (round >= fused.rounds) {
    throw ValidationError("round " + std::to_string(round) +
                          " outside table with " +
                          std::to_string(fused.rounds) + " rounds");
  }
}

} // namespace

void RankTable::validate() const {
  if (dialogue_ids.empty() || rounds == 0) {
    throw ValidationError("rank table " + method + " is empty");
  }
  if (ranks.size() != dialogue_ids.size() * rounds) {
    throw ValidationError("rank table " + method + " is ragged: " +
                          std::to_string(ranks.size()) + " ranks for " +
                          std::to_string(dialogue_ids.size()) + "x" +
                          std::to_string(rounds));
  }
  if (!scores.empty() && scores.size() != ranks.size()) {
    throw ValidationError("rank table " + method +
                          " scores do not match ranks");
  }
  for (std::size_t r : ranks) {
    if (r == 0) {
      throw ValidationError("rank table " + method + " contains rank 0");
    }
  }
}

std::vector<double> hits_at_k_accumulated(const RankTable& table,
                                          std::size_t k) {
  if (k == 0) {
    throw ContractError("hits_at_k_accumulated: k must be at least 1");
  }
  table.validate();
  std::vector<double> curve(table.rounds, 0.0);
  for (std::size_t dlg = 0; dlg < table.dialogues(); ++dlg) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t n = 0; n < table.rounds; ++n) {
      best = std::min(best, table.rank(dlg, n));
      if (best <= k) curve[n] += 1.0;
    }
  }
  const double m = static_cast<double>(table.dialogues());
  for (double& v : curve) v /= m;
  return curve;
}

double degradation_rate(const RankTable& fused, const RankTable& text,
                        std::size_t round) {
  require_comparable(fused, text, round);
  std::size_t degraded = 0;
  for (std::size_t dlg = 0; dlg < fused.dialogues(); ++dlg) {
    if (fused.rank(dlg, round) > text.rank(dlg, round)) ++degraded;
  }
  return static_cast<double>(degraded) /
         static_cast<double>(fused.dialogues());
}

double avg_rank_drop(const RankTable& fused, const RankTable& text,
                     std::size_t round) {
  require_comparable(fused, text, round);
  double sum = 0.0;
  std::size_t degraded = 0;
  for (std::size_t dlg = 0; dlg < fused.dialogues(); ++dlg) {
    const std::size_t f = fused.rank(dlg, round);
    const std::size_t t = text.rank(dlg, round);
    if (f > t) {
      sum += static_cast<double>(f - t);
      ++degraded;
    }
  }
  return degraded == 0 ? 0.0 : sum / static_cast<double>(degraded);
}

GateAnalysis gate_analysis(const std::vector<GateRecord>& records) {
  if (records.size() < 3) {
    throw DegenerateRegressionError("gate_analysis: need at least 3 records, "
                                    "got " + std::to_string(records.size()));
  }
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  for (const GateRecord& rec : records) {
    const double x = static_cast<double>(rec.cos_td);
    const double y = static_cast<double>(rec.image_weight);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  if (xmin == xmax) {
    throw DegenerateRegressionError(
        "gate_analysis: cos_td is constant, slope undefined");
  }
  const double n = static_cast<double>(records.size());
  const double sxx_c = n * sxx - sx * sx;
  if (sxx_c <= 0.0) {
    throw DegenerateRegressionError(
        "gate_analysis: cos_td variance vanishes numerically");
  }
  GateAnalysis out;
  out.slope = (n * sxy - sx * sy) / sxx_c;
  out.intercept = (sy - out.slope * sx) / n;
  const double syy_c = n * syy - sy * sy;
  // A gate with zero output variance carries no correlation to report.
  out.pearson_r =
      syy_c <= 0.0 ? 0.0 : (n * sxy - sx * sy) / std::sqrt(sxx_c * syy_c);
  out.count = records.size();
  return out;
}

EvalReport evaluate_methods(const EmbeddingIndex& index,
                            const std::vector<DialogueSample>& dialogues,
                            const FusionParams* params, real static_w,
                            std::size_t k,
                            const std::vector<std::string>& methods,
                            unsigned threads) {
  if (dialogues.empty()) {
    throw ValidationError("evaluate_methods: no dialogues");
  }
  if (k == 0) {
    throw ConfigError("evaluate_methods: k must be at least 1");
  }
  if (methods.empty()) {
    throw ConfigError("evaluate_methods: no methods requested");
  }
  std::set<std::string> seen;
  for (const std::string& m : methods) {
    if (m != kMethodTextOnly && m != kMethodStatic && m != kMethodAdafuse) {
      throw ConfigError("evaluate_methods: unknown method " + m);
    }
    if (!seen.insert(m).second) {
      throw ConfigError("evaluate_methods: method " + m + " listed twice");
    }
  }
  const bool want_adafuse = seen.count(kMethodAdafuse) > 0;
  if (want_adafuse && params == nullptr) {
    throw ConfigError("evaluate_methods: adafuse requested without trained "
                      "parameters");
  }
  if (params != nullptr && params->config.d != index.dim()) {
    throw ConfigError("evaluate_methods: fusion d " +
                      std::to_string(params->config.d) + " vs index dim " +
                      std::to_string(index.dim()));
  }

  const std::size_t rounds = dialogues[0].rounds();
  std::vector<std::uint64_t> dialogue_ids;
  std::vector<std::uint64_t> target_ids;
  dialogue_ids.reserve(dialogues.size());
  target_ids.reserve(dialogues.size());
  for (const DialogueSample& s : dialogues) {
    if (s.rounds() != rounds || s.z_d.size() != rounds) {
      throw ValidationError("evaluate_methods: dialogue " +
                            std::to_string(s.dialogue_id) +
                            " breaks the rectangular round grid");
    }
    for (std::size_t r = 0; r < rounds; ++r) {
      if (s.z_t[r].dim() != index.dim() || s.z_d[r].dim() != index.dim()) {
        throw ValidationError("evaluate_methods: dialogue " +
                              std::to_string(s.dialogue_id) + " round " +
                              std::to_string(r) + " dim differs from index");
      }
    }
    (void)index.row_of(s.target_id); // fail early on foreign targets
    dialogue_ids.push_back(s.dialogue_id);
    target_ids.push_back(s.target_id);
  }

  EvalReport report;
  report.k = k;
  report.static_w = static_w;
  report.rounds = rounds;
  report.methods = methods;

  for (const std::string& method : methods) {
    std::vector<Vector> queries;
    std::vector<std::uint64_t> flat_targets;
    queries.reserve(dialogues.size() * rounds);
    flat_targets.reserve(dialogues.size() * rounds);
    std::vector<GateRecord> records;
    for (const DialogueSample& s : dialogues) {
      for (std::size_t r = 0; r < rounds; ++r) {
        if (method == kMethodTextOnly) {
          queries.push_back(l2_normalize(s.z_t[r]));
        } else if (method == kMethodStatic) {
          queries.push_back(static_fusion(s.z_t[r], s.z_d[r], static_w));
        } else {
          ForwardResult fr =
              fuse_forward(*params, s.z_t[r], s.z_d[r], s.dialogue_id,
                           static_cast<std::uint32_t>(r));
          queries.push_back(std::move(fr.z_final));
          records.push_back(fr.gate);
        }
        flat_targets.push_back(s.target_id);
      }
    }

    RankTable table;
    table.method = method;
    table.dialogue_ids = dialogue_ids;
    table.rounds = rounds;
    table.ranks = batch_rank_of(index, queries, flat_targets, threads);
    table.scores.reserve(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const std::size_t row = index.row_of(flat_targets[q]);
      table.scores.push_back(dot_accum(queries[q].data(),
                                       index.matrix().row(row), index.dim()));
    }
    report.hits[method] = hits_at_k_accumulated(table, k);
    report.rank_tables[method] = std::move(table);
    if (method == kMethodAdafuse) {
      report.gate_records = std::move(records);
    }
  }

  if (seen.count(kMethodTextOnly) > 0) {
    const RankTable& text = report.rank_tables.at(kMethodTextOnly);
    for (const std::string& fused_name : {kMethodStatic, kMethodAdafuse}) {
      if (seen.count(fused_name) == 0) continue;
      const RankTable& fused = report.rank_tables.at(fused_name);
      DegradationCurve curve;
      curve.rate.reserve(rounds);
      curve.avg_drop.reserve(rounds);
      for (std::size_t n = 0; n < rounds; ++n) {
        curve.rate.push_back(degradation_rate(fused, text, n));
        curve.avg_drop.push_back(avg_rank_drop(fused, text, n));
      }
      report.degradation[fused_name] = std::move(curve);
    }
  }

  if (want_adafuse) {
    try {
      report.gate = gate_analysis(report.gate_records);
    } catch (const DegenerateRegressionError&) {
      // A degenerate scatter (constant cosine) leaves the summary absent.
      report.gate.reset();
    }
  }
  return report;
}

void write_hits_csv(const std::string& path, const EvalReport& report) {
  std::ofstream os = open_csv(path);
  os << "round,method,hits_at_k\n";
  for (std::size_t n = 0; n < report.rounds; ++n) {
    for (const std::string& method : report.methods) {
      auto it = report.hits.find(method);
      if (it == report.hits.end()) continue;
      os << n << "," << method << "," << fmt(it->second[n]) << "\n";
    }
  }
  finish_csv(os, path);
}

void write_degradation_csv(const std::string& path, const EvalReport& report) {
  std::ofstream os = open_csv(path);
  os << "round,method,rate,avg_drop\n";
  for (std::size_t n = 0; n < report.rounds; ++n) {
    for (const std::string& method : report.methods) {
      auto it = report.degradation.find(method);
      if (it == report.degradation.end()) continue;
      os << n << "," << method << "," << fmt(it->second.rate[n]) << ","
         << fmt(it->second.avg_drop[n]) << "\n";
    }
  }
  finish_csv(os, path);
}

void write_gate_scatter_csv(const std::string& path,
                            const std::vector<GateRecord>& records) {
  std::ofstream os = open_csv(path);
  os << "sample_id,round,cos_td,image_weight\n";
  for (const GateRecord& rec : records) {
    os << rec.sample_id << "," << rec.round << "," << fmt_r(rec.cos_td) << ","
       << fmt_r(rec.image_weight) << "\n";
  }
  finish_csv(os, path);
}

void write_ranks_csv(const std::string& path, const RankTable& table,
                     const std::vector<std::uint64_t>& target_ids) {
  table.validate();
  if (target_ids.size() != table.dialogues()) {
    throw ValidationError("write_ranks_csv: " +
                          std::to_string(target_ids.size()) +
                          " targets for " + std::to_string(table.dialogues()) +
                          " dialogues");
  }
  std::ofstream os = open_csv(path);
  os << "query_id,rank,target_id,score\n";
  for (std::size_t dlg = 0; dlg < table.dialogues(); ++dlg) {
    for (std::size_t n = 0; n < table.rounds; ++n) {
      const std::uint64_t query_id =
          table.dialogue_ids[dlg] * table.rounds + n;
      const std::size_t idx = dlg * table.rounds + n;
      os << query_id << "," << table.ranks[idx] << "," << target_ids[dlg]
         << "," << fmt(table.scores[idx]) << "\n";
    }
  }
  finish_csv(os, path);
}

void write_report_json(const std::string& path, const EvalReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw IoError("write_report_json: cannot open " + path);
  }
  const nlohmann::json j = report;
  os << j.dump(2) << "\n";
  os.flush();
  if (!os) {
    throw IoError("write_report_json: write failed for " + path);
  }
}

EvalReport read_report_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("read_report_json: cannot open " + path);
  }
  try {
    nlohmann::json j;
    is >> j;
    return j.get<EvalReport>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("read_report_json: " + path + " is not a report: " +
                      e.what());
  }
}

} // namespace adafuse
