#pragma once

#include <string>
#include <vector>

#include <adafuse/evaluation.hpp>
#include <adafuse/fusion.hpp>
#include <adafuse/synthgen.hpp>
#include <adafuse/training.hpp>
#include <nlohmann/json.hpp>

namespace adafuse::cli {

// Everything a run can configure, in one place: the three stage configs,
// the eval options, and the file-handoff paths. Loaded from a JSON config
// file ({"gen": ..., "fusion": ..., "train": ..., "eval": ..., "paths":
// ...}, every section optional), then overridden by command line flags; the
// fully resolved value is echoed as resolved_config.json next to each
// command's outputs.
struct RunConfig {
  GenConfig gen;
  FusionConfig fusion;
  TrainConfig train;

  std::size_t k = 10;
  double static_w = 0.55;
  std::vector<std::string> methods = {kMethodTextOnly, kMethodStatic,
                                      kMethodAdafuse};

  std::string corpus;     // corpus file path (input for train/eval)
  std::string dialogues;  // dialogue file path (input for train/eval)
  std::string checkpoint; // checkpoint path (input for eval)
  std::string out = ".";  // output directory
};

// Throws ConfigError on unreadable files, bad JSON, or unknown keys.
RunConfig load_run_config(const std::string& path);

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Creates the directory if needed and writes <out>/resolved_config.json.
void write_resolved_config(const RunConfig& config);

} // namespace adafuse::cli
