#pragma once

// JSON bindings for the config structs and the eval report. from_json keeps
// defaults for absent keys and rejects unknown keys (typo safety); every
// serializer is deterministic, so equal values produce equal bytes.

#include <nlohmann/json.hpp>

#include "adafuse/evaluation.hpp"
#include "adafuse/fusion.hpp"
#include "adafuse/synthgen.hpp"
#include "adafuse/training.hpp"

namespace adafuse {

void to_json(nlohmann::json& j, const FusionConfig& c);
void from_json(const nlohmann::json& j, FusionConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

void to_json(nlohmann::json& j, const GateAnalysis& g);
void from_json(const nlohmann::json& j, GateAnalysis& g);

// Serializes the summary (k, static_w, rounds, methods, hits, degradation,
// gate); the raw rank tables and gate records are not part of the report.
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

} // namespace adafuse
