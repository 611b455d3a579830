#include "run_config.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>

#include <adafuse/errors.hpp>
#include <adafuse/json.hpp>

namespace adafuse::cli {

namespace {

void check_keys(const nlohmann::json& j,
                std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) {
    throw ConfigError(std::string(what) + ": expected a JSON object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string(what) + ": unknown key \"" + item.key() +
                        "\"");
    }
  }
}

} // namespace

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{
      {"gen", c.gen},
      {"fusion", c.fusion},
      {"train", c.train},
      {"eval",
       {{"k", c.k}, {"static_w", c.static_w}, {"methods", c.methods}}},
      {"paths",
       {{"corpus", c.corpus},
        {"dialogues", c.dialogues},
        {"checkpoint", c.checkpoint},
        {"out", c.out}}},
  };
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, {"gen", "fusion", "train", "eval", "paths"}, "config");
  if (j.contains("gen")) c.gen = j.at("gen").get<GenConfig>();
  if (j.contains("fusion")) c.fusion = j.at("fusion").get<FusionConfig>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  if (j.contains("eval")) {
    const nlohmann::json& e = j.at("eval");
    check_keys(e, {"k", "static_w", "methods"}, "eval config");
    c.k = e.value("k", c.k);
    c.static_w = e.value("static_w", c.static_w);
    c.methods = e.value("methods", c.methods);
  }
  if (j.contains("paths")) {
    const nlohmann::json& p = j.at("paths");
    check_keys(p, {"corpus", "dialogues", "checkpoint", "out"}, "paths");
    c.corpus = p.value("corpus", c.corpus);
    c.dialogues = p.value("dialogues", c.dialogues);
    c.checkpoint = p.value("checkpoint", c.checkpoint);
    c.out = p.value("out", c.out);
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw ConfigError("cannot open config file " + path);
  }
  try {
    nlohmann::json j;
    is >> j;
    return j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

void write_resolved_config(const RunConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec) {
    throw IoError("cannot create output directory " + config.out + ": " +
                  ec.message());
  }
  const std::string path =
      (std::filesystem::path(config.out) / "resolved_config.json").string();
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw IoError("cannot open " + path);
  }
  const nlohmann::json j = config;
  os << j.dump(2) << "\n";
  os.flush();
  if (!os) {
    throw IoError("write failed for " + path);
  }
}

} // namespace adafuse::cli
