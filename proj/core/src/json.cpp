#include "adafuse/json.hpp"

#include <initializer_list>
#include <string>

#include "adafuse/errors.hpp"

namespace adafuse {

namespace {

// Config files reject unknown keys so typos fail loudly instead of silently
// falling back to defaults.
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

void to_json(nlohmann::json& j, const FusionConfig& c) {
  j = nlohmann::json{{"d", c.d},
                     {"d_proj", c.d_proj},
                     {"d_mid", c.d_mid},
                     {"d_hidden", c.d_hidden},
                     {"n_experts", c.n_experts},
                     {"d_router", c.d_router}};
}

void from_json(const nlohmann::json& j, FusionConfig& c) {
  check_keys(j, {"d", "d_proj", "d_mid", "d_hidden", "n_experts", "d_router"},
             "fusion config");
  c.d = j.value("d", c.d);
  c.d_proj = j.value("d_proj", c.d_proj);
  c.d_mid = j.value("d_mid", c.d_mid);
  c.d_hidden = j.value("d_hidden", c.d_hidden);
  c.n_experts = j.value("n_experts", c.n_experts);
  c.d_router = j.value("d_router", c.d_router);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"temperature", c.temperature},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"epsilon", c.epsilon},
                     {"clip_norm", c.clip_norm},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_keys(j,
             {"learning_rate", "temperature", "batch_size", "epochs", "beta1",
              "beta2", "epsilon", "clip_norm", "seed"},
             "train config");
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.temperature = j.value("temperature", c.temperature);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const GenConfig& c) {
  j = nlohmann::json{{"corpus_size", c.corpus_size},
                     {"dim", c.dim},
                     {"dialogues", c.dialogues},
                     {"rounds", c.rounds},
                     {"sigma0", c.sigma0},
                     {"gamma", c.gamma},
                     {"rho", c.rho},
                     {"sigma_good", c.sigma_good},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  check_keys(j,
             {"corpus_size", "dim", "dialogues", "rounds", "sigma0", "gamma",
              "rho", "sigma_good", "seed"},
             "gen config");
  c.corpus_size = j.value("corpus_size", c.corpus_size);
  c.dim = j.value("dim", c.dim);
  c.dialogues = j.value("dialogues", c.dialogues);
  c.rounds = j.value("rounds", c.rounds);
  c.sigma0 = j.value("sigma0", c.sigma0);
  c.gamma = j.value("gamma", c.gamma);
  c.rho = j.value("rho", c.rho);
  c.sigma_good = j.value("sigma_good", c.sigma_good);
  c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const GateAnalysis& g) {
  j = nlohmann::json{{"slope", g.slope},
                     {"intercept", g.intercept},
                     {"pearson_r", g.pearson_r},
                     {"count", g.count}};
}

void from_json(const nlohmann::json& j, GateAnalysis& g) {
  g.slope = j.at("slope").get<double>();
  g.intercept = j.at("intercept").get<double>();
  g.pearson_r = j.at("pearson_r").get<double>();
  g.count = j.at("count").get<std::size_t>();
}

namespace {

void to_json(nlohmann::json& j, const DegradationCurve& c) {
  j = nlohmann::json{{"rate", c.rate}, {"avg_drop", c.avg_drop}};
}

void from_json(const nlohmann::json& j, DegradationCurve& c) {
  c.rate = j.at("rate").get<std::vector<double>>();
  c.avg_drop = j.at("avg_drop").get<std::vector<double>>();
}

} // namespace

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"k", r.k},
                     {"static_w", static_cast<double>(r.static_w)},
                     {"rounds", r.rounds},
                     {"methods", r.methods}};
  j["hits"] = r.hits;
  nlohmann::json degradation = nlohmann::json::object();
  for (const auto& [name, curve] : r.degradation) {
    nlohmann::json cj;
    to_json(cj, curve);
    degradation[name] = std::move(cj);
  }
  j["degradation"] = std::move(degradation);
  if (r.gate) {
    j["gate"] = *r.gate;
  }
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.k = j.at("k").get<std::size_t>();
  r.static_w = static_cast<real>(j.at("static_w").get<double>());
  r.rounds = j.at("rounds").get<std::size_t>();
  r.methods = j.at("methods").get<std::vector<std::string>>();
  r.hits = j.at("hits").get<std::map<std::string, std::vector<double>>>();
  r.degradation.clear();
  for (const auto& item : j.at("degradation").items()) {
    DegradationCurve curve;
    from_json(item.value(), curve);
    r.degradation[item.key()] = std::move(curve);
  }
  if (j.contains("gate")) {
    r.gate = j.at("gate").get<GateAnalysis>();
  } else {
    r.gate.reset();
  }
}

} // namespace adafuse
