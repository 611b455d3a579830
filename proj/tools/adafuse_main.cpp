#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <adafuse/checkpoint.hpp>
#include <adafuse/errors.hpp>
#include <adafuse/evaluation.hpp>
#include <adafuse/json.hpp>
#include <adafuse/retrieval.hpp>
#include <adafuse/synthgen.hpp>
#include <adafuse/training.hpp>
#include <nlohmann/json.hpp>

#include "log.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;

namespace adafuse::cli {
namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void emit(const nlohmann::json& j) { std::cout << j.dump() << "\n"; }

// ---- gen-data -------------------------------------------------------------

struct GenDataArgs {
  RunConfig cfg;
  std::size_t eval_count = 0;
  bool eval_count_set = false;
  bool binary = false;
};

void cmd_gen_data(const GenDataArgs& args) {
  const RunConfig& cfg = args.cfg;
  cfg.gen.validate();
  write_resolved_config(cfg);

  log_info("generating corpus of " + std::to_string(cfg.gen.corpus_size) +
           " items, dim " + std::to_string(cfg.gen.dim));
  const Corpus corpus = generate_corpus(cfg.gen);
  const std::string corpus_path = join(cfg.out, "corpus.adec");
  save_corpus(corpus_path, corpus);

  const char* ext = args.binary ? ".aded" : ".jsonl";
  auto save = args.binary ? save_dialogues_binary : save_dialogues_jsonl;

  log_info("generating " + std::to_string(cfg.gen.dialogues) +
           " training dialogues");
  const std::string dlg_path = join(cfg.out, std::string("dialogues") + ext);
  save(dlg_path, generate_dialogues(cfg.gen, corpus));

  // Held-out dialogues continue the id range, so they draw from disjoint
  // substreams of the same seed.
  const std::size_t eval_count =
      args.eval_count_set ? args.eval_count : cfg.gen.dialogues;
  nlohmann::json summary{{"corpus", corpus_path}, {"dialogues", dlg_path}};
  if (eval_count > 0) {
    log_info("generating " + std::to_string(eval_count) +
             " held-out dialogues");
    const std::string eval_path =
        join(cfg.out, std::string("dialogues_eval") + ext);
    save(eval_path,
         generate_dialogues(cfg.gen, corpus, cfg.gen.dialogues, eval_count));
    summary["dialogues_eval"] = eval_path;
  }
  emit(summary);
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  RunConfig cfg;
  std::size_t save_every = 0;
};

void cmd_train(const TrainArgs& args) {
  const RunConfig& cfg = args.cfg;
  if (cfg.corpus.empty()) {
    throw ConfigError("train: no corpus path (--corpus or paths.corpus)");
  }
  if (cfg.dialogues.empty()) {
    throw ConfigError("train: no dialogue path (--dialogues or "
                      "paths.dialogues)");
  }
  cfg.fusion.validate();
  cfg.train.validate();
  write_resolved_config(cfg);

  const Corpus corpus = load_corpus(cfg.corpus);
  const std::vector<DialogueSample> dialogues = load_dialogues(cfg.dialogues);
  log_info("training on " + std::to_string(dialogues.size()) +
           " dialogues for " + std::to_string(cfg.train.epochs) + " epochs");

  const std::string log_path = join(cfg.out, "train_log.jsonl");
  std::ofstream log_os(log_path, std::ios::trunc);
  if (!log_os) {
    throw IoError("cannot open " + log_path);
  }

  auto last = std::chrono::steady_clock::now();
  const TrainResult result = train(
      dialogues, corpus, cfg.fusion, cfg.train,
      [&](std::size_t epoch, double mean_loss, const FusionParams& params) {
        const auto now = std::chrono::steady_clock::now();
        const auto wall_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(now - last)
                .count();
        last = now;
        const nlohmann::json line{
            {"epoch", epoch}, {"mean_loss", mean_loss}, {"wall_ms", wall_ms}};
        log_os << line.dump() << "\n";
        log_os.flush();
        log_info("epoch " + std::to_string(epoch) + " mean loss " +
                 std::to_string(mean_loss));
        if (args.save_every > 0 && epoch % args.save_every == 0 &&
            epoch != cfg.train.epochs) {
          save_checkpoint(join(cfg.out, "checkpoint_epoch" +
                                            std::to_string(epoch) + ".adfs"),
                          params);
        }
      });
  if (!log_os) {
    throw IoError("write failed for " + log_path);
  }

  const std::string ckpt_path = join(cfg.out, "checkpoint.adfs");
  save_checkpoint(ckpt_path, result.params);

  nlohmann::json summary{{"checkpoint", ckpt_path},
                         {"epochs", cfg.train.epochs}};
  if (!result.loss_curve.empty()) {
    summary["final_loss"] = result.loss_curve.back();
  }
  emit(summary);
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  RunConfig cfg;
  unsigned threads = 1;
};

void cmd_eval(const EvalArgs& args) {
  const RunConfig& cfg = args.cfg;
  if (cfg.corpus.empty()) {
    throw ConfigError("eval: no corpus path (--corpus or paths.corpus)");
  }
  if (cfg.dialogues.empty()) {
    throw ConfigError("eval: no dialogue path (--dialogues or "
                      "paths.dialogues)");
  }
  const bool want_adafuse =
      std::find(cfg.methods.begin(), cfg.methods.end(), kMethodAdafuse) !=
      cfg.methods.end();
  if (want_adafuse && cfg.checkpoint.empty()) {
    throw ConfigError("eval: method adafuse needs --checkpoint or "
                      "paths.checkpoint");
  }
  write_resolved_config(cfg);

  const Corpus corpus = load_corpus(cfg.corpus);
  const EmbeddingIndex index(corpus.ids, corpus.embeddings);
  const std::vector<DialogueSample> dialogues = load_dialogues(cfg.dialogues);
  std::optional<FusionParams> params;
  if (want_adafuse) {
    params = load_checkpoint(cfg.checkpoint);
  }
  log_info("evaluating " + std::to_string(dialogues.size()) +
           " dialogues against " + std::to_string(index.size()) + " items");

  const EvalReport report = evaluate_methods(
      index, dialogues, params ? &*params : nullptr,
      static_cast<real>(cfg.static_w), cfg.k, cfg.methods, args.threads);

  const std::string report_path = join(cfg.out, "report.json");
  write_report_json(report_path, report);
  write_hits_csv(join(cfg.out, "hits_curve.csv"), report);
  if (!report.degradation.empty()) {
    write_degradation_csv(join(cfg.out, "degradation.csv"), report);
  }
  if (want_adafuse) {
    write_gate_scatter_csv(join(cfg.out, "gate_scatter.csv"),
                           report.gate_records);
  }
  std::vector<std::uint64_t> target_ids;
  target_ids.reserve(dialogues.size());
  for (const DialogueSample& s : dialogues) {
    target_ids.push_back(s.target_id);
  }
  for (const std::string& method : cfg.methods) {
    write_ranks_csv(join(cfg.out, "ranks_" + method + ".csv"),
                    report.rank_tables.at(method), target_ids);
  }

  emit(nlohmann::json{{"report", report_path}});
}

// ---- compare --------------------------------------------------------------

struct CompareArgs {
  std::string report_a;
  std::string report_b;
  std::string out;
};

std::string sign_consistency(const std::vector<double>& deltas) {
  const bool all_zero =
      std::all_of(deltas.begin(), deltas.end(), [](double d) { return d == 0; });
  if (all_zero) return "zero";
  if (std::all_of(deltas.begin(), deltas.end(),
                  [](double d) { return d > 0; })) {
    return "positive";
  }
  if (std::all_of(deltas.begin(), deltas.end(),
                  [](double d) { return d < 0; })) {
    return "negative";
  }
  return "mixed";
}

void cmd_compare(const CompareArgs& args) {
  const EvalReport a = read_report_json(args.report_a);
  const EvalReport b = read_report_json(args.report_b);
  if (a.rounds != b.rounds) {
    throw FormatError("compare: reports cover " + std::to_string(a.rounds) +
                      " vs " + std::to_string(b.rounds) + " rounds");
  }

  auto deltas_of = [&](const std::vector<double>& va,
                       const std::vector<double>& vb) {
    if (va.size() != a.rounds || vb.size() != a.rounds) {
      throw FormatError("compare: curve length differs from declared rounds");
    }
    std::vector<double> d(a.rounds);
    for (std::size_t n = 0; n < a.rounds; ++n) d[n] = vb[n] - va[n];
    return d;
  };

  nlohmann::json j{{"rounds", a.rounds}};
  nlohmann::json hits = nlohmann::json::object();
  nlohmann::json consistency = nlohmann::json::object();
  nlohmann::json hits_cons = nlohmann::json::object();
  for (const auto& [method, curve] : a.hits) {
    auto it = b.hits.find(method);
    if (it == b.hits.end()) continue;
    const std::vector<double> d = deltas_of(curve, it->second);
    hits_cons[method] = sign_consistency(d);
    hits[method] = d;
  }
  j["hits_delta"] = std::move(hits);
  consistency["hits"] = std::move(hits_cons);

  nlohmann::json rate = nlohmann::json::object();
  nlohmann::json drop = nlohmann::json::object();
  nlohmann::json rate_cons = nlohmann::json::object();
  for (const auto& [method, curve] : a.degradation) {
    auto it = b.degradation.find(method);
    if (it == b.degradation.end()) continue;
    const std::vector<double> dr = deltas_of(curve.rate, it->second.rate);
    rate_cons[method] = sign_consistency(dr);
    rate[method] = dr;
    drop[method] = deltas_of(curve.avg_drop, it->second.avg_drop);
  }
  j["degradation_rate_delta"] = std::move(rate);
  j["avg_drop_delta"] = std::move(drop);
  consistency["degradation_rate"] = std::move(rate_cons);
  j["consistency"] = std::move(consistency);

  if (!args.out.empty()) {
    std::error_code ec;
    fs::create_directories(args.out, ec);
    if (ec) {
      throw IoError("cannot create output directory " + args.out + ": " +
                    ec.message());
    }
    const std::string path = join(args.out, "delta.json");
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
      throw IoError("cannot open " + path);
    }
    os << j.dump(2) << "\n";
    os.flush();
    if (!os) {
      throw IoError("write failed for " + path);
    }
  }
  std::cout << j.dump(2) << "\n";
}

} // namespace
} // namespace adafuse::cli

int main(int argc, char** argv) {
  using namespace adafuse;
  using namespace adafuse::cli;

  CLI::App app{"adaptive text/image fusion retrieval experiments"};
  app.require_subcommand(1);

  // Each command resolves its RunConfig the same way: config file first,
  // then any flag the user actually passed on top.
  GenDataArgs gen_args;
  TrainArgs train_args;
  EvalArgs eval_args;
  CompareArgs compare_args;
  std::string config_path;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
  };

  CLI::App* gen = app.add_subcommand("gen-data",
                                     "generate a synthetic corpus and "
                                     "dialogue files");
  add_config(gen);
  auto* g_out = gen->add_option("--out", gen_args.cfg.out, "output directory");
  std::uint64_t g_seed = 0;
  auto* g_seed_opt = gen->add_option("--seed", g_seed, "generator seed");
  std::size_t g_n = 0, g_d = 0, g_m = 0, g_r = 0;
  auto* g_n_opt = gen->add_option("--corpus-size", g_n, "corpus items");
  auto* g_d_opt = gen->add_option("--dim", g_d, "embedding dim");
  auto* g_m_opt = gen->add_option("--dialogues", g_m, "training dialogues");
  auto* g_r_opt = gen->add_option("--rounds", g_r, "rounds per dialogue");
  double g_sigma0 = 0, g_gamma = 0, g_rho = 0, g_sigma_good = 0;
  auto* g_s0_opt = gen->add_option("--sigma0", g_sigma0, "round-0 text noise");
  auto* g_ga_opt = gen->add_option("--gamma", g_gamma, "text noise decay");
  auto* g_rh_opt = gen->add_option("--rho", g_rho, "image reliability");
  auto* g_sg_opt =
      gen->add_option("--sigma-good", g_sigma_good, "image noise");
  gen->add_option("--eval-dialogues", gen_args.eval_count,
                  "held-out dialogue count (default: same as --dialogues)")
      ->each([&](const std::string&) { gen_args.eval_count_set = true; });
  gen->add_flag("--binary", gen_args.binary,
                "write dialogues in the binary format");
  gen->callback([&] {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (g_out->count()) cfg.out = gen_args.cfg.out;
    if (g_seed_opt->count()) cfg.gen.seed = g_seed;
    if (g_n_opt->count()) cfg.gen.corpus_size = g_n;
    if (g_d_opt->count()) cfg.gen.dim = g_d;
    if (g_m_opt->count()) cfg.gen.dialogues = g_m;
    if (g_r_opt->count()) cfg.gen.rounds = g_r;
    if (g_s0_opt->count()) cfg.gen.sigma0 = g_sigma0;
    if (g_ga_opt->count()) cfg.gen.gamma = g_gamma;
    if (g_rh_opt->count()) cfg.gen.rho = g_rho;
    if (g_sg_opt->count()) cfg.gen.sigma_good = g_sigma_good;
    gen_args.cfg = std::move(cfg);
    cmd_gen_data(gen_args);
  });

  CLI::App* tr = app.add_subcommand("train", "train the fusion module");
  add_config(tr);
  auto* t_out = tr->add_option("--out", train_args.cfg.out, "output directory");
  auto* t_corpus =
      tr->add_option("--corpus", train_args.cfg.corpus, "corpus file");
  auto* t_dlg = tr->add_option("--dialogues", train_args.cfg.dialogues,
                               "dialogue file");
  std::uint64_t t_seed = 0;
  auto* t_seed_opt =
      tr->add_option("--seed", t_seed, "init and shuffle seed");
  std::size_t t_epochs = 0, t_batch = 0;
  auto* t_ep_opt = tr->add_option("--epochs", t_epochs, "training epochs");
  auto* t_bs_opt = tr->add_option("--batch-size", t_batch, "batch size");
  double t_lr = 0, t_tau = 0, t_clip = 0;
  auto* t_lr_opt = tr->add_option("--learning-rate", t_lr, "Adam step size");
  auto* t_tau_opt =
      tr->add_option("--temperature", t_tau, "similarity temperature");
  auto* t_clip_opt =
      tr->add_option("--clip-norm", t_clip, "gradient clip (0 disables)");
  tr->add_option("--save-every", train_args.save_every,
                 "also checkpoint every N epochs");
  tr->callback([&] {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (t_out->count()) cfg.out = train_args.cfg.out;
    if (t_corpus->count()) cfg.corpus = train_args.cfg.corpus;
    if (t_dlg->count()) cfg.dialogues = train_args.cfg.dialogues;
    if (t_seed_opt->count()) cfg.train.seed = t_seed;
    if (t_ep_opt->count()) cfg.train.epochs = t_epochs;
    if (t_bs_opt->count()) cfg.train.batch_size = t_batch;
    if (t_lr_opt->count()) cfg.train.learning_rate = t_lr;
    if (t_tau_opt->count()) cfg.train.temperature = t_tau;
    if (t_clip_opt->count()) cfg.train.clip_norm = t_clip;
    train_args.cfg = std::move(cfg);
    cmd_train(train_args);
  });

  CLI::App* ev = app.add_subcommand("eval",
                                    "rank dialogues and write the report "
                                    "and figure CSVs");
  add_config(ev);
  auto* e_out = ev->add_option("--out", eval_args.cfg.out, "output directory");
  auto* e_corpus =
      ev->add_option("--corpus", eval_args.cfg.corpus, "corpus file");
  auto* e_dlg =
      ev->add_option("--dialogues", eval_args.cfg.dialogues, "dialogue file");
  auto* e_ckpt = ev->add_option("--checkpoint", eval_args.cfg.checkpoint,
                                "trained checkpoint");
  std::size_t e_k = 0;
  auto* e_k_opt = ev->add_option("--k", e_k, "hits cutoff");
  double e_w = 0;
  auto* e_w_opt = ev->add_option("--static-w", e_w, "static fusion weight");
  std::vector<std::string> e_methods;
  auto* e_m_opt = ev->add_option("--methods", e_methods,
                                 "subset of text_only,static,adafuse")
                      ->delimiter(',');
  ev->add_option("--threads", eval_args.threads, "ranking worker threads");
  ev->callback([&] {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (e_out->count()) cfg.out = eval_args.cfg.out;
    if (e_corpus->count()) cfg.corpus = eval_args.cfg.corpus;
    if (e_dlg->count()) cfg.dialogues = eval_args.cfg.dialogues;
    if (e_ckpt->count()) cfg.checkpoint = eval_args.cfg.checkpoint;
    if (e_k_opt->count()) cfg.k = e_k;
    if (e_w_opt->count()) cfg.static_w = e_w;
    if (e_m_opt->count()) cfg.methods = e_methods;
    eval_args.cfg = std::move(cfg);
    cmd_eval(eval_args);
  });

  CLI::App* cmp = app.add_subcommand("compare",
                                     "per-round metric deltas between two "
                                     "reports (B minus A)");
  cmp->add_option("report_a", compare_args.report_a, "baseline report JSON")
      ->required();
  cmp->add_option("report_b", compare_args.report_b, "candidate report JSON")
      ->required();
  cmp->add_option("--out", compare_args.out,
                  "directory to also write delta.json into");
  cmp->callback([&] { cmd_compare(compare_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    log_error(e.what());
    return 2;
  } catch (const IoError& e) {
    log_error(e.what());
    return 3;
  } catch (const FormatError& e) {
    log_error(e.what());
    return 4;
  } catch (const ValidationError& e) {
    log_error(e.what());
    return 4;
  } catch (const LookupError& e) {
    log_error(e.what());
    return 4;
  } catch (const Error& e) {
    log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
  return 0;
}
