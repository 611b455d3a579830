#include "adafuse/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>

#include "adafuse/errors.hpp"
#include "adafuse/rng.hpp"
#include "binio.hpp"

namespace adafuse {

namespace {

constexpr char kCorpusMagic[4] = {'A', 'D', 'E', 'C'};
constexpr char kDialogueMagic[4] = {'A', 'D', 'E', 'D'};
constexpr std::uint32_t kCorpusVersion = 1;
constexpr std::uint32_t kDialogueVersion = 1;

// Unit direction from d i.i.d. gaussians; redraws on the (measure-zero)
// degenerate outcome so the stream stays deterministic.
Vector gaussian_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double n = 0.0;
  do {
    n = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      v[i] = rng.gaussian();
      n += v[i] * v[i];
    }
    n = std::sqrt(n);
  } while (n < kDegenerateNorm);
  Vector out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = static_cast<real>(v[i] / n);
  }
  return out;
}

Vector copy_row(const Matrix& m, std::size_t row) {
  Vector out(m.cols());
  const real* p = m.row(row);
  for (std::size_t i = 0; i < m.cols(); ++i) out[i] = p[i];
  return out;
}

// normalize(base_row + sigma * g). sigma == 0 short-circuits to a bitwise
// row copy so noise-free configs reproduce corpus entries exactly.
Vector perturbed_unit(const Matrix& m, std::size_t row, double sigma,
                      Rng& rng) {
  if (sigma == 0.0) {
    return copy_row(m, row);
  }
  const std::size_t d = m.cols();
  const real* base = m.row(row);
  std::vector<double> v(d);
  double n = 0.0;
  do {
    n = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      v[i] = static_cast<double>(base[i]) + sigma * rng.gaussian();
      n += v[i] * v[i];
    }
    n = std::sqrt(n);
  } while (n < kDegenerateNorm);
  Vector out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = static_cast<real>(v[i] / n);
  }
  return out;
}

} // namespace

double GenConfig::sigma_text(std::size_t round) const {
  return sigma0 * std::pow(gamma, static_cast<double>(round));
}

void GenConfig::validate() const {
  if (corpus_size < 2) {
    throw ConfigError("gen config: corpus_size must be at least 2");
  }
  if (dim == 0) {
    throw ConfigError("gen config: dim must be positive");
  }
  if (dialogues == 0) {
    throw ConfigError("gen config: dialogues must be positive");
  }
  if (rounds == 0) {
    throw ConfigError("gen config: rounds must be positive");
  }
  if (rho < 0.0 || rho > 1.0) {
    throw ConfigError("gen config: rho must be in [0, 1]");
  }
  if (sigma0 < 0.0 || sigma_good < 0.0 || gamma < 0.0) {
    throw ConfigError("gen config: noise parameters must be non-negative");
  }
}

std::size_t Corpus::row_of(std::uint64_t id) const {
  auto it = row_by_id_.find(id);
  if (it == row_by_id_.end()) {
    throw LookupError("corpus: unknown id " + std::to_string(id));
  }
  return it->second;
}

Corpus make_corpus(std::vector<std::uint64_t> ids, Matrix embeddings) {
  if (ids.size() != embeddings.rows()) {
    throw ValidationError("corpus: " + std::to_string(ids.size()) +
                          " ids for " + std::to_string(embeddings.rows()) +
                          " rows");
  }
  Corpus c;
  c.ids = std::move(ids);
  c.embeddings = std::move(embeddings);
  c.row_by_id_.reserve(c.ids.size());
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    if (!c.row_by_id_.emplace(c.ids[i], i).second) {
      throw ValidationError("corpus: duplicate id " +
                            std::to_string(c.ids[i]));
    }
  }
  return c;
}

Corpus generate_corpus(const GenConfig& config) {
  config.validate();
  // Single stream, rows drawn in order; ids are the row indices.
  Rng rng(config.seed);
  Matrix m(config.corpus_size, config.dim);
  std::vector<std::uint64_t> ids(config.corpus_size);
  for (std::size_t i = 0; i < config.corpus_size; ++i) {
    Vector row = gaussian_unit(rng, config.dim);
    for (std::size_t j = 0; j < config.dim; ++j) m.at(i, j) = row[j];
    ids[i] = i;
  }
  return make_corpus(std::move(ids), std::move(m));
}

std::vector<DialogueSample> generate_dialogues(const GenConfig& config,
                                               const Corpus& corpus,
                                               std::uint64_t first_id,
                                               std::size_t count) {
  config.validate();
  const std::size_t n = corpus.size();
  if (n < 2) {
    throw ValidationError("generate_dialogues: corpus needs at least 2 items");
  }
  if (corpus.embeddings.cols() != config.dim) {
    throw ConfigError("generate_dialogues: corpus dim " +
                      std::to_string(corpus.embeddings.cols()) +
                      " vs configured " + std::to_string(config.dim));
  }

  std::vector<DialogueSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t id = first_id + i;
    // Per-dialogue substream; draw order per dialogue:
    //   target index, then per round: text noise (skipped when its sigma is
    //   0), branch uniform, distractor index (corrupt branch only), image
    //   noise (skipped when sigma_good is 0).
    Rng rng = Rng::substream(config.seed, id);
    DialogueSample s;
    s.dialogue_id = id;
    const std::size_t target_row = rng.uniform_index(n);
    s.target_id = corpus.ids[target_row];
    s.z_t.reserve(config.rounds);
    s.z_d.reserve(config.rounds);
    s.is_corrupt.reserve(config.rounds);
    for (std::size_t r = 0; r < config.rounds; ++r) {
      s.z_t.push_back(
          perturbed_unit(corpus.embeddings, target_row, config.sigma_text(r), rng));
      const bool corrupt = rng.uniform01() >= config.rho;
      std::size_t image_row = target_row;
      if (corrupt) {
        std::size_t j = rng.uniform_index(n - 1);
        if (j >= target_row) ++j; // uniform over rows other than the target
        image_row = j;
      }
      s.z_d.push_back(
          perturbed_unit(corpus.embeddings, image_row, config.sigma_good, rng));
      s.is_corrupt.push_back(corrupt ? 1 : 0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DialogueSample> generate_dialogues(const GenConfig& config,
                                               const Corpus& corpus) {
  return generate_dialogues(config, corpus, 0, config.dialogues);
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw IoError("save_corpus: cannot open " + path);
  }
  binio::put_bytes(os, kCorpusMagic, 4);
  binio::put_u32(os, kCorpusVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(corpus.size()));
  binio::put_u32(os, static_cast<std::uint32_t>(corpus.embeddings.cols()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const real* row = corpus.embeddings.row(i);
    for (std::size_t j = 0; j < corpus.embeddings.cols(); ++j) {
      binio::put_f32(os, static_cast<float>(row[j]));
    }
  }
  os.flush();
  if (!os) {
    throw IoError("save_corpus: write failed for " + path);
  }

  const std::string manifest_path = path + ".manifest.jsonl";
  std::ofstream ms(manifest_path, std::ios::trunc);
  if (!ms) {
    throw IoError("save_corpus: cannot open " + manifest_path);
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    nlohmann::json line = {{"row", i}, {"id", corpus.ids[i]}};
    ms << line.dump() << "\n";
  }
  ms.flush();
  if (!ms) {
    throw IoError("save_corpus: write failed for " + manifest_path);
  }
}

Corpus load_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("load_corpus: cannot open " + path);
  }
  char magic[4];
  if (!binio::get_bytes(is, magic, 4) ||
      std::string(magic, 4) != std::string(kCorpusMagic, 4)) {
    throw FormatError("load_corpus: " + path + " is not a corpus file");
  }
  std::uint32_t version = 0, n = 0, d = 0;
  if (!binio::get_u32(is, version) || !binio::get_u32(is, n) ||
      !binio::get_u32(is, d)) {
    throw FormatError("load_corpus: " + path + " shorter than its header");
  }
  if (version > kCorpusVersion) {
    throw FormatError("load_corpus: " + path + " has version " +
                      std::to_string(version) + ", newest understood is " +
                      std::to_string(kCorpusVersion));
  }
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    real* row = m.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      float f = 0;
      if (!binio::get_f32(is, f)) {
        throw FormatError("load_corpus: " + path + " truncated at row " +
                          std::to_string(i));
      }
      row[j] = static_cast<real>(f);
    }
  }

  const std::string manifest_path = path + ".manifest.jsonl";
  std::ifstream ms(manifest_path);
  if (!ms) {
    throw IoError("load_corpus: cannot open " + manifest_path);
  }
  std::vector<std::uint64_t> ids(n);
  std::vector<bool> seen(n, false);
  std::string line;
  while (std::getline(ms, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const std::size_t row = j.at("row").get<std::size_t>();
      if (row >= n || seen[row]) {
        throw FormatError("load_corpus: manifest row " + std::to_string(row) +
                          " out of range or repeated");
      }
      ids[row] = j.at("id").get<std::uint64_t>();
      seen[row] = true;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("load_corpus: bad manifest line in " + manifest_path +
                        ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) {
      throw FormatError("load_corpus: manifest misses row " +
                        std::to_string(i));
    }
  }
  return make_corpus(std::move(ids), std::move(m));
}

void save_dialogues_jsonl(const std::string& path,
                          const std::vector<DialogueSample>& samples) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw IoError("save_dialogues: cannot open " + path);
  }
  for (const DialogueSample& s : samples) {
    nlohmann::json j;
    j["dialogue_id"] = s.dialogue_id;
    j["target_id"] = s.target_id;
    auto rounds_of = [](const std::vector<Vector>& vs) {
      nlohmann::json arr = nlohmann::json::array();
      for (const Vector& v : vs) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t i = 0; i < v.dim(); ++i) {
          row.push_back(static_cast<double>(v[i]));
        }
        arr.push_back(std::move(row));
      }
      return arr;
    };
    j["z_t"] = rounds_of(s.z_t);
    j["z_d"] = rounds_of(s.z_d);
    nlohmann::json corrupt = nlohmann::json::array();
    for (std::uint8_t c : s.is_corrupt) corrupt.push_back(c != 0);
    j["is_corrupt"] = std::move(corrupt);
    os << j.dump() << "\n";
  }
  os.flush();
  if (!os) {
    throw IoError("save_dialogues: write failed for " + path);
  }
}

void save_dialogues_binary(const std::string& path,
                           const std::vector<DialogueSample>& samples) {
  const std::size_t rounds = samples.empty() ? 0 : samples[0].rounds();
  const std::size_t d = (samples.empty() || rounds == 0)
                            ? 0
                            : samples[0].z_t[0].dim();
  for (const DialogueSample& s : samples) {
    if (s.rounds() != rounds || s.z_d.size() != rounds ||
        s.is_corrupt.size() != rounds) {
      throw ValidationError("save_dialogues: ragged sample " +
                            std::to_string(s.dialogue_id));
    }
    for (std::size_t r = 0; r < rounds; ++r) {
      if (s.z_t[r].dim() != d || s.z_d[r].dim() != d) {
        throw ValidationError("save_dialogues: ragged sample " +
                              std::to_string(s.dialogue_id));
      }
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw IoError("save_dialogues: cannot open " + path);
  }
  binio::put_bytes(os, kDialogueMagic, 4);
  binio::put_u32(os, kDialogueVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(samples.size()));
  binio::put_u32(os, static_cast<std::uint32_t>(rounds));
  binio::put_u32(os, static_cast<std::uint32_t>(d));
  for (const DialogueSample& s : samples) {
    binio::put_u64(os, s.dialogue_id);
    binio::put_u64(os, s.target_id);
    for (const Vector& v : s.z_t) {
      for (std::size_t i = 0; i < d; ++i) {
        binio::put_f32(os, static_cast<float>(v[i]));
      }
    }
    for (const Vector& v : s.z_d) {
      for (std::size_t i = 0; i < d; ++i) {
        binio::put_f32(os, static_cast<float>(v[i]));
      }
    }
    for (std::uint8_t c : s.is_corrupt) {
      const char byte = static_cast<char>(c != 0 ? 1 : 0);
      binio::put_bytes(os, &byte, 1);
    }
  }
  os.flush();
  if (!os) {
    throw IoError("save_dialogues: write failed for " + path);
  }
}

namespace {

std::vector<DialogueSample> load_dialogues_binary(std::ifstream& is,
                                                  const std::string& path) {
  std::uint32_t version = 0, count = 0, rounds = 0, d = 0;
  if (!binio::get_u32(is, version) || !binio::get_u32(is, count) ||
      !binio::get_u32(is, rounds) || !binio::get_u32(is, d)) {
    throw FormatError("load_dialogues: " + path + " shorter than its header");
  }
  if (version > kDialogueVersion) {
    throw FormatError("load_dialogues: " + path + " has version " +
                      std::to_string(version) + ", newest understood is " +
                      std::to_string(kDialogueVersion));
  }
  std::vector<DialogueSample> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    DialogueSample sample;
    if (!binio::get_u64(is, sample.dialogue_id) ||
        !binio::get_u64(is, sample.target_id)) {
      throw FormatError("load_dialogues: " + path + " truncated at sample " +
                        std::to_string(s));
    }
    auto read_rounds = [&](std::vector<Vector>& dst) {
      dst.reserve(rounds);
      for (std::size_t r = 0; r < rounds; ++r) {
        Vector v(d);
        for (std::size_t i = 0; i < d; ++i) {
          float f = 0;
          if (!binio::get_f32(is, f)) {
            throw FormatError("load_dialogues: " + path +
                              " truncated at sample " + std::to_string(s));
          }
          v[i] = static_cast<real>(f);
        }
        dst.push_back(std::move(v));
      }
    };
    read_rounds(sample.z_t);
    read_rounds(sample.z_d);
    sample.is_corrupt.resize(rounds);
    for (std::size_t r = 0; r < rounds; ++r) {
      char byte = 0;
      if (!binio::get_bytes(is, &byte, 1)) {
        throw FormatError("load_dialogues: " + path + " truncated at sample " +
                          std::to_string(s));
      }
      sample.is_corrupt[r] = byte != 0 ? 1 : 0;
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<DialogueSample> load_dialogues_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("load_dialogues: cannot open " + path);
  }
  std::vector<DialogueSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      DialogueSample s;
      s.dialogue_id = j.at("dialogue_id").get<std::uint64_t>();
      s.target_id = j.at("target_id").get<std::uint64_t>();
      auto parse_rounds = [](const nlohmann::json& arr) {
        std::vector<Vector> vs;
        vs.reserve(arr.size());
        for (const nlohmann::json& row : arr) {
          Vector v(row.size());
          for (std::size_t i = 0; i < row.size(); ++i) {
            v[i] = static_cast<real>(row[i].get<double>());
          }
          vs.push_back(std::move(v));
        }
        return vs;
      };
      s.z_t = parse_rounds(j.at("z_t"));
      s.z_d = parse_rounds(j.at("z_d"));
      for (const nlohmann::json& c : j.at("is_corrupt")) {
        s.is_corrupt.push_back(c.get<bool>() ? 1 : 0);
      }
      if (s.z_d.size() != s.z_t.size() ||
          s.is_corrupt.size() != s.z_t.size()) {
        throw FormatError("load_dialogues: " + path + " line " +
                          std::to_string(line_no) +
                          " has mismatched round counts");
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("load_dialogues: bad JSON at " + path + " line " +
                        std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

} // namespace

std::vector<DialogueSample> load_dialogues(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("load_dialogues: cannot open " + path);
  }
  char magic[4] = {0, 0, 0, 0};
  const bool have_magic = binio::get_bytes(is, magic, 4);
  if (have_magic && std::string(magic, 4) == std::string(kDialogueMagic, 4)) {
    return load_dialogues_binary(is, path);
  }
  is.close();
  return load_dialogues_jsonl(path);
}

} // namespace adafuse
