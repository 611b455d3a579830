#include "adafuse/training.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "adafuse/errors.hpp"
#include "adafuse/rng.hpp"

namespace adafuse {

namespace {

constexpr double kUnitTolerance = 1e-4;

void require_unit_rows(const Matrix& m, const char* label) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = std::sqrt(dot_accum(m.row(i), m.row(i), m.cols()));
    if (std::abs(n - 1.0) > kUnitTolerance) {
      throw ContractError(std::string("info_nce_loss: ") + label + " row " +
                          std::to_string(i) + " has norm " +
                          std::to_string(n) + ", expected unit");
    }
  }
}

Vector row_vector(const Matrix& m, std::size_t r) {
  Vector v(m.cols());
  const real* p = m.row(r);
  for (std::size_t i = 0; i < m.cols(); ++i) v[i] = p[i];
  return v;
}

} // namespace

void TrainConfig::validate() const {
  // learning_rate 0 is allowed: it turns the loop into a measurement-only
  // pass that must leave the parameters bit-identical.
  if (learning_rate < 0.0) {
    throw ConfigError("train config: learning_rate must be non-negative");
  }
  if (temperature <= 0.0) {
    throw ConfigError("train config: temperature must be positive");
  }
  if (batch_size < 2) {
    throw ConfigError("train config: batch_size must be at least 2");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("train config: betas must lie in [0, 1)");
  }
  if (epsilon <= 0.0) {
    throw ConfigError("train config: epsilon must be positive");
  }
  if (clip_norm < 0.0) {
    throw ConfigError("train config: clip_norm must be non-negative");
  }
}

OptimizerState OptimizerState::zeros_like(const FusionParams& params) {
  OptimizerState s;
  for (const ConstTensorRef& t : params.tensors()) {
    s.m.emplace_back(t.size, real(0));
    s.v.emplace_back(t.size, real(0));
  }
  return s;
}

InfoNceResult info_nce_loss(const Matrix& z_q, const Matrix& z_t, double tau) {
  if (z_q.rows() != z_t.rows() || z_q.cols() != z_t.cols()) {
    throw ShapeError("info_nce_loss: queries " + std::to_string(z_q.rows()) +
                     "x" + std::to_string(z_q.cols()) + " vs targets " +
                     std::to_string(z_t.rows()) + "x" +
                     std::to_string(z_t.cols()));
  }
  const std::size_t b = z_q.rows();
  const std::size_t d = z_q.cols();
  if (b < 2) {
    throw ConfigError("info_nce_loss: batch of " + std::to_string(b) +
                      " has no in-batch negatives");
  }
  if (tau <= 0.0) {
    throw ConfigError("info_nce_loss: temperature must be positive");
  }
  require_unit_rows(z_q, "query");
  require_unit_rows(z_t, "target");

  std::vector<double> s(b * b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      s[i * b + j] = dot_accum(z_q.row(i), z_t.row(j), d) / tau;
    }
  }

  // Log-sum-exp per row and per column; the two softmaxes share s.
  std::vector<double> row_lse(b), col_lse(b);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b; ++j) mx = std::max(mx, s[i * b + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < b; ++j) sum += std::exp(s[i * b + j] - mx);
    row_lse[i] = mx + std::log(sum);
    loss += row_lse[i] - s[i * b + i];
  }
  for (std::size_t j = 0; j < b; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b; ++i) mx = std::max(mx, s[i * b + j]);
    double sum = 0.0;
    for (std::size_t i = 0; i < b; ++i) sum += std::exp(s[i * b + j] - mx);
    col_lse[j] = mx + std::log(sum);
    loss += col_lse[j] - s[j * b + j];
  }
  loss /= 2.0 * static_cast<double>(b);

  // dL/dS_ij = (row_softmax_ij + col_softmax_ij - 2*delta_ij) / 2B.
  std::vector<double> g(b * b);
  const double inv2b = 1.0 / (2.0 * static_cast<double>(b));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double a = std::exp(s[i * b + j] - row_lse[i]);
      const double c = std::exp(s[i * b + j] - col_lse[j]);
      g[i * b + j] = (a + c - (i == j ? 2.0 : 0.0)) * inv2b;
    }
  }

  InfoNceResult result;
  result.loss = loss;
  result.grad_zq = Matrix(b, d);
  result.grad_zt = Matrix(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> acc(d, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
      const double gij = g[i * b + j];
      const real* t = z_t.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        acc[c] += gij * static_cast<double>(t[c]);
      }
    }
    real* out = result.grad_zq.row(i);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = static_cast<real>(acc[c] / tau);
    }
  }
  for (std::size_t j = 0; j < b; ++j) {
    std::vector<double> acc(d, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      const double gij = g[i * b + j];
      const real* q = z_q.row(i);
      for (std::size_t c = 0; c < d; ++c) {
        acc[c] += gij * static_cast<double>(q[c]);
      }
    }
    real* out = result.grad_zt.row(j);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = static_cast<real>(acc[c] / tau);
    }
  }
  return result;
}

void adam_step(FusionParams& params, const FusionGrads& grads,
               OptimizerState& state, const TrainConfig& config) {
  config.validate();
  if (!(grads.config == params.config)) {
    throw ShapeError("adam_step: gradient layout differs from parameters");
  }
  std::vector<TensorRef> p_refs = params.tensors();
  std::vector<ConstTensorRef> g_refs = grads.tensors();
  if (state.m.size() != p_refs.size() || state.v.size() != p_refs.size()) {
    throw ContractError("adam_step: optimizer state layout mismatch");
  }

  double sq_norm = 0.0;
  for (const ConstTensorRef& g : g_refs) {
    for (std::size_t e = 0; e < g.size; ++e) {
      const double v = static_cast<double>(g.data[e]);
      if (!std::isfinite(v)) {
        throw NumericError("adam_step: non-finite gradient in " + g.name);
      }
      sq_norm += v * v;
    }
  }
  // clip_norm == 0 disables clipping and must match the unclipped path
  // bit-exactly, so the scale factor is only ever applied when needed.
  double factor = 1.0;
  bool scaled = false;
  if (config.clip_norm > 0.0) {
    const double g_norm = std::sqrt(sq_norm);
    if (g_norm > config.clip_norm) {
      factor = config.clip_norm / g_norm;
      scaled = true;
    }
  }

  state.step += 1;
  const double bc1 =
      1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p_refs.size(); ++t) {
    TensorRef& p = p_refs[t];
    const ConstTensorRef& g = g_refs[t];
    std::vector<real>& m = state.m[t];
    std::vector<real>& v = state.v[t];
    if (m.size() != p.size || v.size() != p.size || g.size != p.size) {
      throw ContractError("adam_step: state size mismatch in " + p.name);
    }
    for (std::size_t e = 0; e < p.size; ++e) {
      double ge = static_cast<double>(g.data[e]);
      if (scaled) ge *= factor;
      const double me =
          config.beta1 * static_cast<double>(m[e]) + (1.0 - config.beta1) * ge;
      const double ve = config.beta2 * static_cast<double>(v[e]) +
                        (1.0 - config.beta2) * ge * ge;
      m[e] = static_cast<real>(me);
      v[e] = static_cast<real>(ve);
      const double update = config.learning_rate * (me / bc1) /
                            (std::sqrt(ve / bc2) + config.epsilon);
      p.data[e] = static_cast<real>(static_cast<double>(p.data[e]) - update);
    }
  }
}

TrainResult train(const std::vector<DialogueSample>& dataset,
                  const Corpus& corpus, const FusionConfig& fusion_config,
                  const TrainConfig& train_config,
                  const EpochCallback& on_epoch) {
  fusion_config.validate();
  train_config.validate();
  if (dataset.empty()) {
    throw ConfigError("train: empty dataset");
  }
  const std::size_t d = fusion_config.d;
  if (corpus.embeddings.cols() != d) {
    throw ConfigError("train: corpus dim " +
                      std::to_string(corpus.embeddings.cols()) +
                      " vs fusion d " + std::to_string(d));
  }

  // Validate dims and resolve targets before touching any parameter.
  std::vector<std::size_t> target_rows(dataset.size());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const DialogueSample& s = dataset[i];
    if (s.z_d.size() != s.z_t.size() || s.is_corrupt.size() != s.z_t.size()) {
      throw ConfigError("train: dialogue " + std::to_string(s.dialogue_id) +
                        " has mismatched per-round arrays");
    }
    for (std::size_t r = 0; r < s.z_t.size(); ++r) {
      if (s.z_t[r].dim() != d || s.z_d[r].dim() != d) {
        throw ConfigError("train: dialogue " + std::to_string(s.dialogue_id) +
                          " round " + std::to_string(r) +
                          " embedding dim differs from fusion d " +
                          std::to_string(d));
      }
      pool.emplace_back(static_cast<std::uint32_t>(i),
                        static_cast<std::uint32_t>(r));
    }
    target_rows[i] = corpus.row_of(s.target_id);
  }
  if (pool.size() < 2) {
    throw ConfigError("train: need at least 2 (dialogue, round) samples for "
                      "in-batch negatives");
  }

  TrainResult result;
  result.params = init_params(fusion_config, train_config.seed);
  OptimizerState state = OptimizerState::zeros_like(result.params);
  // init_params consumes the raw seed stream; the shuffle gets substream 1.
  Rng shuffle_rng = Rng::substream(train_config.seed, 1);

  const std::size_t batch = train_config.batch_size;
  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    for (std::size_t i = pool.size(); i-- > 1;) {
      const std::size_t j = shuffle_rng.uniform_index(i + 1);
      std::swap(pool[i], pool[j]);
    }

    double loss_sum = 0.0;
    std::size_t rows_seen = 0;
    for (std::size_t start = 0; start < pool.size(); start += batch) {
      const std::size_t m = std::min(batch, pool.size() - start);
      if (m < 2) break; // a 1-row tail has no negatives; dropped

      Batch b;
      b.z_t = Matrix(m, d);
      b.z_d = Matrix(m, d);
      b.z_star = Matrix(m, d);
      b.dialogue_ids.resize(m);
      b.rounds.resize(m);
      std::vector<Vector> zt_rows(m), zd_rows(m);
      for (std::size_t r = 0; r < m; ++r) {
        const auto [si, round] = pool[start + r];
        const DialogueSample& s = dataset[si];
        zt_rows[r] = s.z_t[round];
        zd_rows[r] = s.z_d[round];
        const real* star = corpus.embeddings.row(target_rows[si]);
        for (std::size_t c = 0; c < d; ++c) {
          b.z_t.at(r, c) = zt_rows[r][c];
          b.z_d.at(r, c) = zd_rows[r][c];
          b.z_star.at(r, c) = star[c];
        }
        b.dialogue_ids[r] = s.dialogue_id;
        b.rounds[r] = round;
      }

      std::vector<FusionActivations> acts(m);
      Matrix z_q(m, d);
      for (std::size_t r = 0; r < m; ++r) {
        ForwardResult fr = fuse_forward(result.params, zt_rows[r], zd_rows[r],
                                        b.dialogue_ids[r], b.rounds[r]);
        acts[r] = std::move(fr.acts);
        for (std::size_t c = 0; c < d; ++c) z_q.at(r, c) = fr.z_final[c];
      }

      const InfoNceResult nce =
          info_nce_loss(z_q, b.z_star, train_config.temperature);

      // Row gradients are accumulated in a fixed order and in double, then
      // rounded once, so results do not depend on how rows are scheduled.
      FusionGrads grads = FusionParams::zeros(fusion_config);
      std::vector<TensorRef> grad_refs = grads.tensors();
      std::vector<std::vector<double>> acc(grad_refs.size());
      for (std::size_t t = 0; t < grad_refs.size(); ++t) {
        acc[t].assign(grad_refs[t].size, 0.0);
      }
      for (std::size_t r = 0; r < m; ++r) {
        const BackwardResult br =
            fuse_backward(result.params, acts[r], zt_rows[r], zd_rows[r],
                          row_vector(nce.grad_zq, r));
        const std::vector<ConstTensorRef> row_refs = br.grads.tensors();
        for (std::size_t t = 0; t < row_refs.size(); ++t) {
          for (std::size_t e = 0; e < row_refs[t].size; ++e) {
            acc[t][e] += static_cast<double>(row_refs[t].data[e]);
          }
        }
      }
      for (std::size_t t = 0; t < grad_refs.size(); ++t) {
        for (std::size_t e = 0; e < grad_refs[t].size; ++e) {
          grad_refs[t].data[e] = static_cast<real>(acc[t][e]);
        }
      }

      adam_step(result.params, grads, state, train_config);
      loss_sum += nce.loss * static_cast<double>(m);
      rows_seen += m;
    }

    const double mean_loss = loss_sum / static_cast<double>(rows_seen);
    result.loss_curve.push_back(mean_loss);
    if (on_epoch) {
      on_epoch(epoch, mean_loss, result.params);
    }
  }
  return result;
}

} // namespace adafuse
