#include "adafuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adafuse/errors.hpp"
#include "adafuse/rng.hpp"

namespace adafuse {

namespace {

void require_positive(std::size_t value, const char* field) {
  if (value == 0) {
    throw ConfigError(std::string("fusion config: ") + field +
                      " must be positive");
  }
}

std::string sample_tag(std::uint64_t sample_id, std::uint32_t round) {
  return "sample " + std::to_string(sample_id) + ", round " +
         std::to_string(round);
}

// acc += v
void acc_add(Vector& acc, const Vector& v) { axpy(acc, real(1), v); }

struct GateEval {
  Vector pre;    // d_mid
  Vector hidden; // d_mid
  real logit = 0;
  real lambda = 0;
};

GateEval eval_gate(const FusionParams& params, const Vector& h_u) {
  GateEval g;
  g.pre = add(matvec(params.gate_w1, h_u), params.gate_b1);
  g.hidden = gelu(g.pre);
  g.logit = static_cast<real>(
      dot_accum(params.gate_w2.row(0), g.hidden.data(), g.hidden.dim()) +
      static_cast<double>(params.gate_b2));
  // Clamp into the open interval at storage precision so the strict (0,1)
  // invariant survives rounding of a saturated sigmoid.
  const real lo = std::nextafter(real(0), real(1));
  const real hi = std::nextafter(real(1), real(0));
  g.lambda = std::clamp(
      static_cast<real>(sigmoid(static_cast<double>(g.logit))), lo, hi);
  return g;
}

struct RouterEval {
  Vector pre;    // d_router
  Vector hidden; // d_router
  Vector logits; // n_experts
  Vector p;      // n_experts
};

RouterEval eval_router(const FusionParams& params, const Vector& h_u) {
  RouterEval r;
  r.pre = add(matvec(params.router_w1, h_u), params.router_b1);
  r.hidden = gelu(r.pre);
  r.logits = add(matvec(params.router_w2, r.hidden), params.router_b2);
  r.p = softmax(r.logits);
  return r;
}

template <typename Ref, typename Params>
std::vector<Ref> enumerate_tensors(Params& p) {
  std::vector<Ref> out;
  auto mat = [&out](std::string name, auto& m) {
    out.push_back(Ref{std::move(name), {m.rows(), m.cols()}, m.data(), m.size()});
  };
  auto vec = [&out](std::string name, auto& v) {
    out.push_back(Ref{std::move(name), {v.dim()}, v.data(), v.dim()});
  };
  auto scalar = [&out](std::string name, auto& s) {
    out.push_back(Ref{std::move(name), {1}, &s, 1});
  };
  mat("proj_t.w", p.proj_t_w);
  vec("proj_t.b", p.proj_t_b);
  mat("proj_d.w", p.proj_d_w);
  vec("proj_d.b", p.proj_d_b);
  mat("gate.w1", p.gate_w1);
  vec("gate.b1", p.gate_b1);
  mat("gate.w2", p.gate_w2);
  scalar("gate.b2", p.gate_b2);
  mat("router.w1", p.router_w1);
  vec("router.b1", p.router_b1);
  mat("router.w2", p.router_w2);
  vec("router.b2", p.router_b2);
  for (std::size_t k = 0; k < p.experts.size(); ++k) {
    mat("expert" + std::to_string(k) + ".w", p.experts[k].w);
    vec("expert" + std::to_string(k) + ".b", p.experts[k].b);
  }
  mat("out.w", p.out_w);
  vec("out.b", p.out_b);
  return out;
}

} // namespace

void FusionConfig::validate() const {
  require_positive(d, "d");
  require_positive(d_proj, "d_proj");
  require_positive(d_mid, "d_mid");
  require_positive(d_hidden, "d_hidden");
  require_positive(n_experts, "n_experts");
  require_positive(d_router, "d_router");
}

FusionParams FusionParams::zeros(const FusionConfig& config) {
  config.validate();
  FusionParams p;
  p.config = config;
  const std::size_t d2 = 2 * config.d_proj;
  p.proj_t_w = Matrix(config.d_proj, config.d);
  p.proj_t_b = Vector(config.d_proj);
  p.proj_d_w = Matrix(config.d_proj, config.d);
  p.proj_d_b = Vector(config.d_proj);
  p.gate_w1 = Matrix(config.d_mid, d2);
  p.gate_b1 = Vector(config.d_mid);
  p.gate_w2 = Matrix(1, config.d_mid);
  p.gate_b2 = real(0);
  p.router_w1 = Matrix(config.d_router, d2);
  p.router_b1 = Vector(config.d_router);
  p.router_w2 = Matrix(config.n_experts, config.d_router);
  p.router_b2 = Vector(config.n_experts);
  p.experts.resize(config.n_experts);
  for (Expert& e : p.experts) {
    e.w = Matrix(config.d_hidden, d2);
    e.b = Vector(config.d_hidden);
  }
  p.out_w = Matrix(config.d, config.d_hidden);
  p.out_b = Vector(config.d);
  return p;
}

std::vector<TensorRef> FusionParams::tensors() {
  return enumerate_tensors<TensorRef>(*this);
}

std::vector<ConstTensorRef> FusionParams::tensors() const {
  return enumerate_tensors<ConstTensorRef>(*this);
}

FusionParams init_params(const FusionConfig& config, std::uint64_t seed) {
  FusionParams p = FusionParams::zeros(config);
  Rng rng(seed);
  // Draw order is the tensors() order; only matrices consume draws, filled
  // row-major with uniform +-sqrt(1/fan_in), fan_in the column count.
  for (TensorRef& t : p.tensors()) {
    if (t.shape.size() != 2) continue;
    const double bound = std::sqrt(1.0 / static_cast<double>(t.shape[1]));
    for (std::size_t i = 0; i < t.size; ++i) {
      t.data[i] = static_cast<real>(rng.uniform(-bound, bound));
    }
  }
  // Positive gate bias starts the fusion text-leaning (lambda ~ 0.73).
  p.gate_b2 = real(1);
  return p;
}

std::pair<Vector, Vector> project(const FusionParams& params, const Vector& z_t,
                                  const Vector& z_d) {
  Vector h_t = gelu(add(matvec(params.proj_t_w, z_t), params.proj_t_b));
  Vector h_d = gelu(add(matvec(params.proj_d_w, z_d), params.proj_d_b));
  return {std::move(h_t), std::move(h_d)};
}

Vector joint_context(const Vector& h_t, const Vector& h_d) {
  Vector h_u(h_t.dim() + h_d.dim());
  for (std::size_t i = 0; i < h_t.dim(); ++i) h_u[i] = h_t[i];
  for (std::size_t i = 0; i < h_d.dim(); ++i) h_u[h_t.dim() + i] = h_d[i];
  return h_u;
}

real gate(const FusionParams& params, const Vector& h_u) {
  return eval_gate(params, h_u).lambda;
}

Vector base_fusion(real lambda, const Vector& z_t, const Vector& z_d) {
  if (z_t.dim() != z_d.dim()) {
    throw ShapeError("base_fusion: dim mismatch " + std::to_string(z_t.dim()) +
                     " vs " + std::to_string(z_d.dim()));
  }
  Vector out = scale(z_t, lambda);
  axpy(out, real(1) - lambda, z_d);
  return out;
}

Vector route(const FusionParams& params, const Vector& h_u) {
  return eval_router(params, h_u).p;
}

Vector experts_forward(const FusionParams& params, const Vector& h_u,
                       const Vector& p) {
  if (p.dim() != params.experts.size()) {
    throw ShapeError("experts_forward: " + std::to_string(p.dim()) +
                     " routing weights for " +
                     std::to_string(params.experts.size()) + " experts");
  }
  Vector h_res(params.config.d_hidden);
  for (std::size_t k = 0; k < params.experts.size(); ++k) {
    Vector e = gelu(add(matvec(params.experts[k].w, h_u), params.experts[k].b));
    axpy(h_res, p[k], e);
  }
  return h_res;
}

ForwardResult fuse_forward(const FusionParams& params, const Vector& z_t,
                           const Vector& z_d, std::uint64_t sample_id,
                           std::uint32_t round) {
  const std::size_t d = params.config.d;
  if (z_t.dim() != d || z_d.dim() != d) {
    throw ShapeError("fuse_forward: inputs " + std::to_string(z_t.dim()) +
                     "/" + std::to_string(z_d.dim()) + " vs configured d=" +
                     std::to_string(d));
  }
  if (norm(z_t) < kDegenerateNorm || norm(z_d) < kDegenerateNorm) {
    throw DegenerateFusionError("fuse_forward: degenerate input embedding (" +
                                sample_tag(sample_id, round) + ")");
  }

  ForwardResult result;
  FusionActivations& a = result.acts;
  a.z_t_in = z_t;
  a.z_d_in = z_d;

  a.proj_t_pre = add(matvec(params.proj_t_w, z_t), params.proj_t_b);
  a.h_t = gelu(a.proj_t_pre);
  a.proj_d_pre = add(matvec(params.proj_d_w, z_d), params.proj_d_b);
  a.h_d = gelu(a.proj_d_pre);
  a.h_u = joint_context(a.h_t, a.h_d);

  GateEval g = eval_gate(params, a.h_u);
  a.gate_pre = std::move(g.pre);
  a.gate_hidden = std::move(g.hidden);
  a.gate_logit = g.logit;
  a.lambda = g.lambda;

  a.z_base = base_fusion(a.lambda, z_t, z_d);

  RouterEval r = eval_router(params, a.h_u);
  a.router_pre = std::move(r.pre);
  a.router_hidden = std::move(r.hidden);
  a.router_logits = std::move(r.logits);
  a.p = std::move(r.p);

  a.expert_pre.resize(params.experts.size());
  a.expert_out.resize(params.experts.size());
  a.h_res = Vector(params.config.d_hidden);
  for (std::size_t k = 0; k < params.experts.size(); ++k) {
    a.expert_pre[k] =
        add(matvec(params.experts[k].w, a.h_u), params.experts[k].b);
    a.expert_out[k] = gelu(a.expert_pre[k]);
    axpy(a.h_res, a.p[k], a.expert_out[k]);
  }

  a.z_pre_norm = add(a.z_base, add(matvec(params.out_w, a.h_res), params.out_b));
  const double n = norm(a.z_pre_norm);
  if (n < kDegenerateNorm) {
    throw DegenerateFusionError("fuse_forward: fused vector collapsed, norm " +
                                std::to_string(n) + " (" +
                                sample_tag(sample_id, round) + ")");
  }
  a.z_final = Vector(d);
  for (std::size_t i = 0; i < d; ++i) {
    a.z_final[i] = static_cast<real>(static_cast<double>(a.z_pre_norm[i]) / n);
  }

  result.z_final = a.z_final;
  result.gate.sample_id = sample_id;
  result.gate.round = round;
  result.gate.lambda = a.lambda;
  result.gate.image_weight = real(1) - a.lambda;
  result.gate.cos_td = static_cast<real>(cosine_similarity(z_t, z_d));
  return result;
}

BackwardResult fuse_backward(const FusionParams& params,
                             const FusionActivations& acts, const Vector& z_t,
                             const Vector& z_d, const Vector& grad_z_final) {
  const std::size_t d = params.config.d;
  if (grad_z_final.dim() != d) {
    throw ShapeError("fuse_backward: gradient dim " +
                     std::to_string(grad_z_final.dim()) + " vs d=" +
                     std::to_string(d));
  }
  if (!(acts.z_t_in == z_t) || !(acts.z_d_in == z_d)) {
    throw ContractError(
        "fuse_backward: activations were recorded for different inputs");
  }

  BackwardResult result;
  FusionGrads& g = result.grads;
  g = FusionParams::zeros(params.config);
  result.grad_z_t = Vector(d);
  result.grad_z_d = Vector(d);

  // Through l2 normalization: gy = (gh - (zhat . gh) zhat) / ||y||.
  const double n = norm(acts.z_pre_norm);
  const double radial = dot(acts.z_final, grad_z_final);
  Vector gy(d);
  for (std::size_t i = 0; i < d; ++i) {
    gy[i] = static_cast<real>((static_cast<double>(grad_z_final[i]) -
                               radial * static_cast<double>(acts.z_final[i])) /
                              n);
  }

  // Output projection and the two additive branches of z_pre_norm.
  add_outer(g.out_w, gy, acts.h_res);
  acc_add(g.out_b, gy);
  Vector g_hres = matvec_transposed(params.out_w, gy);

  // Base fusion: z_base = lambda z_t + (1 - lambda) z_d.
  const double g_lambda = dot(gy, z_t) - dot(gy, z_d);
  axpy(result.grad_z_t, acts.lambda, gy);
  axpy(result.grad_z_d, real(1) - acts.lambda, gy);

  Vector g_hu(2 * params.config.d_proj);

  // Experts and the routing weights feeding them.
  Vector gp(acts.p.dim());
  for (std::size_t k = 0; k < params.experts.size(); ++k) {
    gp[k] = static_cast<real>(dot(g_hres, acts.expert_out[k]));
    Vector g_ek =
        scale(hadamard(g_hres, gelu_grad(acts.expert_pre[k])), acts.p[k]);
    add_outer(g.experts[k].w, g_ek, acts.h_u);
    acc_add(g.experts[k].b, g_ek);
    acc_add(g_hu, matvec_transposed(params.experts[k].w, g_ek));
  }

  // Softmax jacobian: g_logits = p * (gp - p . gp).
  const double pg = dot(acts.p, gp);
  Vector g_logits(gp.dim());
  for (std::size_t k = 0; k < gp.dim(); ++k) {
    g_logits[k] = acts.p[k] * (gp[k] - static_cast<real>(pg));
  }
  add_outer(g.router_w2, g_logits, acts.router_hidden);
  acc_add(g.router_b2, g_logits);
  Vector g_r1 = hadamard(matvec_transposed(params.router_w2, g_logits),
                         gelu_grad(acts.router_pre));
  add_outer(g.router_w1, g_r1, acts.h_u);
  acc_add(g.router_b1, g_r1);
  acc_add(g_hu, matvec_transposed(params.router_w1, g_r1));

  // Gate: sigmoid derivative at the (clamped) lambda.
  const double lam = static_cast<double>(acts.lambda);
  const real g_s = static_cast<real>(g_lambda * lam * (1.0 - lam));
  Vector g_a1(params.config.d_mid);
  for (std::size_t j = 0; j < params.config.d_mid; ++j) {
    g.gate_w2.at(0, j) += g_s * acts.gate_hidden[j];
    g_a1[j] = g_s * params.gate_w2.at(0, j);
  }
  g.gate_b2 += g_s;
  Vector g_g1 = hadamard(g_a1, gelu_grad(acts.gate_pre));
  add_outer(g.gate_w1, g_g1, acts.h_u);
  acc_add(g.gate_b1, g_g1);
  acc_add(g_hu, matvec_transposed(params.gate_w1, g_g1));

  // Split the joint-context gradient back into the two projection heads.
  const std::size_t dp = params.config.d_proj;
  Vector g_ht(dp), g_hd(dp);
  for (std::size_t i = 0; i < dp; ++i) {
    g_ht[i] = g_hu[i];
    g_hd[i] = g_hu[dp + i];
  }
  Vector g_ut = hadamard(g_ht, gelu_grad(acts.proj_t_pre));
  add_outer(g.proj_t_w, g_ut, z_t);
  acc_add(g.proj_t_b, g_ut);
  acc_add(result.grad_z_t, matvec_transposed(params.proj_t_w, g_ut));

  Vector g_ud = hadamard(g_hd, gelu_grad(acts.proj_d_pre));
  add_outer(g.proj_d_w, g_ud, z_d);
  acc_add(g.proj_d_b, g_ud);
  acc_add(result.grad_z_d, matvec_transposed(params.proj_d_w, g_ud));

  return result;
}

Vector static_fusion(const Vector& z_t, const Vector& z_d, real w) {
  if (z_t.dim() != z_d.dim()) {
    throw ShapeError("static_fusion: dim mismatch " +
                     std::to_string(z_t.dim()) + " vs " +
                     std::to_string(z_d.dim()));
  }
  Vector y = scale(z_t, w);
  axpy(y, real(1) - w, z_d);
  return l2_normalize(y);
}

std::size_t count_params(const FusionConfig& config) {
  config.validate();
  const std::size_t d2 = 2 * config.d_proj;
  std::size_t n = 0;
  n += 2 * (config.d_proj * config.d + config.d_proj); // projection heads
  n += config.d_mid * d2 + config.d_mid;               // gate layer 1
  n += config.d_mid + 1;                               // gate layer 2
  n += config.d_router * d2 + config.d_router;         // router layer 1
  n += config.n_experts * config.d_router + config.n_experts; // router layer 2
  n += config.n_experts * (config.d_hidden * d2 + config.d_hidden); // experts
  n += config.d * config.d_hidden + config.d;          // output projection
  return n;
}

} // namespace adafuse
