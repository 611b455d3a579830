#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adafuse/numerics.hpp"
#include "adafuse/real.hpp"

namespace adafuse {

// All width hyperparameters of the fusion module. `d` is the embedding
// dimension shared by text, generated-image and target vectors; everything
// else sizes the internal blocks.
struct FusionConfig {
  std::size_t d = 64;         // input/output embedding dim
  std::size_t d_proj = 128;   // projected dim per modality
  std::size_t d_mid = 32;     // gate hidden width
  std::size_t d_hidden = 64;  // expert output dim
  std::size_t n_experts = 4;  // number of experts
  std::size_t d_router = 16;  // router bottleneck width

  void validate() const;

  bool operator==(const FusionConfig&) const = default;
};

// Mutable view of one parameter tensor; `shape` is {rows, cols} for
// matrices and {dim} for vectors/scalars.
struct TensorRef {
  std::string name;
  std::vector<std::size_t> shape;
  real* data;
  std::size_t size;
};

struct ConstTensorRef {
  std::string name;
  std::vector<std::size_t> shape;
  const real* data;
  std::size_t size;
};

struct Expert {
  Matrix w; // d_hidden x 2*d_proj
  Vector b; // d_hidden

  bool operator==(const Expert&) const = default;
};

// Every learnable tensor of the fusion module. The tensors() enumeration
// order is canonical: it fixes the init draw order, the optimizer state
// layout and the checkpoint manifest.
struct FusionParams {
  FusionConfig config;

  Matrix proj_t_w; // d_proj x d
  Vector proj_t_b; // d_proj
  Matrix proj_d_w; // d_proj x d
  Vector proj_d_b; // d_proj

  Matrix gate_w1; // d_mid x 2*d_proj
  Vector gate_b1; // d_mid
  Matrix gate_w2; // 1 x d_mid
  real gate_b2 = 0;

  Matrix router_w1; // d_router x 2*d_proj
  Vector router_b1; // d_router
  Matrix router_w2; // n_experts x d_router
  Vector router_b2; // n_experts

  std::vector<Expert> experts; // n_experts entries

  Matrix out_w; // d x d_hidden
  Vector out_b; // d

  static FusionParams zeros(const FusionConfig& config);

  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;

  bool operator==(const FusionParams&) const = default;
};

// Gradients mirror the parameter layout exactly.
using FusionGrads = FusionParams;

// One gate observation: how much weight the image received and how aligned
// the two raw embeddings were.
struct GateRecord {
  std::uint64_t sample_id = 0;
  std::uint32_t round = 0;
  real lambda = 0;       // text weight, in (0,1)
  real image_weight = 0; // exactly 1 - lambda
  real cos_td = 0;       // cosine of raw (z_t, z_d)
};

// Forward-pass cache; everything the backward pass needs, including copies
// of the raw inputs so that mismatched activations can be rejected.
struct FusionActivations {
  Vector z_t_in, z_d_in;

  Vector proj_t_pre, h_t; // d_proj
  Vector proj_d_pre, h_d; // d_proj
  Vector h_u;             // 2*d_proj

  Vector gate_pre;    // d_mid, pre-GELU
  Vector gate_hidden; // d_mid, post-GELU
  real gate_logit = 0;
  real lambda = 0;

  Vector router_pre;    // d_router, pre-GELU
  Vector router_hidden; // d_router, post-GELU
  Vector router_logits; // n_experts
  Vector p;             // n_experts, softmax

  std::vector<Vector> expert_pre; // per expert, d_hidden, pre-GELU
  std::vector<Vector> expert_out; // per expert, d_hidden, post-GELU
  Vector h_res;                   // d_hidden

  Vector z_base;     // d
  Vector z_pre_norm; // d
  Vector z_final;    // d, unit norm
};

struct ForwardResult {
  Vector z_final;
  FusionActivations acts;
  GateRecord gate;
};

struct BackwardResult {
  FusionGrads grads;
  Vector grad_z_t;
  Vector grad_z_d;
};

// Uniform +-sqrt(1/fan_in) weights, zero biases except the final gate bias
// which starts at 1 (text-leaning gate at init). Deterministic per seed.
FusionParams init_params(const FusionConfig& config, std::uint64_t seed);

// Independent GELU projection heads for the two modalities.
std::pair<Vector, Vector> project(const FusionParams& params, const Vector& z_t,
                                  const Vector& z_d);

// [h_t ; h_d], text half first.
Vector joint_context(const Vector& h_t, const Vector& h_d);

// Scalar text weight in (0,1) from the joint context.
real gate(const FusionParams& params, const Vector& h_u);

// lambda * z_t + (1 - lambda) * z_d on the RAW embeddings.
Vector base_fusion(real lambda, const Vector& z_t, const Vector& z_d);

// Dense routing distribution over all experts.
Vector route(const FusionParams& params, const Vector& h_u);

// sum_k p_k * gelu(W_k h_u + b_k).
Vector experts_forward(const FusionParams& params, const Vector& h_u,
                       const Vector& p);

// Full pipeline: project, gate, route, expert residual, output projection,
// l2 normalization. sample_id/round are carried into the gate record and
// error messages only.
ForwardResult fuse_forward(const FusionParams& params, const Vector& z_t,
                           const Vector& z_d, std::uint64_t sample_id = 0,
                           std::uint32_t round = 0);

// Exact reverse-mode gradients of a scalar loss through the whole pipeline,
// given d loss / d z_final. `acts` must come from fuse_forward on the same
// params and inputs.
BackwardResult fuse_backward(const FusionParams& params,
                             const FusionActivations& acts, const Vector& z_t,
                             const Vector& z_d, const Vector& grad_z_final);

// Fixed-weight additive baseline: l2_normalize(w*z_t + (1-w)*z_d).
Vector static_fusion(const Vector& z_t, const Vector& z_d, real w);

// Exact learnable-parameter count for a config.
std::size_t count_params(const FusionConfig& config);

} // namespace adafuse
