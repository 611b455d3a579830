#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "adafuse/fusion.hpp"
#include "adafuse/numerics.hpp"
#include "adafuse/synthgen.hpp"

namespace adafuse {

struct TrainConfig {
  double learning_rate = 1e-3;
  double temperature = 0.07;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0; // global-norm clip; 0 disables
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

// First/second Adam moments, one flat buffer per parameter tensor in
// tensors() order; step counts the adam_step calls applied.
struct OptimizerState {
  std::vector<std::vector<real>> m;
  std::vector<std::vector<real>> v;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const FusionParams& params);
};

// One training minibatch. Row i of targets is the positive for row i of the
// queries; all other rows are in-batch negatives.
struct Batch {
  Matrix z_t;    // B x d text embeddings
  Matrix z_d;    // B x d generated-image embeddings
  Matrix z_star; // B x d target embeddings
  std::vector<std::uint64_t> dialogue_ids;
  std::vector<std::uint32_t> rounds;
};

struct InfoNceResult {
  double loss = 0;
  Matrix grad_zq; // B x d
  Matrix grad_zt; // B x d
};

// Symmetric InfoNCE over unit rows: S_ij = (q_i . t_j)/tau, loss is the mean
// of row-wise and column-wise cross entropies against the diagonal, halved.
// Gradients are analytic. Rows must be unit-norm within 1e-4; B >= 2.
InfoNceResult info_nce_loss(const Matrix& z_q, const Matrix& z_t, double tau);

// Bias-corrected Adam applied tensor-wise after optional global-norm
// clipping of the full gradient. Throws NumericError naming the first
// non-finite gradient tensor.
void adam_step(FusionParams& params, const FusionGrads& grads,
               OptimizerState& state, const TrainConfig& config);

struct TrainResult {
  FusionParams params;
  std::vector<double> loss_curve; // per-epoch mean batch loss
};

// Called once per finished epoch (1-based), with that epoch's mean loss.
using EpochCallback =
    std::function<void(std::size_t epoch, double mean_loss,
                       const FusionParams& params)>;

// Deterministic loop: init from train seed, flatten all (dialogue, round)
// pairs into one pool, reshuffle each epoch, and run
// fuse_forward -> InfoNCE -> fuse_backward -> adam_step per batch.
// Targets are looked up in the corpus by each sample's target_id.
TrainResult train(const std::vector<DialogueSample>& dataset,
                  const Corpus& corpus, const FusionConfig& fusion_config,
                  const TrainConfig& train_config,
                  const EpochCallback& on_epoch = {});

} // namespace adafuse
