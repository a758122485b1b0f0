#pragma once

#include <optional>
#include <vector>

#include "cwm/data/segment.hpp"
#include "cwm/model/world_model.hpp"
#include "cwm/vision/image.hpp"

namespace cwm::objectives {

struct LossWeights {
  double beta_z = 1.0;      ///< action-free KL
  double beta_s = 1.0;      ///< action-conditioned KL
  double beta_r = 1.0;      ///< representative reward
  double lambda_int = 1.0;  ///< intrinsic reward in the behavioral target
  /// Prior-side share of the KL gradient; 0 keeps the plain KL.
  double kl_balance = 0.0;
  /// Per-step lower clamp on each KL term; 0 disables.
  double free_nats = 0.0;

  static LossWeights pretrain();
  static LossWeights finetune();
};

void validate(const LossWeights& w);

/// Per-row sum over variables of KL(post || prior), shape (batch).
Var kl_categorical(const model::CategoricalDist& post, const model::CategoricalDist& prior);

/// KL with gradients split between the two sides: `balance` of the gradient
/// reaches the prior, the rest the posterior. The value equals the plain KL.
Var kl_balanced(const model::CategoricalDist& post, const model::CategoricalDist& prior, double balance);

/// Unit-variance Gaussian negative log-likelihood summed over all elements:
/// 0.5 * sum (pred - target)^2 + 0.5 * N * ln(2 pi).
Var gaussian_nll(const Var& pred, const Var& target);

/// Components are per-step means over the batch and time axes; `total` is
/// their weighted sum.
struct LossReport {
  Var total;
  double total_value = 0;
  double image_nll = 0;
  double behavioral_reward_nll = 0;
  double representative_reward_nll = 0;
  double kl_af = 0;
  double kl_ac = 0;
};

struct LossOptions {
  vision::CutoutParams cutout;
  /// Context frame per batch element; sampled uniformly when empty.
  std::vector<index_t> context_index;
  bool training = true;
  model::SampleTape* tape = nullptr;
};

/// Action-free objective on a video segment: contextualized image NLL plus
/// beta_z times the action-free KL.
LossReport pretrain_loss(model::WorldModel& wm, const data::SegmentBatch& batch, const LossWeights& w, Rng& rng,
                         const LossOptions& opt = {});

struct FinetuneResult {
  LossReport report;
  /// Action-conditioned posterior states of every (b, t), flattened to B*T
  /// rows and cut from the tape; starting points for imagination.
  model::LatentStateAC starts;
  /// Action-free posterior features (B*T, det + V*K), constant.
  Tensor af_features;
};

/// Stacked objective: image NLL given (s_t, c), behavioral reward regressing
/// r + lambda_int * r_int, beta_r times the representative reward regressing
/// r, and both KL terms.
FinetuneResult finetune_loss(model::WorldModel& wm, const data::SegmentBatch& batch, const LossWeights& w, Rng& rng,
                             const LossOptions& opt = {});

}  // namespace cwm::objectives
