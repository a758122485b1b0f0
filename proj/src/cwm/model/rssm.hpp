#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cwm/core/nn.hpp"
#include "cwm/model/categorical.hpp"
#include "cwm/model/config.hpp"

namespace cwm::model {

/// Action-free level: deterministic h and one-hot z of shape (batch, V, K).
struct LatentStateAF {
  Var h;
  Var z;
};

/// Action-conditioned level stacked above the action-free one.
struct LatentStateAC {
  Var h;
  Var s;
};

/// h concatenated with the flattened stochastic sample, (batch, det + V*K).
Var features(const LatentStateAF& st);
Var features(const LatentStateAC& st);

/// Zero h; every variable one-hot at class 0.
std::pair<LatentStateAF, LatentStateAC> init_state(index_t batch, const ModelConfig& cfg);

struct AfStep {
  CategoricalDist prior;
  std::optional<CategoricalDist> posterior;
  LatentStateAF next;
};

struct AcStep {
  CategoricalDist prior;
  std::optional<CategoricalDist> posterior;
  LatentStateAC next;
};

/// Representation q(z_t | z_{t-1}, o_t) and transition p(z_t | z_{t-1}).
/// Observation input is the image embedding only; there is no context input.
class ActionFreeDynamics {
 public:
  ActionFreeDynamics() = default;
  ActionFreeDynamics(const ModelConfig& cfg, Rng& init_rng);

  /// Recurrent update from (prev.h, prev.z).
  Var advance(const LatentStateAF& prev) const;
  CategoricalDist prior(const Var& h) const;
  CategoricalDist posterior(const Var& h, const Var& embed) const;

  /// One step. With `embed` the next sample comes from the posterior,
  /// otherwise from the prior and `posterior` is empty.
  AfStep step(const LatentStateAF& prev, const Var* embed, Rng& rng, SampleTape* tape = nullptr) const;

  void collect(const std::string& prefix, nn::ParamList& out) const;
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  nn::DenseStack input_;
  nn::GruCell cell_;
  nn::DenseStack prior_hidden_, post_hidden_;
  nn::Linear prior_out_, post_out_;
};

/// Representation q(s_t | s_{t-1}, a_{t-1}, z_t) and transition p(s_t | s_{t-1}, a_{t-1}).
/// The posterior sees the image only through the action-free sample z_t.
class ActionConditionedDynamics {
 public:
  ActionConditionedDynamics() = default;
  ActionConditionedDynamics(const ModelConfig& cfg, Rng& init_rng);

  Var advance(const LatentStateAC& prev, const Var& action) const;
  CategoricalDist prior(const Var& h) const;
  CategoricalDist posterior(const Var& h, const Var& z_sample) const;

  /// `z_sample` is required unless `prior_only`.
  AcStep step(const LatentStateAC& prev, const Var& action, const Var* z_sample, Rng& rng, bool prior_only,
              SampleTape* tape = nullptr) const;

  void collect(const std::string& prefix, nn::ParamList& out) const;
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  nn::DenseStack input_;
  nn::GruCell cell_;
  nn::DenseStack prior_hidden_, post_hidden_;
  nn::Linear prior_out_, post_out_;
};

struct PosteriorStep {
  AfStep af;
  std::optional<AcStep> ac;
};

/// Filters a segment through the stacked model. `embeds` is (B, T, E);
/// `actions` (B, T, A) holds the action taken before each frame and enables
/// the action-conditioned level when given.
std::vector<PosteriorStep> rollout_posterior(const ActionFreeDynamics& af, const ActionConditionedDynamics* ac,
                                             const Var& embeds, const Var* actions, Rng& rng,
                                             SampleTape* tape = nullptr);

}  // namespace cwm::model
