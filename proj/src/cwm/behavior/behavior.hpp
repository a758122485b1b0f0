#pragma once

#include <deque>
#include <span>
#include <vector>

#include "cwm/core/nn.hpp"
#include "cwm/model/rssm.hpp"

namespace cwm::behavior {

struct BehaviorConfig {
  int horizon = 15;
  double gamma = 0.99;
  double lambda_ret = 0.95;
  double entropy_eta = 1e-4;
  double actor_lr = 8e-5;
  double critic_lr = 8e-5;
  int target_update_interval = 100;
  index_t hidden = 400;
  int layers = 4;
  double min_std = 0.1;
};

void validate(const BehaviorConfig& cfg);

/// Tanh-squashed diagonal Gaussian policy over s-level features.
class Actor {
 public:
  Actor() = default;
  Actor(index_t feature_width, index_t action_dim, const BehaviorConfig& cfg, Rng& rng);

  struct Output {
    Var action;    ///< (N, A) in (-1, 1)
    Var log_prob;  ///< (N) log density of `action`; undefined in deterministic mode
  };
  /// Reparameterized sample, or tanh of the mean when `deterministic`.
  Output operator()(const Var& features, Rng& rng, bool deterministic = false) const;
  /// Pre-squash mean and standard deviation, each (N, A).
  std::pair<Var, Var> distribution(const Var& features) const;

  void collect(const std::string& prefix, nn::ParamList& out) const;
  index_t action_dim() const { return action_dim_; }

 private:
  nn::Mlp net_;
  index_t action_dim_ = 0;
  double min_std_ = 0.1;
};

/// Log density of tanh(u) where u ~ N(mean, std), summed over action dims.
Var squashed_log_prob(const Var& u, const Var& mean, const Var& std);

class Critic {
 public:
  Critic() = default;
  Critic(index_t feature_width, const BehaviorConfig& cfg, Rng& rng);
  /// (N, F) -> (N)
  Var operator()(const Var& features) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
  /// Overwrites this critic's parameters with `other`'s values.
  void copy_from(const Critic& other);

 private:
  nn::Mlp net_;
};

/// H-step latent rollout in prior-only mode.
struct ImaginedTrajectory {
  std::vector<model::LatentStateAC> states;  ///< H + 1
  std::vector<Var> actions;                   ///< H of (N, A)
  std::vector<Var> log_probs;                 ///< H of (N)
  std::vector<Var> rewards;                   ///< H of (N); reward on reaching states[tau + 1]
  std::vector<Var> values;                    ///< H + 1 of (N), from the target critic
  std::vector<Var> returns;                   ///< H of (N)

  int horizon() const { return static_cast<int>(actions.size()); }
};

struct ImagineModels {
  const model::ActionConditionedDynamics* dynamics = nullptr;
  const nn::Mlp* reward = nullptr;
  const Actor* actor = nullptr;
  const Critic* target_critic = nullptr;
};

/// Rolls the action-conditioned prior forward from `start` (which must not be
/// attached to the representation-learning tape) with actions from the actor,
/// then fills rewards, target values and lambda-returns.
ImaginedTrajectory imagine(const model::LatentStateAC& start, const ImagineModels& m, const BehaviorConfig& cfg,
                           Rng& rng, bool deterministic = false, model::SampleTape* tape = nullptr);

/// Backward recursion: V_H-1 = r_H-1 + gamma v_H, otherwise
/// V_t = r_t + gamma ((1 - lambda) v_t+1 + lambda V_t+1). values has H + 1 entries.
std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const double> values, double gamma,
                                   double lambda);
/// Same recursion on batched tape values; gradients flow into rewards and values.
std::vector<Var> lambda_returns(const std::vector<Var>& rewards, const std::vector<Var>& values, double gamma,
                                double lambda);

/// sum_t mean_n 0.5 (v(sg(s_t)) - sg(V_t))^2 over t < H.
Var critic_loss(const Critic& critic, const ImaginedTrajectory& traj);
/// 0.5 * sum (pred - sg(target))^2, the regression used by critic_loss.
Var critic_regression(const Var& pred, const Tensor& target);

/// sum_t mean_n (-V_t - eta * H_t) with H_t = -log pi(a_t | s_t) of the sampled
/// action (single-sample entropy estimate).
Var actor_loss(const ImaginedTrajectory& traj, const BehaviorConfig& cfg);

/// Fixed random projection of latent vectors plus a bank of past projections.
class IntrinsicMemory {
 public:
  IntrinsicMemory() = default;
  /// Projection entries drawn N(0, 1 / proj_dim) from `rng` once.
  IntrinsicMemory(index_t latent_width, index_t proj_dim, size_t capacity, int k, Rng& rng);
  /// Explicit projection (latent_width, proj_dim).
  IntrinsicMemory(Tensor projection, size_t capacity, int k);

  std::vector<double> project(std::span<const real> latent) const;
  size_t size() const { return bank_.size(); }
  size_t capacity() const { return capacity_; }
  int k() const { return k_; }
  index_t latent_width() const { return projection_.dim(0); }
  const Tensor& projection() const { return projection_; }

  /// Mean distance from `p` to its k nearest bank entries (all of them when
  /// fewer than k; 0 for an empty bank).
  double knn_distance(const std::vector<double>& p) const;
  /// Appends, evicting the oldest entry at capacity.
  void insert(std::vector<double> p);

 private:
  Tensor projection_;
  std::deque<std::vector<double>> bank_;
  size_t capacity_ = 0;
  int k_ = 12;
};

/// Projects `latent`, returns its k-nearest-neighbor distance to the bank,
/// then stores the projection.
double intrinsic_bonus(std::span<const real> latent, IntrinsicMemory& memory);

}  // namespace cwm::behavior
