#pragma once

#include <memory>

#include "cwm/behavior/behavior.hpp"
#include "cwm/harness/checkpoint.hpp"
#include "cwm/model/world_model.hpp"

namespace cwm::harness {

/// theta: action-free dynamics, encoders, decoder; phi: action-conditioned
/// dynamics and behavioral reward head; varphi: representative reward head;
/// psi: actor; xi: critic.
struct ParamGroups {
  nn::ParamList theta, phi, varphi, psi, xi;
};

/// World model plus actor, critic and the slow target critic, all built from
/// one seed.
class Agent {
 public:
  Agent(const model::WorldModelConfig& wm, const behavior::BehaviorConfig& behavior, std::uint64_t seed);

  model::WorldModel& world_model() { return *wm_; }
  const model::WorldModel& world_model() const { return *wm_; }
  ParamGroups groups();

  /// Stores theta, phi, varphi, psi, xi and the target critic under "xi_target".
  void save_groups(Checkpoint& ck);
  /// With `theta_only` only theta is read and everything else keeps its
  /// fresh initialization.
  void load_groups(const Checkpoint& ck, bool theta_only);

  behavior::Actor actor;
  behavior::Critic critic;
  behavior::Critic target_critic;

 private:
  std::unique_ptr<model::WorldModel> wm_;
};

struct ParamCounts {
  index_t theta = 0, phi = 0, varphi = 0, psi = 0, xi = 0;
  index_t total() const { return theta + phi + varphi + psi + xi; }
};

ParamCounts count_parameters(Agent& agent);

}  // namespace cwm::harness
