#include "cwm/harness/agent.hpp"

#include "cwm/core/error.hpp"

namespace cwm::harness {

Agent::Agent(const model::WorldModelConfig& wm, const behavior::BehaviorConfig& behavior, std::uint64_t seed) {
  Rng master(seed);
  Rng wm_rng = master.fork(1);
  wm_ = std::make_unique<model::WorldModel>(wm, wm_rng);
  Rng beh_rng = master.fork(2);
  const index_t width = wm.model.feature_width();
  actor = behavior::Actor(width, wm.model.action_dim, behavior, beh_rng);
  critic = behavior::Critic(width, behavior, beh_rng);
  target_critic = behavior::Critic(width, behavior, beh_rng);
  target_critic.copy_from(critic);
}

ParamGroups Agent::groups() {
  ParamGroups g;
  g.theta = wm_->theta();
  g.phi = wm_->phi();
  g.varphi = wm_->varphi();
  actor.collect("psi.actor", g.psi);
  critic.collect("xi.critic", g.xi);
  return g;
}

void Agent::save_groups(Checkpoint& ck) {
  ParamGroups g = groups();
  ck.groups["theta"] = export_params(g.theta);
  ck.groups["phi"] = export_params(g.phi);
  ck.groups["varphi"] = export_params(g.varphi);
  ck.groups["psi"] = export_params(g.psi);
  ck.groups["xi"] = export_params(g.xi);
  nn::ParamList target;
  target_critic.collect("xi.critic", target);
  ck.groups["xi_target"] = export_params(target);
}

void Agent::load_groups(const Checkpoint& ck, bool theta_only) {
  auto find = [&](const std::string& name) -> const std::vector<TensorBlob>& {
    auto it = ck.groups.find(name);
    if (it == ck.groups.end()) throw_data("checkpoint has no parameter group " + name);
    return it->second;
  };
  ParamGroups g = groups();
  import_params(find("theta"), g.theta, "theta");
  if (theta_only) return;
  import_params(find("phi"), g.phi, "phi");
  import_params(find("varphi"), g.varphi, "varphi");
  import_params(find("psi"), g.psi, "psi");
  import_params(find("xi"), g.xi, "xi");
  nn::ParamList target;
  target_critic.collect("xi.critic", target);
  import_params(find("xi_target"), target, "xi_target");
}

ParamCounts count_parameters(Agent& agent) {
  ParamGroups g = agent.groups();
  return {g.theta.count(), g.phi.count(), g.varphi.count(), g.psi.count(), g.xi.count()};
}

}  // namespace cwm::harness
