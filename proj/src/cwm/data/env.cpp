#include "cwm/data/env.hpp"

#include <algorithm>
#include <cmath>

#include "cwm/core/error.hpp"

namespace cwm::data {

void validate(const ReachConfig& cfg) {
  if (cfg.side < 8) throw_config("env.side must be >= 8");
  if (cfg.episode_length < 1) throw_config("env.episode_length must be >= 1");
  if (!(cfg.max_speed > 0)) throw_config("env.max_speed must be > 0");
  if (!(cfg.d_max > 0)) throw_config("env.d_max must be > 0");
  if (!(cfg.success_radius >= 0)) throw_config("env.success_radius must be >= 0");
  if (cfg.action_dim != 2) throw_config("the reach environment has a 2-d action space");
}

namespace {
constexpr double kLo = 0.08, kHi = 0.92;
}

ReachEnv::ReachEnv(const ReachConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) { validate(cfg); }

vision::Frame ReachEnv::reset() {
  style_ = sample_context(rng_.next_u64());
  background_ = render_background(style_, cfg_.side);
  agent_ = {rng_.uniform(kLo, kHi), rng_.uniform(kLo, kHi)};
  goal_ = {rng_.uniform(kLo, kHi), rng_.uniform(kLo, kHi)};
  t_ = 0;
  done_ = false;
  return render();
}

double ReachEnv::reward_at(double dist) const { return 10.0 * std::max(0.0, 1.0 - dist / cfg_.d_max); }

double ReachEnv::distance() const { return std::hypot(agent_[0] - goal_[0], agent_[1] - goal_[1]); }

void ReachEnv::set_positions(std::array<double, 2> agent, std::array<double, 2> goal) {
  agent_ = agent;
  goal_ = goal;
}

StepResult ReachEnv::step(std::span<const double> action) {
  if (done_) throw_runtime("env step after the episode finished; call reset first");
  if (action.size() != 2) throw_runtime("reach action must have 2 components");
  for (size_t i = 0; i < 2; ++i) {
    const double a = std::isfinite(action[i]) ? std::clamp(action[i], -1.0, 1.0) : 0.0;
    agent_[i] = std::clamp(agent_[i] + a * cfg_.max_speed, kLo, kHi);
  }
  ++t_;
  StepResult r;
  const double d = distance();
  r.reward = reward_at(d);
  r.success = d < cfg_.success_radius;
  done_ = t_ >= cfg_.episode_length;
  r.done = done_;
  r.observation = render();
  return r;
}

vision::Frame ReachEnv::render() const {
  vision::Frame f = background_;
  const double s = double(cfg_.side);
  const double radius = style_.sprite_radius * s;
  draw_ring(f, style_.goal_color, goal_[0] * s, goal_[1] * s, radius * 1.1, std::max(1.5, 0.3 * radius));
  draw_shape(f, style_.shape, style_.sprite_color, agent_[0] * s, agent_[1] * s, radius * 0.8);
  return f;
}

}  // namespace cwm::data
