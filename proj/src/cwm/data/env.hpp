#pragma once

#include <array>
#include <span>

#include "cwm/data/sprites.hpp"

namespace cwm::data {

struct ReachConfig {
  index_t side = 64;
  int episode_length = 100;
  double max_speed = 0.05;       ///< per step, fraction of the side
  double d_max = 0.3;            ///< distance at which reward reaches 0
  double success_radius = 0.05;  ///< success when closer than this
  index_t action_dim = 2;
};

void validate(const ReachConfig& cfg);

struct StepResult {
  vision::Frame observation;
  double reward = 0;
  bool done = false;
  bool success = false;
};

/// Moves an agent sprite towards a static goal marker. Positions live in the
/// unit square; appearance is resampled at every reset.
class ReachEnv {
 public:
  ReachEnv(const ReachConfig& cfg, std::uint64_t seed);

  vision::Frame reset();
  /// Action components are clipped to [-1, 1]. Stepping a finished episode is
  /// an error.
  StepResult step(std::span<const double> action);

  /// 10 * max(0, 1 - dist / d_max).
  double reward_at(double dist) const;
  double distance() const;
  bool done() const { return done_; }
  int steps() const { return t_; }
  const ReachConfig& config() const { return cfg_; }
  std::array<double, 2> agent() const { return agent_; }
  std::array<double, 2> goal() const { return goal_; }
  /// Places agent and goal explicitly (same episode, same appearance).
  void set_positions(std::array<double, 2> agent, std::array<double, 2> goal);

  vision::Frame render() const;

 private:
  ReachConfig cfg_;
  Rng rng_;
  ContextStyle style_;
  vision::Frame background_;
  std::array<double, 2> agent_{}, goal_{};
  int t_ = 0;
  bool done_ = true;
};

}  // namespace cwm::data
