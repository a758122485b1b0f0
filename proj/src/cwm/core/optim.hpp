#pragma once

#include <string>
#include <vector>

#include "cwm/core/nn.hpp"

namespace cwm {

struct AdamConfig {
  real lr = real(3e-4);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real eps = real(1e-5);
  /// Global gradient-norm clip; <= 0 disables.
  real clip_norm = real(100);
};

/// Adam over a fixed parameter list. Moments are indexed by position in the
/// list, so the list must not change between steps.
class Adam {
 public:
  Adam() = default;
  Adam(nn::ParamList params, AdamConfig cfg);

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Returns the pre-clip global gradient norm.
  real step();
  void zero_grad() { params_.zero_grad(); }

  const nn::ParamList& params() const { return params_; }
  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return steps_; }

  // Checkpoint access.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  nn::ParamList params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

}  // namespace cwm
