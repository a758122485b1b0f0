#include "cwm/core/optim.hpp"

#include <cmath>

namespace cwm {

Adam::Adam(nn::ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_.params()) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

real Adam::step() {
  auto& ps = params_.params();
  double sq = 0;
  for (auto& p : ps) {
    if (!p.var.has_grad()) continue;
    for (real g : p.var.node()->grad.values()) sq += double(g) * double(g);
  }
  const double norm = std::sqrt(sq);
  double factor = 1.0;
  if (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) factor = cfg_.clip_norm / (norm + 1e-6);

  ++steps_;
  const double bc1 = 1.0 - std::pow(double(cfg_.beta1), double(steps_));
  const double bc2 = 1.0 - std::pow(double(cfg_.beta2), double(steps_));
  for (size_t i = 0; i < ps.size(); ++i) {
    Var& var = ps[i].var;
    if (!var.has_grad()) continue;
    const Tensor& g = var.node()->grad;
    Tensor& w = var.value_mut();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (index_t j = 0; j < w.numel(); ++j) {
      const double gj = double(g[j]) * factor;
      m[j] = static_cast<real>(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj);
      v[j] = static_cast<real>(cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj);
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] = static_cast<real>(w[j] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
  params_.zero_grad();
  return static_cast<real>(norm);
}

}  // namespace cwm
