#pragma once

// Brute-force references shared by the unit tests and the acceptance runner.

#include <array>
#include <cmath>
#include <vector>

#include "cwm/model/rssm.hpp"
#include "cwm/objectives/losses.hpp"

namespace cwm::testing {

/// Lambda-return as the weighted mixture of n-step returns, written without
/// the recursion used by the implementation.
inline std::vector<double> lambda_oracle(const std::vector<double>& r, const std::vector<double>& v, double g,
                                         double l) {
  const size_t h = r.size();
  std::vector<double> out(h);
  for (size_t t = 0; t < h; ++t) {
    const size_t max_n = h - t;
    auto n_step = [&](size_t n) {
      double acc = 0, disc = 1;
      for (size_t i = 0; i < n; ++i) {
        acc += disc * r[t + i];
        disc *= g;
      }
      return acc + disc * v[t + n];
    };
    double total = 0, w = 1;
    for (size_t n = 1; n < max_n; ++n) {
      total += (1 - l) * w * n_step(n);
      w *= l;
    }
    out[t] = total + w * n_step(max_n);
  }
  return out;
}

struct SequenceKl {
  double joint = 0;     ///< KL(q(z1, z2) || p(z1, z2)) by enumerating the four paths
  double stepwise = 0;  ///< KL_1 + E_{q(z1)} KL_2 from kl_categorical
};

/// Two-step action-free rollout with V = 1, K = 2 (the model must be built
/// that way) and embeddings e1, e2 of shape (1, E).
inline SequenceKl sequence_kl(const model::ActionFreeDynamics& af, const Tensor& e1, const Tensor& e2) {
  auto probs = [](const model::CategoricalDist& d) {
    const Tensor& l = d.logits.value();
    const double m = std::max(l[0], l[1]);
    const double a = std::exp(l[0] - m), b = std::exp(l[1] - m);
    return std::array<double, 2>{a / (a + b), b / (a + b)};
  };
  NoGradGuard ng;
  auto [s0, unused] = model::init_state(1, af.config());
  const Var h1 = af.advance(s0);
  const auto q1d = af.posterior(h1, Var(e1)), p1d = af.prior(h1);
  const auto q1 = probs(q1d), p1 = probs(p1d);

  SequenceKl out;
  out.stepwise = objectives::kl_categorical(q1d, p1d).value()[0];
  for (index_t z1 = 0; z1 < 2; ++z1) {
    model::LatentStateAF s1{h1, Var(model::onehot_from_indices({z1}, 1, 1, 2))};
    const Var h2 = af.advance(s1);
    const auto q2d = af.posterior(h2, Var(e2)), p2d = af.prior(h2);
    const auto q2 = probs(q2d), p2 = probs(p2d);
    out.stepwise += q1[size_t(z1)] * objectives::kl_categorical(q2d, p2d).value()[0];
    for (size_t z2 = 0; z2 < 2; ++z2) {
      const double q = q1[size_t(z1)] * q2[z2], p = p1[size_t(z1)] * p2[z2];
      out.joint += q * std::log(q / p);
    }
  }
  return out;
}

/// The V = 1, K = 2 configuration used with sequence_kl.
inline model::ModelConfig binary_latent_config() {
  model::ModelConfig cfg;
  cfg.det_size = 3;
  cfg.hidden = 4;
  cfg.stoch_vars = 1;
  cfg.stoch_classes = 2;
  cfg.embed_dim = 3;
  return cfg;
}

inline double l2_distance(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (index_t i = 0; i < a.numel(); ++i) s += std::pow(double(a[i]) - b[i], 2);
  return std::sqrt(s);
}

}  // namespace cwm::testing
