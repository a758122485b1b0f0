#pragma once

// Central finite-difference oracle for scalar functions of tape parameters.
// Works on the double-precision core only.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cwm/core/autograd.hpp"
#include "cwm/core/nn.hpp"
#include "cwm/core/rng.hpp"

namespace cwm::testing {

struct GradCheckResult {
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
  std::string label;
};

inline double rel_err(double a, double n) {
  const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
  return std::abs(a - n) / denom;
}

/// Evaluates f() (must rebuild the graph each call, with identical randomness)
/// and compares the gradient projected on a random unit direction over the
/// parameters in `params` against a central difference along that direction.
inline GradCheckResult directional_check(const std::function<Var()>& f, const std::vector<Var>& params, Rng& rng,
                                         double eps = 1e-5, std::string label = {}) {
  std::vector<Tensor> dir;
  double norm2 = 0;
  for (const Var& p : params) {
    Tensor d(p.shape());
    for (real& v : d.values()) {
      v = rng.normal();
      norm2 += double(v) * v;
    }
    dir.push_back(std::move(d));
  }
  const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
  for (Tensor& d : dir)
    for (real& v : d.values()) v *= inv;

  for (const Var& p : params) const_cast<Var&>(p).zero_grad();
  backward(f());
  double analytic = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor g = params[i].grad();
    for (index_t j = 0; j < g.numel(); ++j) analytic += double(g[j]) * dir[i][j];
  }
  auto shift = [&](double s) {
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& v = const_cast<Var&>(params[i]).value_mut();
      for (index_t j = 0; j < v.numel(); ++j) v[j] += s * dir[i][j];
    }
  };
  double fp, fm;
  {
    NoGradGuard ng;
    shift(eps);
    fp = f().value()[0];
    shift(-2 * eps);
    fm = f().value()[0];
    shift(eps);
  }
  const double numeric = (fp - fm) / (2 * eps);
  for (const Var& p : params) const_cast<Var&>(p).zero_grad();
  return {analytic, numeric, rel_err(analytic, numeric), std::move(label)};
}

inline std::vector<Var> vars_of(const nn::ParamList& list) {
  std::vector<Var> out;
  for (const auto& p : list.params()) out.push_back(p.var);
  return out;
}

/// Overwrites every parameter with small random values so zero-initialized
/// layers take part in a gradient check.
inline void randomize(const nn::ParamList& list, Rng& rng, double scale = 0.3) {
  for (const auto& p : list.params()) {
    Var v = p.var;
    for (real& x : v.value_mut().values()) x += static_cast<real>(scale * (rng.uniform() - 0.5));
  }
}

}  // namespace cwm::testing
