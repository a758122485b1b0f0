#include "cwm/behavior/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cwm/core/error.hpp"

namespace cwm::behavior {

void validate(const BehaviorConfig& cfg) {
  if (cfg.horizon < 1) throw_config("behavior.horizon must be >= 1");
  if (!(cfg.gamma >= 0 && cfg.gamma <= 1)) throw_config("behavior.gamma must lie in [0, 1]");
  if (!(cfg.lambda_ret >= 0 && cfg.lambda_ret <= 1)) throw_config("behavior.lambda_ret must lie in [0, 1]");
  if (!(cfg.entropy_eta >= 0)) throw_config("behavior.entropy_eta must be >= 0");
  if (!(cfg.actor_lr > 0) || !(cfg.critic_lr > 0)) throw_config("behavior learning rates must be > 0");
  if (cfg.target_update_interval < 1) throw_config("behavior.target_update_interval must be >= 1");
  if (cfg.hidden < 1 || cfg.layers < 1) throw_config("behavior network width and depth must be >= 1");
  if (!(cfg.min_std > 0)) throw_config("behavior.min_std must be > 0");
}

namespace {
// softplus(kStdShift) + min_std is close to 1 for min_std = 0.1.
constexpr real kStdShift = real(0.3412);
}  // namespace

Actor::Actor(index_t feature_width, index_t action_dim, const BehaviorConfig& cfg, Rng& rng)
    : net_(feature_width, cfg.hidden, cfg.layers, 2 * action_dim, rng),
      action_dim_(action_dim),
      min_std_(cfg.min_std) {}

std::pair<Var, Var> Actor::distribution(const Var& features) const {
  const Var out = net_(features);
  const Var mean = scale(tanh(scale(slice_cols(out, 0, action_dim_), real(0.2))), real(5));
  const Var std = add_scalar(softplus(add_scalar(slice_cols(out, action_dim_, 2 * action_dim_), kStdShift)),
                             real(min_std_));
  return {mean, std};
}

Var squashed_log_prob(const Var& u, const Var& mean, const Var& std) {
  const Var log_std = log(std);
  const Var z = mul(sub(u, mean), exp(neg(log_std)));
  const Var gauss = add_scalar(neg(add(scale(square(z), real(0.5)), log_std)),
                               real(-0.5 * std::log(2 * std::numbers::pi)));
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
  const Var jac = scale(add_scalar(neg(add(u, softplus(scale(u, real(-2))))), real(std::numbers::ln2)), real(2));
  return sum_rows(sub(gauss, jac));
}

Actor::Output Actor::operator()(const Var& features, Rng& rng, bool deterministic) const {
  auto [mean, std] = distribution(features);
  if (deterministic) return {tanh(mean), Var()};
  Tensor eps(mean.shape());
  for (real& e : eps.values()) e = static_cast<real>(rng.normal());
  const Var u = add(mean, mul(std, constant(std::move(eps))));
  return {tanh(u), squashed_log_prob(u, mean, std)};
}

void Actor::collect(const std::string& prefix, nn::ParamList& out) const { net_.collect(prefix, out); }

Critic::Critic(index_t feature_width, const BehaviorConfig& cfg, Rng& rng)
    : net_(feature_width, cfg.hidden, cfg.layers, 1, rng) {}

Var Critic::operator()(const Var& features) const {
  const Var v = net_(features);
  return reshape(v, {v.dim(0)});
}

void Critic::collect(const std::string& prefix, nn::ParamList& out) const { net_.collect(prefix, out); }

void Critic::copy_from(const Critic& other) {
  nn::ParamList mine, theirs;
  collect("", mine);
  other.collect("", theirs);
  if (mine.params().size() != theirs.params().size()) throw_runtime("critic copy between different shapes");
  for (size_t i = 0; i < mine.params().size(); ++i) {
    Var& dst = mine.params()[i].var;
    const Var& src = theirs.params()[i].var;
    if (dst.shape() != src.shape()) throw_runtime("critic copy between different shapes");
    dst.value_mut() = src.value();
  }
}

ImaginedTrajectory imagine(const model::LatentStateAC& start, const ImagineModels& m, const BehaviorConfig& cfg,
                           Rng& rng, bool deterministic, model::SampleTape* tape) {
  if (cfg.horizon < 1) throw_config("imagination horizon must be >= 1");
  if (!m.dynamics || !m.reward || !m.actor || !m.target_critic) throw_runtime("imagine needs every model");
  if (start.h.requires_grad() || start.s.requires_grad())
    throw_runtime("imagination start states must be detached from the tape");

  ImaginedTrajectory traj;
  traj.states.push_back(start);
  for (int t = 0; t < cfg.horizon; ++t) {
    const model::LatentStateAC& cur = traj.states.back();
    Actor::Output a = (*m.actor)(model::features(cur), rng, deterministic);
    model::AcStep step = m.dynamics->step(cur, a.action, nullptr, rng, true, tape);
    traj.actions.push_back(a.action);
    traj.log_probs.push_back(a.log_prob);
    traj.states.push_back(step.next);
  }
  for (int t = 0; t <= cfg.horizon; ++t) {
    const Var feat = model::features(traj.states[size_t(t)]);
    if (t > 0) {
      const Var r = (*m.reward)(feat);
      traj.rewards.push_back(reshape(r, {r.dim(0)}));
    }
    traj.values.push_back((*m.target_critic)(feat));
  }
  traj.returns = lambda_returns(traj.rewards, traj.values, cfg.gamma, cfg.lambda_ret);
  return traj;
}

std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const double> values, double gamma,
                                   double lambda) {
  const size_t h = rewards.size();
  if (values.size() != h + 1) throw_runtime("lambda_returns needs one more value than rewards");
  std::vector<double> out(h);
  for (size_t i = h; i-- > 0;) {
    if (i + 1 == h)
      out[i] = rewards[i] + gamma * values[i + 1];
    else
      out[i] = rewards[i] + gamma * ((1 - lambda) * values[i + 1] + lambda * out[i + 1]);
  }
  return out;
}

std::vector<Var> lambda_returns(const std::vector<Var>& rewards, const std::vector<Var>& values, double gamma,
                                double lambda) {
  const size_t h = rewards.size();
  if (values.size() != h + 1) throw_runtime("lambda_returns needs one more value than rewards");
  std::vector<Var> out(h);
  for (size_t i = h; i-- > 0;) {
    Var next;
    if (i + 1 == h)
      next = values[i + 1];
    else
      next = add(scale(values[i + 1], real(1 - lambda)), scale(out[i + 1], real(lambda)));
    out[i] = add(rewards[i], scale(next, real(gamma)));
  }
  return out;
}

Var critic_regression(const Var& pred, const Tensor& target) {
  if (pred.value().shape() != target.shape()) throw_runtime("critic target shape mismatch");
  return scale(sum(square(sub(pred, constant(target)))), real(0.5));
}

Var critic_loss(const Critic& critic, const ImaginedTrajectory& traj) {
  if (traj.returns.empty()) throw_runtime("critic_loss needs a trajectory with returns");
  Var total;
  for (size_t t = 0; t < traj.returns.size(); ++t) {
    const Var pred = critic(detach(model::features(traj.states[t])));
    const Var term = scale(critic_regression(pred, traj.returns[t].value()), real(1) / real(pred.numel()));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

Var actor_loss(const ImaginedTrajectory& traj, const BehaviorConfig& cfg) {
  if (traj.returns.empty()) throw_runtime("actor_loss needs a trajectory with returns");
  Var total;
  for (size_t t = 0; t < traj.returns.size(); ++t) {
    Var objective = traj.returns[t];
    if (cfg.entropy_eta != 0) {
      if (!traj.log_probs[t].defined()) throw_runtime("actor_loss needs sampled actions");
      // -eta * H with H = -log pi
      objective = sub(objective, scale(traj.log_probs[t], real(cfg.entropy_eta)));
    }
    const Var term = neg(mean(objective));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

IntrinsicMemory::IntrinsicMemory(index_t latent_width, index_t proj_dim, size_t capacity, int k, Rng& rng)
    : projection_(Shape{latent_width, proj_dim}), capacity_(capacity), k_(k) {
  if (latent_width < 1 || proj_dim < 1 || capacity < 1 || k < 1)
    throw_config("intrinsic memory needs positive width, projection size, capacity and k");
  const double sd = 1.0 / std::sqrt(double(proj_dim));
  for (real& v : projection_.values()) v = static_cast<real>(sd * rng.normal());
}

IntrinsicMemory::IntrinsicMemory(Tensor projection, size_t capacity, int k)
    : projection_(std::move(projection)), capacity_(capacity), k_(k) {
  if (projection_.rank() != 2 || capacity < 1 || k < 1) throw_config("invalid intrinsic memory configuration");
}

std::vector<double> IntrinsicMemory::project(std::span<const real> latent) const {
  const index_t in = projection_.dim(0), out = projection_.dim(1);
  if (static_cast<index_t>(latent.size()) != in)
    throw_runtime("intrinsic memory expects latents of width " + std::to_string(in));
  std::vector<double> p(size_t(out), 0.0);
  for (index_t i = 0; i < in; ++i) {
    const double x = latent[size_t(i)];
    if (x == 0) continue;
    const real* row = projection_.data() + i * out;
    for (index_t j = 0; j < out; ++j) p[size_t(j)] += x * row[j];
  }
  return p;
}

double IntrinsicMemory::knn_distance(const std::vector<double>& p) const {
  if (bank_.empty()) return 0.0;
  std::vector<double> d;
  d.reserve(bank_.size());
  for (const auto& q : bank_) {
    double s = 0;
    for (size_t j = 0; j < p.size(); ++j) s += (p[j] - q[j]) * (p[j] - q[j]);
    d.push_back(std::sqrt(s));
  }
  const size_t k = std::min(d.size(), size_t(k_));
  std::partial_sort(d.begin(), d.begin() + std::ptrdiff_t(k), d.end());
  double acc = 0;
  for (size_t i = 0; i < k; ++i) acc += d[i];
  return acc / double(k);
}

void IntrinsicMemory::insert(std::vector<double> p) {
  if (bank_.size() == capacity_) bank_.pop_front();
  bank_.push_back(std::move(p));
}

double intrinsic_bonus(std::span<const real> latent, IntrinsicMemory& memory) {
  std::vector<double> p = memory.project(latent);
  const double r = memory.knn_distance(p);
  memory.insert(std::move(p));
  return r;
}

}  // namespace cwm::behavior
