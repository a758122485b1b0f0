#include "cwm/objectives/losses.hpp"

#include <cmath>
#include <numbers>

#include "cwm/core/error.hpp"

namespace cwm::objectives {

using model::CategoricalDist;

LossWeights LossWeights::pretrain() {
  LossWeights w;
  w.beta_z = 1.0;
  return w;
}

LossWeights LossWeights::finetune() {
  LossWeights w;
  w.beta_z = 0.0;
  w.beta_s = 1.0;
  w.beta_r = 1.0;
  w.lambda_int = 1.0;
  return w;
}

void validate(const LossWeights& w) {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0) || !std::isfinite(v)) throw_config(std::string("loss.") + name + " must be a finite value >= 0");
  };
  nonneg(w.beta_z, "beta_z");
  nonneg(w.beta_s, "beta_s");
  nonneg(w.beta_r, "beta_r");
  nonneg(w.lambda_int, "lambda_int");
  nonneg(w.free_nats, "free_nats");
  if (!(w.kl_balance >= 0 && w.kl_balance < 1)) throw_config("loss.kl_balance must lie in [0, 1)");
}

Var kl_categorical(const CategoricalDist& post, const CategoricalDist& prior) {
  if (post.logits.shape() != prior.logits.shape())
    throw_runtime("KL between distributions of shapes " + shape_str(post.logits.shape()) + " and " +
                  shape_str(prior.logits.shape()));
  const Var lp = post.log_probs();
  return sum_rows(mul(exp(lp), sub(lp, prior.log_probs())));
}

Var kl_balanced(const CategoricalDist& post, const CategoricalDist& prior, double balance) {
  if (balance <= 0) return kl_categorical(post, prior);
  const CategoricalDist post_sg{detach(post.logits)};
  const CategoricalDist prior_sg{detach(prior.logits)};
  return add(scale(kl_categorical(post_sg, prior), real(balance)),
             scale(kl_categorical(post, prior_sg), real(1 - balance)));
}

Var gaussian_nll(const Var& pred, const Var& target) {
  if (pred.shape() != target.shape())
    throw_runtime("gaussian_nll shapes " + shape_str(pred.shape()) + " and " + shape_str(target.shape()));
  const double n = double(pred.numel());
  return add_scalar(scale(sum(square(sub(pred, target))), real(0.5)),
                    real(0.5 * n * std::log(2 * std::numbers::pi)));
}

namespace {

struct Shared {
  index_t b = 0, t = 0, s = 0;
  Var obs_flat;                           // (B*T, 3, S, S)
  std::optional<vision::ContextFeatures> ctx;  // repeated to B*T rows
  Var embeds;                             // (B, T, E)
};

void check_obs(const data::SegmentBatch& batch, index_t min_t) {
  const Tensor& o = batch.obs;
  if (o.rank() != 5 || o.dim(2) != 3 || o.dim(3) != o.dim(4))
    throw_data("segment observations must be (B, T, 3, S, S), got " + shape_str(o.shape()));
  if (o.dim(0) < 1 || o.dim(1) < min_t)
    throw_data("segment needs B >= 1 and T >= " + std::to_string(min_t) + ", got " + shape_str(o.shape()));
}

Shared prepare(model::WorldModel& wm, const data::SegmentBatch& batch, const LossOptions& opt, Rng& ctx_rng) {
  Shared sh;
  sh.b = batch.batch();
  sh.t = batch.length();
  sh.s = batch.image_size();
  const index_t per_frame = 3 * sh.s * sh.s;
  sh.obs_flat = constant(batch.obs.reshaped({sh.b * sh.t, 3, sh.s, sh.s}));

  std::vector<index_t> idx = opt.context_index;
  if (idx.empty()) {
    for (index_t i = 0; i < sh.b; ++i) idx.push_back(vision::sample_context_index(sh.t, ctx_rng));
  } else if (static_cast<index_t>(idx.size()) != sh.b) {
    throw_runtime("context_index must hold one entry per batch element");
  }
  if (wm.contextual()) {
    Tensor frames(Shape{sh.b, 3, sh.s, sh.s});
    for (index_t i = 0; i < sh.b; ++i) {
      const index_t c = idx[size_t(i)];
      if (c < 0 || c >= sh.t) throw_runtime("context index out of range");
      const real* src = batch.obs.data() + (i * sh.t + c) * per_frame;
      std::copy(src, src + per_frame, frames.data() + i * per_frame);
    }
    frames = vision::cutout(frames, opt.cutout, ctx_rng);
    vision::ContextFeatures f = wm.context_encoder.forward(constant(std::move(frames)), opt.training);
    sh.ctx = vision::ContextFeatures{repeat_rows(f.f16, sh.t), repeat_rows(f.f8, sh.t)};
  }

  const vision::EncoderOutput enc = wm.encoder.forward(sh.obs_flat, opt.training);
  sh.embeds = reshape(enc.embed, {sh.b, sh.t, enc.embed.dim(1)});
  return sh;
}

// Mean over batch and time of a per-step KL, with optional free nats per step.
Var kl_term(const std::vector<Var>& per_step, double free_nats) {
  Var acc;
  for (const Var& k : per_step) {
    Var m = mean(k);
    if (free_nats > 0 && m.value()[0] < free_nats) m = constant(Tensor::scalar(real(free_nats)));
    acc = acc.defined() ? add(acc, m) : m;
  }
  return scale(acc, real(1) / real(per_step.size()));
}

Var flatten_steps(const std::vector<Var>& per_step) {
  const Var stacked = stack_axis1(per_step);  // (B, T, ...)
  Shape shape = stacked.shape();
  Shape flat{shape[0] * shape[1]};
  flat.insert(flat.end(), shape.begin() + 2, shape.end());
  return reshape(stacked, flat);
}

double value_of(const Var& v) { return double(v.value()[0]); }

Var weighted(Var total, const Var& term, double w) {
  if (w == 0) return total;
  return add(total, scale(term, real(w)));
}

}  // namespace

LossReport pretrain_loss(model::WorldModel& wm, const data::SegmentBatch& batch, const LossWeights& w, Rng& rng,
                         const LossOptions& opt) {
  validate(w);
  check_obs(batch, 2);
  Rng ctx_rng = rng.fork(1), lat_rng = rng.fork(2), dec_rng = rng.fork(3);
  Shared sh = prepare(wm, batch, opt, ctx_rng);
  const auto steps = model::rollout_posterior(wm.af, nullptr, sh.embeds, nullptr, lat_rng, opt.tape);

  std::vector<Var> feats, kls;
  for (const auto& st : steps) {
    feats.push_back(model::features(st.af.next));
    kls.push_back(kl_balanced(*st.af.posterior, st.af.prior, w.kl_balance));
  }
  const Var recon = wm.decoder.forward(flatten_steps(feats), sh.ctx ? &*sh.ctx : nullptr, dec_rng, opt.training);
  const Var image = scale(gaussian_nll(recon, sh.obs_flat), real(1) / real(sh.b * sh.t));
  const Var kl_af = kl_term(kls, w.free_nats);

  LossReport r;
  r.total = weighted(image, kl_af, w.beta_z);
  r.total_value = value_of(r.total);
  r.image_nll = value_of(image);
  r.kl_af = value_of(kl_af);
  return r;
}

FinetuneResult finetune_loss(model::WorldModel& wm, const data::SegmentBatch& batch, const LossWeights& w, Rng& rng,
                             const LossOptions& opt) {
  validate(w);
  check_obs(batch, 1);
  const index_t b = batch.batch(), t = batch.length();
  const index_t a = wm.config().model.action_dim;
  if (batch.actions.shape() != Shape{b, t, a})
    throw_data("segment actions must be (" + std::to_string(b) + ", " + std::to_string(t) + ", " +
               std::to_string(a) + "), got " + shape_str(batch.actions.shape()));
  if (batch.rewards.shape() != Shape{b, t} || batch.intrinsic.shape() != Shape{b, t})
    throw_data("segment rewards and intrinsic rewards must be (B, T)");

  Rng ctx_rng = rng.fork(1), lat_rng = rng.fork(2), dec_rng = rng.fork(3);
  Shared sh = prepare(wm, batch, opt, ctx_rng);
  const Var actions = constant(batch.actions);
  const auto steps = model::rollout_posterior(wm.af, &wm.ac, sh.embeds, &actions, lat_rng, opt.tape);

  std::vector<Var> feats, af_feats, kl_af_steps, kl_ac_steps, hs, ss;
  for (const auto& st : steps) {
    feats.push_back(model::features(st.ac->next));
    af_feats.push_back(model::features(st.af.next));
    kl_af_steps.push_back(kl_balanced(*st.af.posterior, st.af.prior, w.kl_balance));
    kl_ac_steps.push_back(kl_balanced(*st.ac->posterior, st.ac->prior, w.kl_balance));
    hs.push_back(st.ac->next.h);
    ss.push_back(st.ac->next.s);
  }
  const Var feat = flatten_steps(feats);
  const real inv_n = real(1) / real(b * t);

  const Var recon = wm.decoder.forward(feat, sh.ctx ? &*sh.ctx : nullptr, dec_rng, opt.training);
  const Var image = scale(gaussian_nll(recon, sh.obs_flat), inv_n);

  Tensor target_b(Shape{b * t, 1}), target_r(Shape{b * t, 1});
  for (index_t i = 0; i < b * t; ++i) {
    target_r[i] = batch.rewards[i];
    target_b[i] = batch.rewards[i] + real(w.lambda_int) * batch.intrinsic[i];
  }
  const Var beh = scale(gaussian_nll(wm.reward_behavioral(feat), constant(std::move(target_b))), inv_n);
  const Var rep = scale(gaussian_nll(wm.reward_representative(feat), constant(std::move(target_r))), inv_n);
  const Var kl_af = kl_term(kl_af_steps, w.free_nats);
  const Var kl_ac = kl_term(kl_ac_steps, w.free_nats);

  FinetuneResult out;
  LossReport& r = out.report;
  Var total = add(image, beh);
  total = weighted(total, rep, w.beta_r);
  total = weighted(total, kl_af, w.beta_z);
  total = weighted(total, kl_ac, w.beta_s);
  r.total = total;
  r.total_value = value_of(total);
  r.image_nll = value_of(image);
  r.behavioral_reward_nll = value_of(beh);
  r.representative_reward_nll = value_of(rep);
  r.kl_af = value_of(kl_af);
  r.kl_ac = value_of(kl_ac);

  out.starts = model::LatentStateAC{detach(flatten_steps(hs)), detach(flatten_steps(ss))};
  out.af_features = flatten_steps(af_feats).value();
  return out;
}

}  // namespace cwm::objectives
