#include "cwm/model/rssm.hpp"

#include "cwm/core/error.hpp"

namespace cwm::model {

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.det_size = 1024;
  c.hidden = 1024;
  c.stoch_vars = 32;
  c.stoch_classes = 32;
  c.action_dim = 4;
  c.embed_dim = 3072;
  c.dense_layers = 10;
  return c;
}

void validate(const ModelConfig& cfg) {
  auto need = [](index_t v, const char* name) {
    if (v < 1) throw_config(std::string("model.") + name + " must be >= 1");
  };
  need(cfg.det_size, "det_size");
  need(cfg.stoch_vars, "stoch_vars");
  need(cfg.stoch_classes, "stoch_classes");
  need(cfg.hidden, "hidden");
  need(cfg.action_dim, "action_dim");
  need(cfg.embed_dim, "embed_dim");
  need(cfg.dense_layers, "dense_layers");
}

namespace {

Var flatten(const Var& stoch) { return reshape(stoch, {stoch.dim(0), stoch.numel() / stoch.dim(0)}); }

Tensor initial_onehot(index_t batch, const ModelConfig& cfg) {
  Tensor t(Shape{batch, cfg.stoch_vars, cfg.stoch_classes});
  for (index_t r = 0; r < batch * cfg.stoch_vars; ++r) t[r * cfg.stoch_classes] = real(1);
  return t;
}

void check_rows(const Var& v, index_t rows, index_t cols, const char* what) {
  if (v.value().rank() != 2 || v.dim(0) != rows || v.dim(1) != cols)
    throw_runtime(std::string(what) + " has shape " + shape_str(v.shape()) + ", expected (" + std::to_string(rows) +
                  ", " + std::to_string(cols) + ")");
}

}  // namespace

Var features(const LatentStateAF& st) { return concat_cols({st.h, flatten(st.z)}); }
Var features(const LatentStateAC& st) { return concat_cols({st.h, flatten(st.s)}); }

std::pair<LatentStateAF, LatentStateAC> init_state(index_t batch, const ModelConfig& cfg) {
  if (batch < 1) throw_runtime("init_state needs batch >= 1");
  LatentStateAF af{constant(Tensor(Shape{batch, cfg.det_size})), constant(initial_onehot(batch, cfg))};
  LatentStateAC ac{constant(Tensor(Shape{batch, cfg.det_size})), constant(initial_onehot(batch, cfg))};
  return {af, ac};
}

// Output layers of both distribution heads start at zero: untrained priors and
// posteriors are exactly uniform.
ActionFreeDynamics::ActionFreeDynamics(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      input_(cfg.stoch_width(), cfg.hidden, cfg.dense_layers, rng),
      cell_(cfg.hidden, cfg.det_size, rng),
      prior_hidden_(cfg.det_size, cfg.hidden, cfg.dense_layers, rng),
      post_hidden_(cfg.det_size + cfg.embed_dim, cfg.hidden, cfg.dense_layers, rng),
      prior_out_(cfg.hidden, cfg.stoch_width(), rng, nn::Init::kZero),
      post_out_(cfg.hidden, cfg.stoch_width(), rng, nn::Init::kZero) {
  validate(cfg);
}

Var ActionFreeDynamics::advance(const LatentStateAF& prev) const {
  const index_t b = prev.h.dim(0);
  check_rows(prev.h, b, cfg_.det_size, "action-free h");
  if (prev.z.numel() != b * cfg_.stoch_width()) throw_runtime("action-free z has wrong size");
  return cell_(input_(flatten(prev.z)), prev.h);
}

CategoricalDist ActionFreeDynamics::prior(const Var& h) const {
  return make_categorical(prior_out_(prior_hidden_(h)), cfg_.stoch_vars, cfg_.stoch_classes);
}

CategoricalDist ActionFreeDynamics::posterior(const Var& h, const Var& embed) const {
  check_rows(embed, h.dim(0), cfg_.embed_dim, "image embedding");
  return make_categorical(post_out_(post_hidden_(concat_cols({h, embed}))), cfg_.stoch_vars,
                          cfg_.stoch_classes);
}

AfStep ActionFreeDynamics::step(const LatentStateAF& prev, const Var* embed, Rng& rng, SampleTape* tape) const {
  const Var h = advance(prev);
  AfStep out{prior(h), std::nullopt, {}};
  if (embed) out.posterior = posterior(h, *embed);
  const CategoricalDist& src = out.posterior ? *out.posterior : out.prior;
  out.next = LatentStateAF{h, sample_onehot_st(src, rng, tape)};
  return out;
}

void ActionFreeDynamics::collect(const std::string& prefix, nn::ParamList& out) const {
  input_.collect(prefix + ".input", out);
  cell_.collect(prefix + ".cell", out);
  prior_hidden_.collect(prefix + ".prior_hidden", out);
  prior_out_.collect(prefix + ".prior_out", out);
  post_hidden_.collect(prefix + ".post_hidden", out);
  post_out_.collect(prefix + ".post_out", out);
}

ActionConditionedDynamics::ActionConditionedDynamics(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      input_(cfg.stoch_width() + cfg.action_dim, cfg.hidden, cfg.dense_layers, rng),
      cell_(cfg.hidden, cfg.det_size, rng),
      prior_hidden_(cfg.det_size, cfg.hidden, cfg.dense_layers, rng),
      post_hidden_(cfg.det_size + cfg.stoch_width(), cfg.hidden, cfg.dense_layers, rng),
      prior_out_(cfg.hidden, cfg.stoch_width(), rng, nn::Init::kZero),
      post_out_(cfg.hidden, cfg.stoch_width(), rng, nn::Init::kZero) {
  validate(cfg);
}

Var ActionConditionedDynamics::advance(const LatentStateAC& prev, const Var& action) const {
  const index_t b = prev.h.dim(0);
  check_rows(prev.h, b, cfg_.det_size, "action-conditioned h");
  check_rows(action, b, cfg_.action_dim, "action");
  if (prev.s.numel() != b * cfg_.stoch_width()) throw_runtime("action-conditioned s has wrong size");
  return cell_(input_(concat_cols({flatten(prev.s), action})), prev.h);
}

CategoricalDist ActionConditionedDynamics::prior(const Var& h) const {
  return make_categorical(prior_out_(prior_hidden_(h)), cfg_.stoch_vars, cfg_.stoch_classes);
}

CategoricalDist ActionConditionedDynamics::posterior(const Var& h, const Var& z_sample) const {
  if (z_sample.numel() != h.dim(0) * cfg_.stoch_width()) throw_runtime("z sample has wrong size");
  return make_categorical(post_out_(post_hidden_(concat_cols({h, flatten(z_sample)}))), cfg_.stoch_vars,
                          cfg_.stoch_classes);
}

AcStep ActionConditionedDynamics::step(const LatentStateAC& prev, const Var& action, const Var* z_sample, Rng& rng,
                                       bool prior_only, SampleTape* tape) const {
  if (!prior_only && !z_sample) throw_runtime("ac_step needs z_sample unless prior_only");
  const Var h = advance(prev, action);
  AcStep out{prior(h), std::nullopt, {}};
  if (!prior_only) out.posterior = posterior(h, *z_sample);
  const CategoricalDist& src = out.posterior ? *out.posterior : out.prior;
  out.next = LatentStateAC{h, sample_onehot_st(src, rng, tape)};
  return out;
}

void ActionConditionedDynamics::collect(const std::string& prefix, nn::ParamList& out) const {
  input_.collect(prefix + ".input", out);
  cell_.collect(prefix + ".cell", out);
  prior_hidden_.collect(prefix + ".prior_hidden", out);
  prior_out_.collect(prefix + ".prior_out", out);
  post_hidden_.collect(prefix + ".post_hidden", out);
  post_out_.collect(prefix + ".post_out", out);
}

std::vector<PosteriorStep> rollout_posterior(const ActionFreeDynamics& af, const ActionConditionedDynamics* ac,
                                             const Var& embeds, const Var* actions, Rng& rng, SampleTape* tape) {
  if (embeds.value().rank() != 3) throw_runtime("rollout_posterior expects embeddings (B, T, E)");
  const index_t b = embeds.dim(0), t_len = embeds.dim(1);
  if (t_len < 1) throw_runtime("rollout_posterior needs T >= 1");
  if (ac && !actions) throw_runtime("action-conditioned rollout needs actions");
  if (actions && (actions->dim(0) != b || actions->dim(1) != t_len))
    throw_runtime("actions shape " + shape_str(actions->shape()) + " does not match embeddings");

  auto [af_state, ac_state] = init_state(b, af.config());
  std::vector<PosteriorStep> out;
  out.reserve(size_t(t_len));
  for (index_t t = 0; t < t_len; ++t) {
    const Var embed = select_axis1(embeds, t);
    PosteriorStep step{af.step(af_state, &embed, rng, tape), std::nullopt};
    af_state = step.af.next;
    if (ac) {
      const Var action = select_axis1(*actions, t);
      step.ac = ac->step(ac_state, action, &af_state.z, rng, false, tape);
      ac_state = step.ac->next;
    }
    out.push_back(std::move(step));
  }
  return out;
}

}  // namespace cwm::model
