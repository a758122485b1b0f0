#include "cwm/harness/training.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <sstream>

#include "cwm/core/error.hpp"
#include "cwm/vision/image.hpp"
#include "json.hpp"
#include <spdlog/spdlog.h>

namespace cwm::harness {

namespace {

// Context seed ranges: training, held-out validation, probe.
constexpr std::uint64_t kContextRange = std::uint64_t(1) << 40;
constexpr std::uint64_t kValidationContexts = 2 * kContextRange;
constexpr std::uint64_t kProbeContexts = 3 * kContextRange;

std::vector<std::string> split_paths(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

AdamConfig adam(double lr) {
  AdamConfig c;
  c.lr = static_cast<real>(lr);
  return c;
}

/// First `t` frames of each listed video as a segment batch.
data::SegmentBatch leading_segments(const data::VideoDataset& ds, size_t begin, size_t end, index_t t) {
  const index_t side = ds.videos[begin].frames[0].size, per = 3 * side * side;
  data::SegmentBatch b;
  b.obs = Tensor(Shape{index_t(end - begin), t, 3, side, side});
  auto dst = b.obs.values();
  for (size_t v = begin; v < end; ++v)
    for (index_t i = 0; i < t; ++i)
      vision::preprocess_into(ds.videos[v].frames[size_t(i)],
                              dst.subspan(size_t(((index_t(v - begin)) * t + i) * per), size_t(per)));
  return b;
}

}  // namespace

VideoSplits load_video_splits(const RunConfig& cfg) {
  VideoSplits s;
  const index_t side = cfg.model.vision.image_size;
  if (cfg.data.source == "synthetic") {
    data::SyntheticDatasetSpec tr;
    tr.videos = cfg.data.videos;
    tr.frames = cfg.data.frames;
    tr.side = side;
    tr.seed = cfg.data.seed;
    tr.context_pool = cfg.data.context_pool ? cfg.data.context_pool : kContextRange;
    data::SyntheticDatasetSpec va = tr;
    va.videos = cfg.data.validation_videos;
    va.seed = splitmix64(cfg.data.seed ^ 0x76616c);
    va.context_offset = kValidationContexts;
    va.context_pool = kContextRange;
    s.train.push_back(data::make_synthetic_dataset(tr));
    s.train.back().name = "synthetic";
    s.validation = data::make_synthetic_dataset(va);
    s.validation.name = "synthetic-heldout";
    return s;
  }
  for (const auto& root : split_paths(cfg.data.source))
    s.train.push_back(data::ingest_frame_dir(root, cfg.pretrain.segment_length, side));
  if (s.train.empty()) throw_data("data.source lists no directories");
  auto& first = s.train.front().videos;
  if (first.size() < 2) throw_data("need at least two videos to hold one out for validation");
  const size_t held = std::clamp<size_t>(first.size() / 10, 1, size_t(cfg.data.validation_videos));
  s.validation.name = s.train.front().name + "-heldout";
  s.validation.videos.assign(std::make_move_iterator(first.end() - std::ptrdiff_t(held)),
                             std::make_move_iterator(first.end()));
  first.resize(first.size() - held);
  return s;
}

// ---------------------------------------------------------------------------

Pretrainer::Pretrainer(const RunConfig& cfg, VideoSplits data, MetricsLog* metrics)
    : cfg_(cfg),
      data_(std::move(data)),
      metrics_(metrics),
      agent_(cfg.model, cfg.behavior, cfg.seed),
      opt_(agent_.world_model().theta(), adam(cfg.pretrain.lr)) {
  Rng master(cfg.seed);
  data_rng_ = master.fork(3);
  train_rng_ = master.fork(4);
  if (data_.train.empty()) throw_data("no training videos");
  for (const auto& v : data_.validation.videos)
    if (index_t(v.frames.size()) < cfg.pretrain.segment_length)
      throw_data("held-out video " + v.id + " is shorter than the segment length");
}

void Pretrainer::resume(const Checkpoint& ck) {
  if (ck.kind != "pretrain") throw_data("cannot resume pre-training from a " + ck.kind + " checkpoint");
  agent_.load_groups(ck, false);
  auto opt = ck.optimizers.find("pretrain_wm");
  if (opt == ck.optimizers.end()) throw_data("checkpoint has no pre-training optimizer state");
  import_optimizer(opt->second, opt_, "pretrain_wm");
  data_rng_.load_state(ck.rng.at("data"));
  train_rng_.load_state(ck.rng.at("train"));
  iteration_ = ck.counters.at("iteration");
}

double Pretrainer::validation_nll() {
  NoGradGuard ng;
  auto& wm = agent_.world_model();
  const index_t t = cfg_.pretrain.segment_length;
  const size_t n = data_.validation.videos.size(), chunk = size_t(cfg_.pretrain.batch);
  Rng rng(0x76616c6964ULL);
  objectives::LossOptions opt;
  opt.training = false;
  double total = 0;
  for (size_t b = 0; b < n; b += chunk) {
    const size_t e = std::min(n, b + chunk);
    auto batch = leading_segments(data_.validation, b, e, t);
    total += objectives::pretrain_loss(wm, batch, cfg_.pretrain_weights, rng, opt).image_nll * double(e - b);
  }
  return total / double(n);
}

void Pretrainer::run(std::int64_t target, const std::filesystem::path& checkpoint_path) {
  const auto& p = cfg_.pretrain;
  if (iteration_ == 0 && metrics_) metrics_->log(0, "pretrain/validation_nll", validation_nll());
  std::vector<const data::VideoDataset*> sets;
  for (const auto& d : data_.train) sets.push_back(&d);
  objectives::LossOptions opt;
  opt.cutout = vision::CutoutParams{p.cutout, p.cutout_min, p.cutout_max, 0.0};
  auto& wm = agent_.world_model();
  while (iteration_ < target) {
    auto batch = data::sample_video_segments(sets, p.batch, p.segment_length, data_rng_);
    opt_.zero_grad();
    auto rep = objectives::pretrain_loss(wm, batch, cfg_.pretrain_weights, train_rng_, opt);
    backward(rep.total);
    const double gnorm = opt_.step();
    ++iteration_;
    if (metrics_ && iteration_ % p.log_every == 0) {
      metrics_->log(iteration_, "pretrain/loss", rep.total_value);
      metrics_->log(iteration_, "pretrain/image_nll", rep.image_nll);
      metrics_->log(iteration_, "pretrain/kl_af", rep.kl_af);
      metrics_->log(iteration_, "pretrain/grad_norm", gnorm);
    }
    if (metrics_ && (iteration_ % p.validate_every == 0 || iteration_ == target)) {
      const double v = validation_nll();
      metrics_->log(iteration_, "pretrain/validation_nll", v);
      spdlog::info("pretrain iteration {} validation image NLL {:.4f}", iteration_, v);
    }
    if (!checkpoint_path.empty() && (iteration_ % p.checkpoint_every == 0 || iteration_ == target))
      write_checkpoint(checkpoint(), checkpoint_path);
  }
}

Checkpoint Pretrainer::checkpoint() {
  Checkpoint ck;
  ck.kind = "pretrain";
  ck.config = cfg_.manifest();
  ck.counters["iteration"] = iteration_;
  ck.rng["data"] = data_rng_.save_state();
  ck.rng["train"] = train_rng_.save_state();
  agent_.save_groups(ck);
  ck.optimizers["pretrain_wm"] = export_optimizer(opt_);
  return ck;
}

// ---------------------------------------------------------------------------

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["episodes"] = nlohmann::ordered_json::array();
  for (const auto& e : episodes) j["episodes"].push_back({{"return", e.ret}, {"success", e.success}});
  j["return_iqm"] = ret.iqm;
  j["return_ci"] = {ret.lo, ret.hi};
  j["success_rate"] = success_rate;
  return j.dump(2) + "\n";
}

LatentFilter::LatentFilter(model::WorldModel& wm) : wm_(wm) { reset(); }

void LatentFilter::reset() { std::tie(af_, ac_) = model::init_state(1, wm_.config().model); }

void LatentFilter::observe(const vision::Frame& frame, std::span<const double> prev_action, Rng& rng) {
  NoGradGuard ng;
  const index_t a = wm_.config().model.action_dim;
  if (index_t(prev_action.size()) != a) throw_runtime("action width does not match the model");
  Tensor act(Shape{1, a});
  for (index_t i = 0; i < a; ++i) act[i] = static_cast<real>(prev_action[size_t(i)]);
  const Var embed = wm_.encoder.forward(Var(vision::preprocess(frame)), false).embed;
  af_ = wm_.af.step(af_, &embed, rng).next;
  ac_ = wm_.ac.step(ac_, Var(act), &af_.z, rng, false).next;
}

Var LatentFilter::actor_features() const { return model::features(ac_); }

Tensor LatentFilter::af_features() const { return model::features(af_).value(); }

Finetuner::Finetuner(const RunConfig& cfg, MetricsLog* metrics)
    : cfg_(cfg),
      metrics_(metrics),
      agent_(cfg.model, cfg.behavior, cfg.seed),
      env_(cfg.env, splitmix64(cfg.seed ^ 0x656e76)),
      replay_(size_t(cfg.finetune.replay_capacity)),
      filter_(agent_.world_model()) {
  if (cfg.model.model.action_dim != cfg.env.action_dim)
    throw_config("model.action_dim must be " + std::to_string(cfg.env.action_dim) + " for the reach environment");
  ParamGroups g = agent_.groups();
  nn::ParamList wm_params = g.theta;
  wm_params.append(g.phi);
  if (cfg.finetune.dual_reward) wm_params.append(g.varphi);
  wm_opt_ = Adam(wm_params, adam(cfg.finetune.lr));
  actor_opt_ = Adam(g.psi, adam(cfg.behavior.actor_lr));
  critic_opt_ = Adam(g.xi, adam(cfg.behavior.critic_lr));
  Rng master(cfg.seed);
  train_rng_ = master.fork(4);
  act_rng_ = master.fork(5);
  Rng proj = master.fork(6);
  memory_ = behavior::IntrinsicMemory(cfg.model.model.feature_width(), cfg.intrinsic.proj_dim,
                                      size_t(cfg.intrinsic.capacity), cfg.intrinsic.k, proj);
}

void Finetuner::load(const Checkpoint& ck, bool theta_only) {
  agent_.load_groups(ck, theta_only);
  if (theta_only || ck.kind != "finetune") return;
  for (auto [name, opt] : {std::pair<const char*, Adam*>{"finetune_wm", &wm_opt_}, {"actor", &actor_opt_},
                           {"critic", &critic_opt_}}) {
    auto it = ck.optimizers.find(name);
    if (it == ck.optimizers.end()) throw_data(std::string("checkpoint has no optimizer state ") + name);
    import_optimizer(it->second, *opt, name);
  }
}

void Finetuner::collect_step() {
  const index_t a = cfg_.env.action_dim;
  if (env_.done()) {
    const vision::Frame obs = env_.reset();
    filter_.reset();
    prev_action_.assign(size_t(a), 0.0);
    filter_.observe(obs, prev_action_, act_rng_);
    const Tensor f = filter_.af_features();
    behavior::intrinsic_bonus(f.values(), memory_);
    episode_ = data::EpisodeRecord{};
    episode_.action_dim = a;
    episode_.observations.push_back(obs);
    episode_return_ = 0;
    episode_success_ = false;
  }
  std::vector<double> action(static_cast<size_t>(a));
  if (env_step_ < cfg_.finetune.prefill) {
    for (auto& v : action) v = act_rng_.uniform(-1, 1);
  } else {
    NoGradGuard ng;
    const Tensor out = agent_.actor(filter_.actor_features(), act_rng_).action.value();
    for (index_t i = 0; i < a; ++i) action[size_t(i)] = out[i];
  }
  data::StepResult res = env_.step(action);
  filter_.observe(res.observation, action, act_rng_);
  const Tensor f = filter_.af_features();
  const double bonus = behavior::intrinsic_bonus(f.values(), memory_);
  episode_.observations.push_back(res.observation);
  for (double v : action) episode_.actions.push_back(float(v));
  episode_.rewards.push_back(float(res.reward));
  episode_.intrinsic.push_back(float(bonus));
  episode_return_ += res.reward;
  episode_success_ = episode_success_ || res.success;
  prev_action_ = action;
  ++env_step_;
  if (res.done) {
    replay_.add(std::move(episode_));
    ++episodes_done_;
    if (metrics_) {
      metrics_->log(env_step_, "finetune/episode_return", episode_return_);
      metrics_->log(env_step_, "finetune/episode_success", episode_success_ ? 1.0 : 0.0);
    }
  }
}

objectives::FinetuneResult Finetuner::world_model_update() {
  auto& wm = agent_.world_model();
  const auto& f = cfg_.finetune;
  auto batch = replay_.sample(f.batch, f.segment_length, train_rng_);
  objectives::LossWeights w = cfg_.finetune_weights;
  if (!f.dual_reward) w.beta_r = 0;
  wm_opt_.zero_grad();
  auto fr = objectives::finetune_loss(wm, batch, w, train_rng_);
  backward(fr.report.total);
  wm_opt_.step();
  return fr;
}

BehaviorStats Finetuner::behavior_update(const model::LatentStateAC& starts, bool update_actor, bool update_critic) {
  auto& wm = agent_.world_model();
  behavior::ImagineModels m{&wm.ac, &wm.reward_behavioral, &agent_.actor, &agent_.target_critic};
  auto traj = behavior::imagine(starts, m, cfg_.behavior, train_rng_);
  Var closs = behavior::critic_loss(agent_.critic, traj);
  Var aloss = behavior::actor_loss(traj, cfg_.behavior);
  BehaviorStats st;
  st.actor_loss = aloss.value()[0];
  st.critic_loss = closs.value()[0];
  for (real v : traj.returns[0].value().values()) st.imagined_return += v;
  st.imagined_return /= double(traj.returns[0].numel());

  if (update_actor) {
    actor_opt_.zero_grad();
    backward(aloss);
    actor_opt_.step();
  }
  if (update_critic) {
    critic_opt_.zero_grad();
    backward(closs);
    critic_opt_.step();
  }
  // The actor loss also reaches world-model and target-critic parameters.
  wm_opt_.zero_grad();
  nn::ParamList target;
  agent_.target_critic.collect("", target);
  target.zero_grad();
  return st;
}

void Finetuner::train_step() {
  auto fr = world_model_update();
  const BehaviorStats st = behavior_update(fr.starts);
  ++updates_;
  if (updates_ % cfg_.behavior.target_update_interval == 0) agent_.target_critic.copy_from(agent_.critic);
  if (metrics_ && updates_ % cfg_.finetune.log_every == 0) {
    const auto& r = fr.report;
    metrics_->log(env_step_, "finetune/wm_loss", r.total_value);
    metrics_->log(env_step_, "finetune/image_nll", r.image_nll);
    metrics_->log(env_step_, "finetune/behavioral_reward_nll", r.behavioral_reward_nll);
    metrics_->log(env_step_, "finetune/representative_reward_nll", r.representative_reward_nll);
    metrics_->log(env_step_, "finetune/kl_af", r.kl_af);
    metrics_->log(env_step_, "finetune/kl_ac", r.kl_ac);
    metrics_->log(env_step_, "finetune/actor_loss", st.actor_loss);
    metrics_->log(env_step_, "finetune/critic_loss", st.critic_loss);
    metrics_->log(env_step_, "finetune/imagined_return", st.imagined_return);
  }
}

void Finetuner::run() {
  const auto& f = cfg_.finetune;
  std::int64_t evals = 0;
  while (env_step_ < f.env_steps) {
    collect_step();
    if (env_step_ > f.prefill && replay_.episodes() > 0 && env_step_ % f.train_every == 0) train_step();
    if (f.eval_every > 0 && env_step_ % f.eval_every == 0) {
      EvalReport rep = evaluate(cfg_.eval.episodes, splitmix64(cfg_.seed ^ 0x6576616c) + std::uint64_t(evals++));
      eval_history_.emplace_back(env_step_, rep.ret.iqm);
      if (metrics_) {
        metrics_->log(env_step_, "eval/return_iqm", rep.ret.iqm);
        metrics_->log(env_step_, "eval/return_lo", rep.ret.lo);
        metrics_->log(env_step_, "eval/return_hi", rep.ret.hi);
        metrics_->log(env_step_, "eval/success_rate", rep.success_rate);
      }
      spdlog::info("finetune step {} eval return IQM {:.2f}", env_step_, rep.ret.iqm);
    }
  }
}

EvalReport Finetuner::evaluate(int episodes, std::uint64_t seed, bool random_policy) {
  data::ReachEnv env(cfg_.env, seed);
  LatentFilter filter(agent_.world_model());
  Rng rng(splitmix64(seed));
  const index_t a = cfg_.env.action_dim;
  EvalReport rep;
  for (int e = 0; e < episodes; ++e) {
    const vision::Frame first = env.reset();
    filter.reset();
    std::vector<double> action(static_cast<size_t>(a), 0.0);
    filter.observe(first, action, rng);
    EpisodeStats st;
    while (!env.done()) {
      if (random_policy) {
        for (auto& v : action) v = rng.uniform(-1, 1);
      } else {
        NoGradGuard ng;
        const Tensor out = agent_.actor(filter.actor_features(), rng, true).action.value();
        for (index_t i = 0; i < a; ++i) action[size_t(i)] = out[i];
      }
      data::StepResult r = env.step(action);
      if (!random_policy) filter.observe(r.observation, action, rng);
      st.ret += r.reward;
      st.success = st.success || r.success;
    }
    rep.episodes.push_back(st);
  }
  std::vector<double> returns;
  int successes = 0;
  for (const auto& e : rep.episodes) {
    returns.push_back(e.ret);
    successes += e.success;
  }
  Rng boot(splitmix64(seed ^ 0x626f6f74));
  rep.ret = iqm_ci(returns, cfg_.eval.bootstrap, boot);
  rep.success_rate = double(successes) / double(episodes);
  return rep;
}

Checkpoint Finetuner::checkpoint() {
  Checkpoint ck;
  ck.kind = "finetune";
  ck.config = cfg_.manifest();
  ck.counters["env_steps"] = env_step_;
  ck.counters["updates"] = updates_;
  ck.counters["episodes"] = episodes_done_;
  ck.rng["act"] = act_rng_.save_state();
  ck.rng["train"] = train_rng_.save_state();
  agent_.save_groups(ck);
  ck.optimizers["finetune_wm"] = export_optimizer(wm_opt_);
  ck.optimizers["actor"] = export_optimizer(actor_opt_);
  ck.optimizers["critic"] = export_optimizer(critic_opt_);
  return ck;
}

// ---------------------------------------------------------------------------

int LinearProbe::predict(const std::vector<double>& x) const {
  double s = bias;
  for (size_t i = 0; i < weights.size(); ++i) s += weights[i] * x[i];
  return s >= 0 ? 1 : -1;
}

LinearProbe fit_linear_probe(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
  if (x.empty() || x.size() != y.size()) throw_data("probe needs one label per feature row");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v != 1 && v != -1) throw_data("probe labels must be +1 or -1");
    (v > 0 ? pos : neg) = true;
  }
  if (!pos || !neg) throw_data("probe training split needs both classes");
  const Eigen::Index n = Eigen::Index(x.size()), d = Eigen::Index(x[0].size());
  Eigen::MatrixXd a(n, d + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (Eigen::Index(x[size_t(i)].size()) != d) throw_data("probe feature rows differ in width");
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = x[size_t(i)][size_t(j)];
    a(i, d) = 1.0;
    b(i) = y[size_t(i)];
  }
  const Eigen::VectorXd w = a.completeOrthogonalDecomposition().solve(b);
  LinearProbe p;
  p.weights.assign(w.data(), w.data() + d);
  p.bias = w(d);
  return p;
}

double probe_accuracy(const LinearProbe& p, const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
  if (x.empty()) throw_data("probe accuracy of no samples");
  int hit = 0;
  for (size_t i = 0; i < x.size(); ++i) hit += p.predict(x[i]) == y[i];
  return double(hit) / double(x.size());
}

std::vector<std::vector<double>> averaged_states(model::WorldModel& wm, const data::VideoDataset& videos,
                                                 index_t frames, std::uint64_t seed) {
  NoGradGuard ng;
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  for (const auto& v : videos.videos) {
    const index_t t = std::min<index_t>(frames, index_t(v.frames.size()));
    const Tensor imgs = vision::preprocess_batch(std::span(v.frames.data(), size_t(t)));
    const Var embed = wm.encoder.forward(Var(imgs), false).embed;
    const Var seq = reshape(embed, {1, t, embed.dim(1)});
    auto steps = model::rollout_posterior(wm.af, nullptr, seq, nullptr, rng);
    std::vector<double> mean;
    for (const auto& s : steps) {
      const Tensor f = model::features(s.af.next).value();
      if (mean.empty()) mean.assign(size_t(f.numel()), 0.0);
      for (index_t i = 0; i < f.numel(); ++i) mean[size_t(i)] += f[i] / double(t);
    }
    out.push_back(std::move(mean));
  }
  return out;
}

data::VideoDataset probe_videos(const RunConfig& cfg) {
  data::SyntheticDatasetSpec spec;
  spec.videos = cfg.probe.videos;
  spec.frames = cfg.probe.frames;
  spec.side = cfg.model.vision.image_size;
  spec.motions = {data::Motion::kLeft, data::Motion::kRight};
  spec.seed = splitmix64(cfg.data.seed ^ 0x70726f6265);
  spec.context_offset = kProbeContexts;
  spec.context_pool = kContextRange;
  return data::make_synthetic_dataset(spec);
}

ProbeResult run_probe(model::WorldModel& wm, const RunConfig& cfg, const data::VideoDataset& videos) {
  std::vector<int> labels;
  for (const auto& v : videos.videos) {
    if (v.label == int(data::Motion::kRight)) labels.push_back(1);
    else if (v.label == int(data::Motion::kLeft)) labels.push_back(-1);
    else throw_data("probe videos must be labeled left or right");
  }
  const auto feats = averaged_states(wm, videos, cfg.probe.frames, splitmix64(cfg.seed ^ 0x7374));
  const size_t n_train = size_t(double(feats.size()) * cfg.probe.train_fraction);
  if (n_train < 2 || n_train >= feats.size()) throw_data("probe split leaves an empty part");
  std::vector<std::vector<double>> xtr(feats.begin(), feats.begin() + std::ptrdiff_t(n_train)),
      xte(feats.begin() + std::ptrdiff_t(n_train), feats.end());
  std::vector<int> ytr(labels.begin(), labels.begin() + std::ptrdiff_t(n_train)),
      yte(labels.begin() + std::ptrdiff_t(n_train), labels.end());
  const LinearProbe p = fit_linear_probe(xtr, ytr);
  return ProbeResult{probe_accuracy(p, xte, yte), int(xtr.size()), int(xte.size())};
}

}  // namespace cwm::harness
