#pragma once

#include <optional>

#include "cwm/data/dataset.hpp"
#include "cwm/data/env.hpp"
#include "cwm/data/replay.hpp"
#include "cwm/harness/agent.hpp"
#include "cwm/harness/config.hpp"
#include "cwm/harness/metrics.hpp"
#include "cwm/harness/stats.hpp"

namespace cwm::harness {

/// Training split and held-out split for video pre-training.
struct VideoSplits {
  std::vector<data::VideoDataset> train;  ///< sampled with a uniform dataset choice
  data::VideoDataset validation;
};

/// Synthetic videos (training contexts and disjoint novel contexts for the
/// held-out split) or ingested frame folders, per `cfg.data`.
VideoSplits load_video_splits(const RunConfig& cfg);

/// Action-free pre-training on videos.
class Pretrainer {
 public:
  Pretrainer(const RunConfig& cfg, VideoSplits data, MetricsLog* metrics);

  /// Restores parameters, optimizer, random streams and the iteration count.
  void resume(const Checkpoint& ck);
  /// Trains until `iteration() == target`, logging, validating and
  /// checkpointing (to `checkpoint_path` when non-empty) on schedule.
  void run(std::int64_t target, const std::filesystem::path& checkpoint_path = {});
  /// Mean per-step image NLL on the first segment of every held-out video,
  /// evaluated with inference-mode normalization and a fixed stream.
  double validation_nll();
  Checkpoint checkpoint();

  Agent& agent() { return agent_; }
  std::int64_t iteration() const { return iteration_; }

 private:
  const RunConfig& cfg_;
  VideoSplits data_;
  MetricsLog* metrics_;
  Agent agent_;
  Adam opt_;
  Rng data_rng_, train_rng_;
  std::int64_t iteration_ = 0;
};

struct EpisodeStats {
  double ret = 0;
  bool success = false;
};

struct EvalReport {
  std::vector<EpisodeStats> episodes;
  IqmInterval ret;
  double success_rate = 0;
  std::string to_json() const;
};

/// Filters observations through both model levels to give actor inputs.
class LatentFilter {
 public:
  LatentFilter(model::WorldModel& wm);
  void reset();
  /// Consumes the observation reached by `prev_action` (zeros after reset).
  void observe(const vision::Frame& frame, std::span<const double> prev_action, Rng& rng);
  Var actor_features() const;
  /// Action-free posterior features of the latest observation.
  Tensor af_features() const;

 private:
  model::WorldModel& wm_;
  model::LatentStateAF af_;
  model::LatentStateAC ac_;
};

struct BehaviorStats {
  double actor_loss = 0;
  double critic_loss = 0;
  double imagined_return = 0;
};

/// Interleaved collection and training on the reach environment.
class Finetuner {
 public:
  Finetuner(const RunConfig& cfg, MetricsLog* metrics);

  /// Parameters from `ck`: theta alone, or every group (plus optimizer state
  /// when the checkpoint came from fine-tuning).
  void load(const Checkpoint& ck, bool theta_only);
  /// Runs `cfg.finetune.env_steps` environment steps.
  void run();
  /// One world-model update followed by one behavior update.
  void train_step();
  /// Fine-tuning objective on a replay batch and one optimizer step.
  objectives::FinetuneResult world_model_update();
  /// Imagination from `starts`, then the selected actor and critic steps.
  BehaviorStats behavior_update(const model::LatentStateAC& starts, bool update_actor = true,
                                bool update_critic = true);
  /// Deterministic-actor episodes, or uniformly random actions.
  EvalReport evaluate(int episodes, std::uint64_t seed, bool random_policy = false);
  Checkpoint checkpoint();

  Agent& agent() { return agent_; }
  data::ReplayBuffer& replay() { return replay_; }
  std::int64_t env_steps() const { return env_step_; }
  std::int64_t updates() const { return updates_; }
  /// (environment step, return IQM) of every periodic evaluation.
  const std::vector<std::pair<std::int64_t, double>>& eval_history() const { return eval_history_; }

 private:
  void collect_step();

  const RunConfig& cfg_;
  MetricsLog* metrics_;
  Agent agent_;
  Adam wm_opt_, actor_opt_, critic_opt_;
  data::ReachEnv env_;
  data::ReplayBuffer replay_;
  behavior::IntrinsicMemory memory_;
  LatentFilter filter_;
  Rng act_rng_, train_rng_;
  data::EpisodeRecord episode_;
  std::vector<double> prev_action_;
  double episode_return_ = 0;
  bool episode_success_ = false;
  std::int64_t env_step_ = 0, updates_ = 0, episodes_done_ = 0;
  std::vector<std::pair<std::int64_t, double>> eval_history_;
};

/// Least-squares linear classifier on +-1 targets with a bias term.
struct LinearProbe {
  std::vector<double> weights;
  double bias = 0;
  int predict(const std::vector<double>& x) const;
};

LinearProbe fit_linear_probe(const std::vector<std::vector<double>>& x, const std::vector<int>& y);
double probe_accuracy(const LinearProbe& p, const std::vector<std::vector<double>>& x, const std::vector<int>& y);

/// Action-free posterior features (h and z) averaged over each video's
/// frames, with a fixed sampling stream.
std::vector<std::vector<double>> averaged_states(model::WorldModel& wm, const data::VideoDataset& videos,
                                                 index_t frames, std::uint64_t seed);

struct ProbeResult {
  double accuracy = 0;
  int train = 0;
  int test = 0;
};

/// Left/right synthetic videos with contexts unseen in training, split into
/// train and held-out parts.
data::VideoDataset probe_videos(const RunConfig& cfg);
ProbeResult run_probe(model::WorldModel& wm, const RunConfig& cfg, const data::VideoDataset& videos);

}  // namespace cwm::harness
