#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cwm/behavior/behavior.hpp"
#include "cwm/data/env.hpp"
#include "cwm/model/world_model.hpp"
#include "cwm/objectives/losses.hpp"

namespace cwm::harness {

enum class Preset { kDesk, kPaper };

struct PretrainSettings {
  int segment_length = 25;
  int batch = 16;
  int iterations = 20000;
  double lr = 3e-4;
  int log_every = 50;
  int validate_every = 1000;
  int checkpoint_every = 5000;
  bool cutout = false;
  double cutout_min = 0.2;
  double cutout_max = 0.5;
};

struct FinetuneSettings {
  int segment_length = 50;
  int batch = 16;
  int env_steps = 30000;
  int prefill = 5000;
  int train_every = 5;
  double lr = 3e-4;
  int log_every = 20;
  int eval_every = 5000;
  bool dual_reward = true;
  std::int64_t replay_capacity = 1000000;
};

struct DataSettings {
  std::string source = "synthetic";  ///< "synthetic" or comma-separated frame-folder roots
  int videos = 256;
  int frames = 25;
  int validation_videos = 32;
  std::uint64_t seed = 1;
  std::uint64_t context_pool = 0;  ///< distinct training contexts; 0 gives every video its own
};

struct IntrinsicSettings {
  int k = 12;
  int proj_dim = 32;
  int capacity = 10000;
};

struct EvalSettings {
  int episodes = 10;
  int bootstrap = 1000;
};

struct ProbeSettings {
  int videos = 128;
  int frames = 25;
  double train_fraction = 0.5;
  std::string baseline_checkpoint;
};

/// Everything a command needs. Loaded from flat `key = value` text.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "run";
  std::string checkpoint;
  bool load_theta_only = false;

  Preset preset = Preset::kDesk;
  model::WorldModelConfig model = model::WorldModelConfig::desk();
  objectives::LossWeights pretrain_weights = objectives::LossWeights::pretrain();
  objectives::LossWeights finetune_weights = objectives::LossWeights::finetune();
  behavior::BehaviorConfig behavior;
  data::ReachConfig env;
  PretrainSettings pretrain;
  FinetuneSettings finetune;
  DataSettings data;
  IntrinsicSettings intrinsic;
  EvalSettings eval;
  ProbeSettings probe;

  /// Sets one key from text. Unknown keys and malformed values are
  /// configuration errors. `model.preset` resets every model.* key.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  /// Sorted `key = value` lines for every key.
  std::string manifest() const;
};

/// Parses `key = value` lines. `#` starts a comment; `include = path` pulls
/// in another file (relative to the including file) at that point.
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::filesystem::path& path);

/// Applies entries in order; `model.preset` entries are applied first.
void apply_entries(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& entries);

/// Range checks; throws a configuration error naming the offending key.
void validate(const RunConfig& cfg);

}  // namespace cwm::harness
