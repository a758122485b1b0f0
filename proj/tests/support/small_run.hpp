#pragma once

// A run configuration small enough for unit tests and acceptance checks.

#include <filesystem>
#include <random>
#include <string>

#include "cwm/harness/config.hpp"

namespace cwm::testing {

inline harness::RunConfig small_run_config(const std::string& out = "") {
  harness::RunConfig c;
  harness::apply_entries(c, {
                                {"model.image_size", "16"},
                                {"model.base_channels", "4"},
                                {"model.det_size", "16"},
                                {"model.hidden", "16"},
                                {"model.stoch_vars", "4"},
                                {"model.stoch_classes", "4"},
                                {"model.head_hidden", "16"},
                                {"model.head_layers", "2"},
                                {"behavior.hidden", "16"},
                                {"behavior.layers", "2"},
                                {"behavior.horizon", "3"},
                                {"behavior.target_update_interval", "4"},
                                {"pretrain.segment_length", "4"},
                                {"pretrain.batch", "3"},
                                {"pretrain.iterations", "10"},
                                {"pretrain.log_every", "1"},
                                {"pretrain.validate_every", "5"},
                                {"pretrain.checkpoint_every", "5"},
                                {"data.videos", "8"},
                                {"data.frames", "6"},
                                {"data.validation_videos", "4"},
                                {"env.episode_length", "20"},
                                {"finetune.segment_length", "6"},
                                {"finetune.batch", "3"},
                                {"finetune.prefill", "40"},
                                {"finetune.env_steps", "80"},
                                {"finetune.log_every", "1"},
                                {"finetune.eval_every", "40"},
                                {"eval.episodes", "2"},
                                {"eval.bootstrap", "50"},
                                {"intrinsic.capacity", "100"},
                                {"intrinsic.proj_dim", "8"},
                                {"intrinsic.k", "3"},
                                {"probe.videos", "16"},
                                {"probe.frames", "6"},
                            });
  c.out = out;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cwm_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace cwm::testing
