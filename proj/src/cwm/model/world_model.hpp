#pragma once

#include "cwm/model/rssm.hpp"
#include "cwm/vision/networks.hpp"

namespace cwm::model {

struct WorldModelConfig {
  ModelConfig model;
  vision::VisionConfig vision;
  index_t head_hidden = 400;  ///< reward predictor width
  int head_layers = 4;        ///< reward predictor hidden layers

  static WorldModelConfig desk();
  static WorldModelConfig paper();
};

/// Checks the parts and that the dynamics embedding width equals the encoder's.
void validate(const WorldModelConfig& cfg);

/// Image encoder, context encoder, contextualized decoder, both dynamics
/// levels and the two reward predictors. Holds batch-norm buffers by address,
/// so it is neither copied nor moved.
class WorldModel {
 public:
  WorldModel(const WorldModelConfig& cfg, Rng& init_rng);
  WorldModel(const WorldModel&) = delete;
  WorldModel& operator=(const WorldModel&) = delete;

  const WorldModelConfig& config() const { return cfg_; }
  bool contextual() const { return cfg_.vision.conditioning != vision::Conditioning::kNone; }

  /// Action-free dynamics, image encoder, context encoder and decoder.
  nn::ParamList theta();
  /// Action-conditioned dynamics and behavioral reward predictor.
  nn::ParamList phi();
  /// Representative reward predictor.
  nn::ParamList varphi();

  vision::ResNetEncoder encoder;
  vision::ContextEncoder context_encoder;  ///< unused without conditioning
  vision::Decoder decoder;
  ActionFreeDynamics af;
  ActionConditionedDynamics ac;
  nn::Mlp reward_behavioral;
  nn::Mlp reward_representative;

 private:
  WorldModelConfig cfg_;
};

}  // namespace cwm::model
