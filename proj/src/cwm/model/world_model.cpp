#include "cwm/model/world_model.hpp"

#include "cwm/core/error.hpp"

namespace cwm::model {

WorldModelConfig WorldModelConfig::desk() {
  WorldModelConfig c;
  c.model = ModelConfig::desk();
  c.vision.base_channels = 12;
  c.model.embed_dim = c.vision.embed_dim();
  return c;
}

WorldModelConfig WorldModelConfig::paper() {
  WorldModelConfig c;
  c.model = ModelConfig::paper();
  c.vision.base_channels = 48;
  c.model.embed_dim = c.vision.embed_dim();
  return c;
}

void validate(const WorldModelConfig& cfg) {
  validate(cfg.model);
  vision::validate(cfg.vision);
  if (cfg.model.embed_dim != cfg.vision.embed_dim())
    throw_config("model.embed_dim is " + std::to_string(cfg.model.embed_dim) + " but the encoder produces " +
                 std::to_string(cfg.vision.embed_dim()));
  if (cfg.head_hidden < 1 || cfg.head_layers < 1) throw_config("reward head width and depth must be >= 1");
}

namespace {
// Every component draws from its own stream so that, for example, the θ
// initialization does not depend on whether the context encoder exists.
enum : std::uint64_t { kEncoder = 1, kContext, kDecoder, kAf, kAc, kRewardB, kRewardR };

const WorldModelConfig& checked(const WorldModelConfig& cfg) {
  validate(cfg);
  return cfg;
}
}  // namespace

WorldModel::WorldModel(const WorldModelConfig& config, Rng& init_rng) : cfg_(checked(config)) {
  Rng base = init_rng.fork(0);
  auto stream = [&](std::uint64_t tag) {
    Rng r(splitmix64(base.next_u64() ^ tag));
    return r;
  };
  Rng r_enc = stream(kEncoder), r_ctx = stream(kContext), r_dec = stream(kDecoder), r_af = stream(kAf),
      r_ac = stream(kAc), r_rb = stream(kRewardB), r_rr = stream(kRewardR);
  const index_t fw = cfg_.model.feature_width();
  encoder = vision::ResNetEncoder(cfg_.vision, r_enc);
  if (contextual()) context_encoder = vision::ContextEncoder(cfg_.vision, r_ctx);
  decoder = vision::Decoder(cfg_.vision, fw, r_dec);
  af = ActionFreeDynamics(cfg_.model, r_af);
  ac = ActionConditionedDynamics(cfg_.model, r_ac);
  reward_behavioral = nn::Mlp(fw, cfg_.head_hidden, cfg_.head_layers, 1, r_rb, true);
  reward_representative = nn::Mlp(fw, cfg_.head_hidden, cfg_.head_layers, 1, r_rr, true);
}

nn::ParamList WorldModel::theta() {
  nn::ParamList out;
  af.collect("theta.af", out);
  encoder.collect("theta.encoder", out);
  if (contextual()) context_encoder.collect("theta.context_encoder", out);
  decoder.collect("theta.decoder", out);
  return out;
}

nn::ParamList WorldModel::phi() {
  nn::ParamList out;
  ac.collect("phi.ac", out);
  reward_behavioral.collect("phi.reward", out);
  return out;
}

nn::ParamList WorldModel::varphi() {
  nn::ParamList out;
  reward_representative.collect("varphi.reward", out);
  return out;
}

}  // namespace cwm::model
