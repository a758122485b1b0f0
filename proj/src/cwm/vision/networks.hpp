#pragma once

#include <array>
#include <vector>

#include "cwm/core/nn.hpp"

namespace cwm::vision {

enum class Conditioning {
  kCrossAttention,  ///< multi-scale cross-attention to context features
  kConcat,          ///< channel concatenation + 1x1 projection at the same scales
  kNone,            ///< vanilla decoder, no context pathway
};

struct VisionConfig {
  index_t image_size = 64;
  index_t base_channels = 12;  ///< stage widths are c, 2c, 4c (48, 96, 192 at full width)
  int heads = 4;
  Conditioning conditioning = Conditioning::kCrossAttention;

  index_t stage_channels(int stage) const { return base_channels << stage; }
  /// Side length of the feature map entering encoder stage `stage` (0-based).
  index_t stage_size(int stage) const;
  index_t final_size() const;
  index_t embed_dim() const { return stage_channels(2) * final_size() * final_size(); }
};

void validate(const VisionConfig& cfg);

/// Two 3x3 conv/BN layers with an identity or 1x1 projection shortcut.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(index_t in, index_t out, Rng& rng);
  Var operator()(const Var& x, bool training);
  void collect(const std::string& prefix, nn::ParamList& out);

 private:
  nn::Conv2d conv1_, conv2_, proj_;
  nn::BatchNorm bn1_, bn2_, proj_bn_;
  bool has_proj_ = false;
};

struct EncoderOutput {
  Var embed;                    ///< (n, embed_dim)
  std::array<Var, 3> stage_pre;  ///< stage outputs before pooling
  std::array<Var, 3> stage_post;  ///< stage outputs after pooling
};

/// conv_in (3x3, stride 2) then three residual stages of two blocks each with
/// 2x2 average pooling after every stage. Pooling is skipped once the map is
/// 1x1, which only happens for inputs smaller than 16 pixels.
class ResNetEncoder {
 public:
  ResNetEncoder() = default;
  ResNetEncoder(const VisionConfig& cfg, Rng& rng);
  EncoderOutput forward(const Var& images, bool training);
  void collect(const std::string& prefix, nn::ParamList& out);

 private:
  VisionConfig cfg_;
  nn::Conv2d conv_in_;
  nn::BatchNorm bn_in_;
  std::array<std::array<ResidualBlock, 2>, 3> stages_;
};

/// Pre-pool maps of context-encoder stages 2 and 3.
struct ContextFeatures {
  Var f16;  ///< (n, 2c, S/4, S/4)
  Var f8;   ///< (n, 4c, S/8, S/8)
};

/// Context encoder: same architecture as the image encoder, separate weights.
class ContextEncoder {
 public:
  ContextEncoder() = default;
  ContextEncoder(const VisionConfig& cfg, Rng& rng) : net_(cfg, rng) {}
  ContextFeatures forward(const Var& images, bool training);
  void collect(const std::string& prefix, nn::ParamList& out) { net_.collect(prefix, out); }

 private:
  ResNetEncoder net_;
};

/// X <- ReLU(X + BatchNorm(Reshape(Attention(Q W_q, K W_k, V W_v) W_o)))
/// with Q from X and K/V from a random quarter of Z's tokens. Position tables
/// for queries and for keys/values start at zero; W_o starts at zero so the
/// block is ReLU(X) at initialization.
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(index_t channels, index_t side, int heads, Rng& rng);

  static index_t kept_tokens(index_t hw) { return hw / 4; }

  Var operator()(const Var& x, const Var& z, Rng& rng, bool training);
  /// Same block with explicit kept key/value token indices, n * kept entries.
  Var forward_with_tokens(const Var& x, const Var& z, const std::vector<index_t>& kept, bool training);
  /// Draws kept token indices for `n` images (sorted per image).
  std::vector<index_t> sample_kept(index_t n, Rng& rng) const;

  void collect(const std::string& prefix, nn::ParamList& out);
  index_t channels() const { return channels_; }
  index_t side() const { return side_; }

 private:
  index_t channels_ = 0;
  index_t side_ = 0;
  int heads_ = 4;
  nn::Linear wq_, wk_, wv_, wo_;
  Var pos_q_, pos_kv_;
  nn::BatchNorm bn_;
};

/// Naive alternative: X <- ReLU(X + BatchNorm(W [X, Z])) with W zero-initialized.
class ConcatFusion {
 public:
  ConcatFusion() = default;
  ConcatFusion(index_t channels, Rng& rng);
  Var operator()(const Var& x, const Var& z, bool training);
  void collect(const std::string& prefix, nn::ParamList& out);

 private:
  nn::Linear proj_;
  nn::BatchNorm bn_;
};

/// Mirror of the encoder driven by a latent feature vector; conditions on
/// context at the S/8 and S/4 scales according to the configured mode. The
/// vanilla decoder keeps a plain ReLU at those points.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const VisionConfig& cfg, index_t feature_width, Rng& rng);

  /// `ctx` must be given (with matching batch) unless conditioning is kNone.
  Var forward(const Var& feature, const ContextFeatures* ctx, Rng& rng, bool training);
  void collect(const std::string& prefix, nn::ParamList& out);
  const VisionConfig& config() const { return cfg_; }

 private:
  Var fuse(int scale, const Var& x, const Var& z, Rng& rng, bool training);

  VisionConfig cfg_;
  nn::Linear dense_;
  std::array<std::array<ResidualBlock, 2>, 3> stages_;  // S/8, S/4, S/2
  std::array<CrossAttention, 2> attn_;                  // S/8, S/4
  std::array<ConcatFusion, 2> concat_;
  nn::Conv2d conv_out_;
};

}  // namespace cwm::vision
