#include "cwm/vision/networks.hpp"

#include <algorithm>

#include "cwm/core/error.hpp"

namespace cwm::vision {

namespace {
index_t pooled(index_t side) { return side >= 2 ? side / 2 : side; }

Var pool_if_possible(const Var& x) { return x.dim(2) >= 2 ? avg_pool2(x) : x; }
}  // namespace

index_t VisionConfig::stage_size(int stage) const {
  index_t s = image_size / 2;
  for (int i = 0; i < stage; ++i) s = pooled(s);
  return s;
}

index_t VisionConfig::final_size() const { return pooled(stage_size(2)); }

void validate(const VisionConfig& cfg) {
  if (cfg.image_size < 8 || (cfg.image_size & (cfg.image_size - 1)) != 0)
    throw_config("vision.image_size must be a power of two >= 8");
  if (cfg.base_channels < 1) throw_config("vision.base_channels must be >= 1");
  if (cfg.heads < 1) throw_config("vision.heads must be >= 1");
  if (cfg.conditioning == Conditioning::kCrossAttention &&
      (cfg.stage_channels(1) % cfg.heads || cfg.stage_channels(2) % cfg.heads))
    throw_config("context channel counts must be divisible by the attention head count");
}

ResidualBlock::ResidualBlock(index_t in, index_t out, Rng& rng)
    : conv1_(in, out, 3, 1, rng), conv2_(out, out, 3, 1, rng), bn1_(out), bn2_(out), has_proj_(in != out) {
  if (has_proj_) {
    proj_ = nn::Conv2d(in, out, 1, 1, rng);
    proj_bn_ = nn::BatchNorm(out);
  }
}

Var ResidualBlock::operator()(const Var& x, bool training) {
  Var h = relu(bn1_(conv1_(x), training));
  h = bn2_(conv2_(h), training);
  const Var shortcut = has_proj_ ? proj_bn_(proj_(x), training) : x;
  return relu(add(h, shortcut));
}

void ResidualBlock::collect(const std::string& prefix, nn::ParamList& out) {
  conv1_.collect(prefix + ".conv1", out);
  bn1_.collect(prefix + ".bn1", out);
  conv2_.collect(prefix + ".conv2", out);
  bn2_.collect(prefix + ".bn2", out);
  if (has_proj_) {
    proj_.collect(prefix + ".proj", out);
    proj_bn_.collect(prefix + ".proj_bn", out);
  }
}

ResNetEncoder::ResNetEncoder(const VisionConfig& cfg, Rng& rng)
    : cfg_(cfg), conv_in_(3, cfg.stage_channels(0), 3, 2, rng), bn_in_(cfg.stage_channels(0)) {
  validate(cfg);
  index_t in = cfg.stage_channels(0);
  for (int s = 0; s < 3; ++s) {
    const index_t out = cfg.stage_channels(s);
    stages_[size_t(s)][0] = ResidualBlock(in, out, rng);
    stages_[size_t(s)][1] = ResidualBlock(out, out, rng);
    in = out;
  }
}

EncoderOutput ResNetEncoder::forward(const Var& images, bool training) {
  const Tensor& v = images.value();
  if (v.rank() != 4 || v.dim(1) != 3 || v.dim(2) != cfg_.image_size || v.dim(3) != cfg_.image_size)
    throw_runtime("encoder expects (n, 3, " + std::to_string(cfg_.image_size) + ", " +
                  std::to_string(cfg_.image_size) + "), got " + shape_str(v.shape()));
  EncoderOutput out;
  Var h = relu(bn_in_(conv_in_(images), training));
  for (size_t s = 0; s < 3; ++s) {
    h = stages_[s][0](h, training);
    h = stages_[s][1](h, training);
    out.stage_pre[s] = h;
    h = pool_if_possible(h);
    out.stage_post[s] = h;
  }
  out.embed = reshape(h, {h.dim(0), h.numel() / h.dim(0)});
  return out;
}

void ResNetEncoder::collect(const std::string& prefix, nn::ParamList& out) {
  conv_in_.collect(prefix + ".conv_in", out);
  bn_in_.collect(prefix + ".bn_in", out);
  for (size_t s = 0; s < 3; ++s)
    for (size_t b = 0; b < 2; ++b)
      stages_[s][b].collect(prefix + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(b), out);
}

ContextFeatures ContextEncoder::forward(const Var& images, bool training) {
  EncoderOutput e = net_.forward(images, training);
  return ContextFeatures{e.stage_pre[1], e.stage_pre[2]};
}

CrossAttention::CrossAttention(index_t channels, index_t side, int heads, Rng& rng)
    : channels_(channels),
      side_(side),
      heads_(heads),
      wq_(channels, channels, rng, nn::Init::kGlorot, false),
      wk_(channels, channels, rng, nn::Init::kGlorot, false),
      wv_(channels, channels, rng, nn::Init::kGlorot, false),
      wo_(channels, channels, rng, nn::Init::kZero, false),
      pos_q_(Tensor(Shape{side * side, channels}), true),
      pos_kv_(Tensor(Shape{side * side, channels}), true),
      bn_(channels) {
  if (heads < 1 || channels % heads)
    throw_config("attention channels " + std::to_string(channels) + " not divisible by " + std::to_string(heads) +
                 " heads");
}

std::vector<index_t> CrossAttention::sample_kept(index_t n, Rng& rng) const {
  const index_t hw = side_ * side_;
  const index_t k = kept_tokens(hw);
  std::vector<index_t> kept;
  kept.reserve(size_t(n * k));
  std::vector<index_t> perm(static_cast<size_t>(hw));
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = 0; j < hw; ++j) perm[size_t(j)] = j;
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (index_t j = 0; j < k; ++j) {
      const index_t r = j + index_t(rng.uniform_int(std::uint64_t(hw - j)));
      std::swap(perm[size_t(j)], perm[size_t(r)]);
    }
    std::sort(perm.begin(), perm.begin() + k);
    kept.insert(kept.end(), perm.begin(), perm.begin() + k);
  }
  return kept;
}

Var CrossAttention::operator()(const Var& x, const Var& z, Rng& rng, bool training) {
  return forward_with_tokens(x, z, sample_kept(x.dim(0), rng), training);
}

Var CrossAttention::forward_with_tokens(const Var& x, const Var& z, const std::vector<index_t>& kept, bool training) {
  if (x.shape() != z.shape()) throw_runtime("cross-attention needs X and Z of equal shape");
  const Tensor& xv = x.value();
  if (xv.rank() != 4 || xv.dim(1) != channels_ || xv.dim(2) != side_ || xv.dim(3) != side_)
    throw_runtime("cross-attention input " + shape_str(xv.shape()) + " does not match its configuration");
  const index_t n = xv.dim(0), hw = side_ * side_, c = channels_;
  const index_t k = static_cast<index_t>(kept.size()) / std::max<index_t>(n, 1);
  if (k * n != static_cast<index_t>(kept.size())) throw_runtime("kept token list has wrong size");

  const Var q_tokens = add(nchw_to_tokens(x), pos_q_);
  const Var kv_tokens = add(gather_tokens(nchw_to_tokens(z), kept, k), gather_table_rows(pos_kv_, kept, n, k));
  const Var q = reshape(wq_(reshape(q_tokens, {n * hw, c})), {n, hw, c});
  const Var kk = reshape(wk_(reshape(kv_tokens, {n * k, c})), {n, k, c});
  const Var vv = reshape(wv_(reshape(kv_tokens, {n * k, c})), {n, k, c});
  const Var attn = multihead_attention(q, kk, vv, heads_);
  const Var r = reshape(wo_(reshape(attn, {n * hw, c})), {n, hw, c});
  return relu(add(x, bn_(tokens_to_nchw(r, side_, side_), training)));
}

void CrossAttention::collect(const std::string& prefix, nn::ParamList& out) {
  wq_.collect(prefix + ".wq", out);
  wk_.collect(prefix + ".wk", out);
  wv_.collect(prefix + ".wv", out);
  wo_.collect(prefix + ".wo", out);
  out.add(prefix + ".pos_q", pos_q_);
  out.add(prefix + ".pos_kv", pos_kv_);
  bn_.collect(prefix + ".bn", out);
}

ConcatFusion::ConcatFusion(index_t channels, Rng& rng)
    : proj_(2 * channels, channels, rng, nn::Init::kZero), bn_(channels) {}

Var ConcatFusion::operator()(const Var& x, const Var& z, bool training) {
  if (x.shape() != z.shape()) throw_runtime("concat conditioning needs X and Z of equal shape");
  const index_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Var xt = reshape(nchw_to_tokens(x), {n * h * w, c});
  const Var zt = reshape(nchw_to_tokens(z), {n * h * w, c});
  const Var fused = reshape(proj_(concat_cols({xt, zt})), {n, h * w, c});
  return relu(add(x, bn_(tokens_to_nchw(fused, h, w), training)));
}

void ConcatFusion::collect(const std::string& prefix, nn::ParamList& out) {
  proj_.collect(prefix + ".proj", out);
  bn_.collect(prefix + ".bn", out);
}

Decoder::Decoder(const VisionConfig& cfg, index_t feature_width, Rng& rng)
    : cfg_(cfg),
      dense_(feature_width, cfg.stage_channels(2) * cfg.final_size() * cfg.final_size(), rng),
      conv_out_(cfg.stage_channels(0), 3, 3, 1, rng, true) {
  validate(cfg);
  // Decoder stage i runs at encoder stage (2 - i)'s resolution.
  const index_t c = cfg.base_channels;
  stages_[0] = {ResidualBlock(4 * c, 2 * c, rng), ResidualBlock(2 * c, 2 * c, rng)};
  stages_[1] = {ResidualBlock(2 * c, c, rng), ResidualBlock(c, c, rng)};
  stages_[2] = {ResidualBlock(c, c, rng), ResidualBlock(c, c, rng)};
  if (cfg.conditioning == Conditioning::kCrossAttention) {
    attn_[0] = CrossAttention(cfg.stage_channels(2), cfg.stage_size(2), cfg.heads, rng);
    attn_[1] = CrossAttention(cfg.stage_channels(1), cfg.stage_size(1), cfg.heads, rng);
  } else if (cfg.conditioning == Conditioning::kConcat) {
    concat_[0] = ConcatFusion(cfg.stage_channels(2), rng);
    concat_[1] = ConcatFusion(cfg.stage_channels(1), rng);
  }
}

Var Decoder::fuse(int scale, const Var& x, const Var& z, Rng& rng, bool training) {
  switch (cfg_.conditioning) {
    case Conditioning::kCrossAttention:
      return attn_[size_t(scale)](x, z, rng, training);
    case Conditioning::kConcat:
      return concat_[size_t(scale)](x, z, training);
    case Conditioning::kNone:
      break;
  }
  return relu(x);
}

Var Decoder::forward(const Var& feature, const ContextFeatures* ctx, Rng& rng, bool training) {
  const bool conditioned = cfg_.conditioning != Conditioning::kNone;
  if (conditioned && !ctx) throw_runtime("contextualized decoder called without context features");
  const index_t n = feature.dim(0);
  if (conditioned && (ctx->f8.dim(0) != n || ctx->f16.dim(0) != n))
    throw_runtime("context batch does not match decoder batch");

  const index_t s0 = cfg_.final_size();
  Var h = reshape(dense_(feature), {n, cfg_.stage_channels(2), s0, s0});
  auto grow_to = [&](index_t side) {
    while (h.dim(2) < side) h = upsample_nearest2(h);
  };
  grow_to(cfg_.stage_size(2));
  h = fuse(0, h, conditioned ? ctx->f8 : h, rng, training);
  h = stages_[0][1](stages_[0][0](h, training), training);
  grow_to(cfg_.stage_size(1));
  h = fuse(1, h, conditioned ? ctx->f16 : h, rng, training);
  h = stages_[1][1](stages_[1][0](h, training), training);
  grow_to(cfg_.stage_size(0));
  h = stages_[2][1](stages_[2][0](h, training), training);
  grow_to(cfg_.image_size);
  return conv_out_(h);
}

void Decoder::collect(const std::string& prefix, nn::ParamList& out) {
  dense_.collect(prefix + ".dense", out);
  for (size_t s = 0; s < 3; ++s)
    for (size_t b = 0; b < 2; ++b)
      stages_[s][b].collect(prefix + ".stage" + std::to_string(3 - s) + ".block" + std::to_string(b), out);
  if (cfg_.conditioning == Conditioning::kCrossAttention) {
    attn_[0].collect(prefix + ".attn8", out);
    attn_[1].collect(prefix + ".attn16", out);
  } else if (cfg_.conditioning == Conditioning::kConcat) {
    concat_[0].collect(prefix + ".concat8", out);
    concat_[1].collect(prefix + ".concat16", out);
  }
  conv_out_.collect(prefix + ".conv_out", out);
}

}  // namespace cwm::vision
