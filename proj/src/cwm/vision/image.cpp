#include "cwm/vision/image.hpp"

#include <algorithm>
#include <cmath>

#include "cwm/core/error.hpp"

namespace cwm::vision {

void preprocess_into(const Frame& frame, std::span<real> out) {
  if (frame.size <= 0 || frame.pixels.size() != size_t(3 * frame.size * frame.size))
    throw_data("frame must be 3 x side x side, got " + std::to_string(frame.pixels.size()) + " bytes");
  if (out.size() != frame.pixels.size()) throw_runtime("preprocess output buffer has wrong size");
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<real>(frame.pixels[i]) / real(255) - real(0.5);
}

Tensor preprocess(const Frame& frame) {
  Tensor t(Shape{1, 3, frame.size, frame.size});
  preprocess_into(frame, t.values());
  return t;
}

Tensor preprocess_batch(std::span<const Frame> frames) {
  if (frames.empty()) throw_data("preprocess_batch of no frames");
  const index_t side = frames[0].size;
  const index_t per = 3 * side * side;
  Tensor t(Shape{static_cast<index_t>(frames.size()), 3, side, side});
  for (size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].size != side) throw_data("frames in a batch must share one size");
    preprocess_into(frames[i], t.values().subspan(i * size_t(per), size_t(per)));
  }
  return t;
}

void validate(const CutoutParams& p) {
  if (!(p.min_frac > 0 && p.min_frac <= p.max_frac && p.max_frac < 1))
    throw_config("cutout fractions must satisfy 0 < min_frac <= max_frac < 1");
  if (p.fill < -0.5 || p.fill > 0.5) throw_config("cutout fill must lie in [-0.5, 0.5]");
}

Tensor cutout(const Tensor& images, const CutoutParams& params, Rng& rng) {
  if (!params.enabled) return images;
  validate(params);
  if (images.rank() != 4) throw_runtime("cutout expects (n, c, h, w)");
  Tensor out = images;
  const index_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  for (index_t i = 0; i < n; ++i) {
    const index_t ch = std::max<index_t>(1, index_t(std::floor(rng.uniform(params.min_frac, params.max_frac) * h)));
    const index_t cw = std::max<index_t>(1, index_t(std::floor(rng.uniform(params.min_frac, params.max_frac) * w)));
    const index_t y0 = index_t(rng.uniform_int(std::uint64_t(h - ch + 1)));
    const index_t x0 = index_t(rng.uniform_int(std::uint64_t(w - cw + 1)));
    for (index_t k = 0; k < c; ++k)
      for (index_t y = y0; y < y0 + ch; ++y)
        for (index_t x = x0; x < x0 + cw; ++x) out[((i * c + k) * h + y) * w + x] = static_cast<real>(params.fill);
  }
  return out;
}

index_t sample_context_index(index_t t_len, Rng& rng) {
  if (t_len < 1) throw_runtime("sample_context_index needs T >= 1");
  return index_t(rng.uniform_int(std::uint64_t(t_len)));
}

}  // namespace cwm::vision
