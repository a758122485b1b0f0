#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cwm/core/rng.hpp"
#include "cwm/core/tensor.hpp"

namespace cwm::vision {

/// 8-bit frame in CHW layout, 3 channels.
struct Frame {
  index_t size = 0;  ///< square side length
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  explicit Frame(index_t side) : size(side), pixels(size_t(3 * side * side), 0) {}
  std::uint8_t& at(index_t c, index_t y, index_t x) { return pixels[size_t((c * size + y) * size + x)]; }
  std::uint8_t at(index_t c, index_t y, index_t x) const { return pixels[size_t((c * size + y) * size + x)]; }
  bool operator==(const Frame&) const = default;
};

/// Maps 0..255 to [-0.5, 0.5] as v / 255 - 0.5 into `out`, which must hold
/// 3 * side * side values.
void preprocess_into(const Frame& frame, std::span<real> out);
/// Single frame to a (1, 3, side, side) tensor.
Tensor preprocess(const Frame& frame);
/// Stacks frames into (n, 3, side, side).
Tensor preprocess_batch(std::span<const Frame> frames);

struct CutoutParams {
  bool enabled = false;
  double min_frac = 0.2;
  double max_frac = 0.5;
  double fill = 0.0;
};

void validate(const CutoutParams& p);

/// Overwrites one axis-aligned rectangle per image of `images` (n, 3, h, w).
/// Side lengths are floor(frac * side) with frac drawn in [min_frac, max_frac];
/// position is uniform over placements that fit. Disabled means identity and
/// consumes no randomness.
Tensor cutout(const Tensor& images, const CutoutParams& params, Rng& rng);

/// Uniform index in [0, t_len).
index_t sample_context_index(index_t t_len, Rng& rng);

}  // namespace cwm::vision
