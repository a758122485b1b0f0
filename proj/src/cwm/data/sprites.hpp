#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cwm/core/rng.hpp"
#include "cwm/vision/image.hpp"

namespace cwm::data {

using Rgb = std::array<std::uint8_t, 3>;

enum class Background { kChecker, kNoise, kGradient };
enum class SpriteShape { kCircle, kSquare, kDiamond };
enum class Motion { kLeft, kRight, kUp, kDown, kCircular };

const char* motion_name(Motion m);
/// Accepts the names printed by motion_name.
Motion parse_motion(const std::string& name);

/// Time-invariant appearance of a scene.
struct ContextStyle {
  Background background = Background::kChecker;
  Rgb color_a{}, color_b{};
  int checker_cell = 8;
  double gradient_angle = 0;
  std::uint64_t noise_seed = 0;
  SpriteShape shape = SpriteShape::kCircle;
  Rgb sprite_color{};
  Rgb goal_color{};
  double sprite_radius = 0.1;  ///< fraction of the image side
};

ContextStyle sample_context(std::uint64_t context_seed);

vision::Frame render_background(const ContextStyle& style, index_t side);

/// Blends one anti-aliased shape (4x4 supersampling) centred at (cx, cy) in
/// pixel units.
void draw_shape(vision::Frame& frame, SpriteShape shape, const Rgb& color, double cx, double cy, double radius);
/// Hollow square outline used for goal markers.
void draw_ring(vision::Frame& frame, const Rgb& color, double cx, double cy, double radius, double thickness);

struct SpriteWorldSpec {
  std::uint64_t context_seed = 0;
  std::uint64_t motion_seed = 0;
  Motion motion = Motion::kRight;
  index_t frames = 25;
  index_t side = 64;
};

struct Video {
  std::vector<vision::Frame> frames;
  int label = -1;  ///< Motion as an integer, or -1 when unlabeled
  std::string id;
  /// Sprite centre per frame in pixel units (x, y); empty for ingested videos.
  std::vector<std::array<double, 2>> centers;
};

/// A sprite moving over a static textured background. The trajectory depends
/// only on (motion, motion_seed, frames, side); the appearance only on
/// context_seed.
Video generate_video(const SpriteWorldSpec& spec);

}  // namespace cwm::data
