#include "cwm/data/sprites.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cwm/core/error.hpp"

namespace cwm::data {

const char* motion_name(Motion m) {
  switch (m) {
    case Motion::kLeft:
      return "left";
    case Motion::kRight:
      return "right";
    case Motion::kUp:
      return "up";
    case Motion::kDown:
      return "down";
    case Motion::kCircular:
      return "circular";
  }
  return "unknown";
}

Motion parse_motion(const std::string& name) {
  for (Motion m : {Motion::kLeft, Motion::kRight, Motion::kUp, Motion::kDown, Motion::kCircular})
    if (name == motion_name(m)) return m;
  throw_config("unknown motion '" + name + "'");
}

namespace {

Rgb random_color(Rng& rng) {
  return {std::uint8_t(rng.uniform_int(256)), std::uint8_t(rng.uniform_int(256)), std::uint8_t(rng.uniform_int(256))};
}

double luminance(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

// A color whose luminance differs from every color in `avoid` by at least `gap`.
Rgb contrasting(Rng& rng, std::initializer_list<Rgb> avoid, double gap) {
  for (int attempt = 0; attempt < 256; ++attempt) {
    Rgb c = random_color(rng);
    bool ok = true;
    for (const Rgb& a : avoid) ok = ok && std::abs(luminance(c) - luminance(a)) >= gap;
    if (ok) return c;
  }
  double mean = 0;
  for (const Rgb& a : avoid) mean += luminance(a);
  mean /= double(avoid.size());
  return mean > 127 ? Rgb{10, 10, 10} : Rgb{245, 245, 245};
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

std::uint8_t to_u8(double v) { return std::uint8_t(std::clamp(std::lround(v), 0L, 255L)); }

double smooth_noise(std::uint64_t seed, double x, double y) {
  constexpr int kGrid = 6;
  auto corner = [&](int i, int j) {
    const std::uint64_t h = splitmix64(seed ^ (std::uint64_t(i) * 0x9E3779B97F4A7C15ULL) ^ (std::uint64_t(j) << 32));
    return double(h >> 11) * 0x1.0p-53;
  };
  const double gx = x * (kGrid - 1), gy = y * (kGrid - 1);
  const int i = std::min(int(gx), kGrid - 2), j = std::min(int(gy), kGrid - 2);
  const double fx = gx - i, fy = gy - j;
  const double sx = fx * fx * (3 - 2 * fx), sy = fy * fy * (3 - 2 * fy);
  return lerp(lerp(corner(i, j), corner(i + 1, j), sx), lerp(corner(i, j + 1), corner(i + 1, j + 1), sx), sy);
}

bool inside(SpriteShape shape, double dx, double dy, double r) {
  switch (shape) {
    case SpriteShape::kCircle:
      return dx * dx + dy * dy <= r * r;
    case SpriteShape::kSquare:
      return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
    case SpriteShape::kDiamond:
      return std::abs(dx) + std::abs(dy) <= 1.2 * r;
  }
  return false;
}

template <typename Inside>
void blend(vision::Frame& frame, const Rgb& color, double cx, double cy, double extent, Inside in) {
  const index_t n = frame.size;
  const index_t x0 = std::max<index_t>(0, index_t(std::floor(cx - extent))),
                x1 = std::min<index_t>(n - 1, index_t(std::ceil(cx + extent)));
  const index_t y0 = std::max<index_t>(0, index_t(std::floor(cy - extent))),
                y1 = std::min<index_t>(n - 1, index_t(std::ceil(cy + extent)));
  for (index_t y = y0; y <= y1; ++y)
    for (index_t x = x0; x <= x1; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
          const double px = x + (sx + 0.5) / 4.0, py = y + (sy + 0.5) / 4.0;
          hits += in(px - cx, py - cy) ? 1 : 0;
        }
      if (!hits) continue;
      const double a = hits / 16.0;
      for (index_t c = 0; c < 3; ++c) frame.at(c, y, x) = to_u8(lerp(frame.at(c, y, x), color[size_t(c)], a));
    }
}

}  // namespace

ContextStyle sample_context(std::uint64_t context_seed) {
  Rng rng(splitmix64(context_seed ^ 0xC0FFEEULL));
  ContextStyle s;
  s.background = static_cast<Background>(rng.uniform_int(3));
  s.color_a = random_color(rng);
  s.color_b = random_color(rng);
  s.checker_cell = 4 + int(rng.uniform_int(13));
  s.gradient_angle = rng.uniform(0, 2 * std::numbers::pi);
  s.noise_seed = rng.next_u64();
  s.shape = static_cast<SpriteShape>(rng.uniform_int(3));
  s.sprite_color = contrasting(rng, {s.color_a, s.color_b}, 60);
  s.goal_color = contrasting(rng, {s.color_a, s.color_b, s.sprite_color}, 40);
  s.sprite_radius = rng.uniform(0.08, 0.11);
  return s;
}

vision::Frame render_background(const ContextStyle& style, index_t side) {
  vision::Frame f(side);
  const double ca = std::cos(style.gradient_angle), sa = std::sin(style.gradient_angle);
  const int cell = std::max<int>(1, int(std::lround(style.checker_cell * double(side) / 64.0)));
  for (index_t y = 0; y < side; ++y)
    for (index_t x = 0; x < side; ++x) {
      const double u = (x + 0.5) / double(side), v = (y + 0.5) / double(side);
      double t = 0;
      switch (style.background) {
        case Background::kChecker:
          t = ((x / cell + y / cell) % 2) ? 1.0 : 0.0;
          break;
        case Background::kNoise:
          t = smooth_noise(style.noise_seed, u, v);
          break;
        case Background::kGradient:
          t = std::clamp(0.5 + ((u - 0.5) * ca + (v - 0.5) * sa) / std::numbers::sqrt2, 0.0, 1.0);
          break;
      }
      for (index_t c = 0; c < 3; ++c)
        f.at(c, y, x) = to_u8(lerp(style.color_a[size_t(c)], style.color_b[size_t(c)], t));
    }
  return f;
}

void draw_shape(vision::Frame& frame, SpriteShape shape, const Rgb& color, double cx, double cy, double radius) {
  blend(frame, color, cx, cy, 1.25 * radius + 1, [&](double dx, double dy) { return inside(shape, dx, dy, radius); });
}

void draw_ring(vision::Frame& frame, const Rgb& color, double cx, double cy, double radius, double thickness) {
  blend(frame, color, cx, cy, radius + 1, [&](double dx, double dy) {
    const double m = std::max(std::abs(dx), std::abs(dy));
    return m <= radius && m >= radius - thickness;
  });
}

Video generate_video(const SpriteWorldSpec& spec) {
  if (spec.frames < 1 || spec.side < 8) throw_config("sprite video needs frames >= 1 and side >= 8");
  const ContextStyle style = sample_context(spec.context_seed);
  const vision::Frame bg = render_background(style, spec.side);

  // Geometry is derived from the motion stream and a fixed nominal radius so
  // it does not depend on the context.
  Rng rng(splitmix64(spec.motion_seed ^ 0xA11CEULL));
  const double side = double(spec.side);
  const double margin = 0.13 * side;
  const double lo = margin, hi = side - margin;
  const double steps = double(std::max<index_t>(spec.frames - 1, 1));
  const double max_speed = std::min(2.0 * side / 64.0, (hi - lo) / steps);
  const double speed = rng.uniform(0.5, 1.0) * max_speed;
  const double span = speed * steps;

  std::vector<std::array<double, 2>> centers(size_t(spec.frames));
  if (spec.motion == Motion::kCircular) {
    const double radius = rng.uniform(0.15, 0.28) * side;
    const double cx = rng.uniform(lo + radius, hi - radius), cy = rng.uniform(lo + radius, hi - radius);
    const double omega = rng.uniform(0.12, 0.3) * (rng.uniform() < 0.5 ? -1 : 1);
    const double phase = rng.uniform(0, 2 * std::numbers::pi);
    for (index_t t = 0; t < spec.frames; ++t)
      centers[size_t(t)] = {cx + radius * std::cos(phase + omega * t), cy + radius * std::sin(phase + omega * t)};
  } else {
    const double start = rng.uniform(lo, hi - span);
    const double across = rng.uniform(lo, hi);
    for (index_t t = 0; t < spec.frames; ++t) {
      const double d = speed * t;
      switch (spec.motion) {
        case Motion::kRight:
          centers[size_t(t)] = {start + d, across};
          break;
        case Motion::kLeft:
          centers[size_t(t)] = {hi - (start - lo) - d, across};
          break;
        case Motion::kDown:
          centers[size_t(t)] = {across, start + d};
          break;
        case Motion::kUp:
          centers[size_t(t)] = {across, hi - (start - lo) - d};
          break;
        case Motion::kCircular:
          break;
      }
    }
  }

  Video v;
  v.label = static_cast<int>(spec.motion);
  v.centers = centers;
  v.frames.reserve(size_t(spec.frames));
  for (const auto& c : centers) {
    vision::Frame f = bg;
    draw_shape(f, style.shape, style.sprite_color, c[0], c[1], style.sprite_radius * side);
    v.frames.push_back(std::move(f));
  }
  return v;
}

}  // namespace cwm::data
