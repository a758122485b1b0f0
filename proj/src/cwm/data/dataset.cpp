#include "cwm/data/dataset.hpp"

#include <png.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cwm/core/error.hpp"

namespace fs = std::filesystem;

namespace cwm::data {

VideoDataset make_synthetic_dataset(const SyntheticDatasetSpec& spec) {
  if (spec.videos < 1 || spec.motions.empty()) throw_config("synthetic dataset needs videos >= 1 and some motions");
  Rng rng(splitmix64(spec.seed ^ 0x5EEDULL));
  VideoDataset ds;
  ds.name = "synthetic";
  ds.videos.reserve(size_t(spec.videos));
  for (index_t i = 0; i < spec.videos; ++i) {
    SpriteWorldSpec s;
    s.motion = spec.motions[size_t(rng.uniform_int(spec.motions.size()))];
    s.motion_seed = rng.next_u64();
    s.context_seed = spec.context_offset + (spec.context_pool ? rng.uniform_int(spec.context_pool) : rng.next_u64() >> 1);
    s.frames = spec.frames;
    s.side = spec.side;
    Video v = generate_video(s);
    v.id = "synthetic_" + std::to_string(i);
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

vision::Frame resize_bilinear(const std::vector<std::uint8_t>& rgb, index_t width, index_t height, index_t side) {
  if (width < 1 || height < 1 || rgb.size() != size_t(3 * width * height)) throw_data("bad RGB buffer for resize");
  vision::Frame out(side);
  const double sx = double(width) / double(side), sy = double(height) / double(side);
  for (index_t y = 0; y < side; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(height - 1));
    const index_t y0 = index_t(fy), y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - double(y0);
    for (index_t x = 0; x < side; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(width - 1));
      const index_t x0 = index_t(fx), x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - double(x0);
      for (index_t c = 0; c < 3; ++c) {
        auto px = [&](index_t yy, index_t xx) { return double(rgb[size_t((yy * width + xx) * 3 + c)]); };
        const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) + wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        out.at(c, y, x) = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

namespace {

std::vector<std::uint8_t> read_png_rgb(const fs::path& path, index_t& w, index_t& h) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw_data("cannot read PNG " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw_data("cannot decode PNG " + path.string() + ": " + img.message);
  }
  w = img.width;
  h = img.height;
  return buf;
}

std::vector<fs::path> list_videos(const fs::path& root) {
  std::vector<fs::path> dirs;
  const fs::path manifest = root / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      dirs.push_back(root / line);
    }
    return dirs;
  }
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

vision::Frame load_png(const fs::path& path, index_t* width, index_t* height) {
  index_t w = 0, h = 0;
  std::vector<std::uint8_t> rgb = read_png_rgb(path, w, h);
  if (width) *width = w;
  if (height) *height = h;
  if (w != h) throw_data("load_png expects a square image: " + path.string());
  vision::Frame f(w);
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < w; ++x)
      for (index_t c = 0; c < 3; ++c) f.at(c, y, x) = rgb[size_t((y * w + x) * 3 + c)];
  return f;
}

void save_png(const vision::Frame& frame, const fs::path& path) {
  const index_t n = frame.size;
  std::vector<std::uint8_t> rgb(size_t(3 * n * n));
  for (index_t y = 0; y < n; ++y)
    for (index_t x = 0; x < n; ++x)
      for (index_t c = 0; c < 3; ++c) rgb[size_t((y * n + x) * 3 + c)] = frame.at(c, y, x);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = png_uint_32(n);
  img.height = png_uint_32(n);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw_runtime("cannot write PNG " + path.string() + ": " + img.message);
}

VideoDataset ingest_frame_dir(const fs::path& root, index_t min_frames, index_t side) {
  if (!fs::is_directory(root)) throw_data("dataset directory not found: " + root.string());
  VideoDataset ds;
  ds.name = root.filename().string();
  for (const fs::path& dir : list_videos(root)) {
    if (!fs::is_directory(dir)) {
      spdlog::warn("skipping {}: not a directory", dir.string());
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (index_t(files.size()) < min_frames) continue;
    Video v;
    v.id = fs::relative(dir, root).string();
    try {
      for (const fs::path& f : files) {
        index_t w = 0, h = 0;
        std::vector<std::uint8_t> rgb = read_png_rgb(f, w, h);
        v.frames.push_back(resize_bilinear(rgb, w, h, side));
      }
    } catch (const Error& e) {
      spdlog::warn("skipping video {}: {}", v.id, e.what());
      continue;
    }
    ds.videos.push_back(std::move(v));
  }
  if (ds.videos.empty())
    throw_data("no usable videos with at least " + std::to_string(min_frames) + " frames in " + root.string());
  return ds;
}

SegmentBatch sample_video_segments(const std::vector<const VideoDataset*>& sets, index_t batch, index_t length,
                                   Rng& rng, std::vector<SegmentOrigin>* origins) {
  if (sets.empty() || batch < 1 || length < 1) throw_data("sample_video_segments needs datasets, B >= 1, T >= 1");
  // Eligible start counts per video, cumulated per dataset.
  std::vector<std::vector<std::uint64_t>> cum(sets.size());
  std::vector<size_t> usable;
  index_t side = -1;
  for (size_t d = 0; d < sets.size(); ++d) {
    std::uint64_t acc = 0;
    for (const Video& v : sets[d]->videos) {
      const index_t n = index_t(v.frames.size());
      if (n >= length) {
        acc += std::uint64_t(n - length + 1);
        if (side < 0) side = v.frames[0].size;
        if (v.frames[0].size != side) throw_data("datasets mix frame sizes");
      }
      cum[d].push_back(acc);
    }
    if (acc > 0) usable.push_back(d);
  }
  if (usable.empty()) throw_data("no video has at least " + std::to_string(length) + " frames");

  SegmentBatch out;
  out.obs = Tensor(Shape{batch, length, 3, side, side});
  const size_t per = size_t(3 * side * side);
  if (origins) origins->clear();
  for (index_t b = 0; b < batch; ++b) {
    const size_t d = usable[size_t(rng.uniform_int(usable.size()))];
    const std::uint64_t pick = rng.uniform_int(cum[d].back());
    const size_t vi = size_t(std::upper_bound(cum[d].begin(), cum[d].end(), pick) - cum[d].begin());
    const std::uint64_t before = vi ? cum[d][vi - 1] : 0;
    const index_t offset = index_t(pick - before);
    const Video& v = sets[d]->videos[vi];
    for (index_t t = 0; t < length; ++t)
      vision::preprocess_into(v.frames[size_t(offset + t)],
                              out.obs.values().subspan((size_t(b * length + t)) * per, per));
    if (origins) origins->push_back({index_t(d), index_t(vi), offset});
  }
  return out;
}

}  // namespace cwm::data
