#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cwm/data/segment.hpp"
#include "cwm/data/sprites.hpp"

namespace cwm::data {

struct VideoDataset {
  std::string name;
  std::vector<Video> videos;
};

struct SyntheticDatasetSpec {
  index_t videos = 64;
  index_t frames = 25;
  index_t side = 64;
  std::vector<Motion> motions{Motion::kLeft, Motion::kRight, Motion::kUp, Motion::kDown, Motion::kCircular};
  std::uint64_t seed = 0;
  /// Context seeds are drawn from [context_offset, context_offset + context_pool);
  /// a pool of 0 gives every video its own fresh context. Disjoint ranges
  /// yield novel contexts for held-out sets.
  std::uint64_t context_offset = 0;
  std::uint64_t context_pool = 0;
};

/// Motions are drawn uniformly from `spec.motions`.
VideoDataset make_synthetic_dataset(const SyntheticDatasetSpec& spec);

/// Reads <root>/<video_id>/<frame>.png (frames in file-name order), resizing
/// bilinearly to side x side. When <root>/manifest.txt exists it lists the
/// video directories to load, one relative path per line. Videos with fewer
/// than `min_frames` frames are dropped, unreadable ones skipped with a
/// warning. An empty result is a data error.
VideoDataset ingest_frame_dir(const std::filesystem::path& root, index_t min_frames, index_t side = 64);

/// Decodes an 8-bit PNG as RGB.
vision::Frame load_png(const std::filesystem::path& path, index_t* width = nullptr, index_t* height = nullptr);
/// Square RGB frame to PNG.
void save_png(const vision::Frame& frame, const std::filesystem::path& path);
/// Bilinear resampling of a w x h interleaved RGB buffer to a square CHW frame.
vision::Frame resize_bilinear(const std::vector<std::uint8_t>& rgb, index_t width, index_t height, index_t side);

struct SegmentOrigin {
  index_t dataset = 0;
  index_t video = 0;
  index_t offset = 0;
};

/// B contiguous length-T slices. With one dataset, (video, offset) is uniform
/// over all eligible positions; with several, a dataset is chosen uniformly
/// first. Frames are preprocessed; actions and rewards stay empty.
SegmentBatch sample_video_segments(const std::vector<const VideoDataset*>& sets, index_t batch, index_t length,
                                   Rng& rng, std::vector<SegmentOrigin>* origins = nullptr);

}  // namespace cwm::data
