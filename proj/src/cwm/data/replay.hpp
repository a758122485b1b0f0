#pragma once

#include <deque>
#include <filesystem>
#include <vector>

#include "cwm/data/segment.hpp"
#include "cwm/vision/image.hpp"

namespace cwm::data {

/// One episode: L + 1 observations and L transitions.
struct EpisodeRecord {
  std::vector<vision::Frame> observations;
  index_t action_dim = 0;
  std::vector<float> actions;    ///< L * action_dim, row-major
  std::vector<float> rewards;    ///< L
  std::vector<float> intrinsic;  ///< L

  index_t length() const { return static_cast<index_t>(rewards.size()); }
};

/// Throws a data error unless lengths line up and rewards are finite.
void validate(const EpisodeRecord& ep);

void save_episode(const EpisodeRecord& ep, const std::filesystem::path& path);
EpisodeRecord load_episode(const std::filesystem::path& path);

struct ReplayOrigin {
  index_t episode = 0;  ///< index among currently stored episodes
  index_t offset = 0;   ///< first observation index
};

/// Whole-episode store with a bound on stored transitions. The oldest
/// episodes are evicted first; the newest is always kept.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity = 1000000) : capacity_(capacity) {}

  void add(EpisodeRecord ep);
  size_t episodes() const { return episodes_.size(); }
  size_t transitions() const { return transitions_; }
  size_t capacity() const { return capacity_; }
  const EpisodeRecord& episode(size_t i) const { return episodes_[i]; }

  /// B slices of T consecutive observations from single episodes, uniform
  /// over all eligible (episode, offset) pairs. Element t carries the action
  /// and reward that led to observation t (zero for an episode's first frame).
  SegmentBatch sample(index_t batch, index_t length, Rng& rng, std::vector<ReplayOrigin>* origins = nullptr) const;

 private:
  size_t capacity_;
  std::deque<EpisodeRecord> episodes_;
  size_t transitions_ = 0;
};

}  // namespace cwm::data
