#pragma once

#include "cwm/core/tensor.hpp"

namespace cwm::data {

/// B trajectory slices of length T. `actions[b, t]` is the action taken just
/// before frame t (zero for the first frame of an episode) and `rewards[b, t]`
/// the reward received on arriving at frame t. Video segments leave actions,
/// rewards and intrinsic rewards empty.
struct SegmentBatch {
  Tensor obs;         ///< (B, T, 3, S, S) preprocessed to [-0.5, 0.5]
  Tensor actions;     ///< (B, T, A) or empty
  Tensor rewards;     ///< (B, T) or empty
  Tensor intrinsic;   ///< (B, T) or empty

  index_t batch() const { return obs.dim(0); }
  index_t length() const { return obs.dim(1); }
  index_t image_size() const { return obs.dim(3); }
  bool has_actions() const { return !actions.empty(); }
};

}  // namespace cwm::data
