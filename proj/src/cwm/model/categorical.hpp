#pragma once

#include <vector>

#include "cwm/core/autograd.hpp"
#include "cwm/core/rng.hpp"

namespace cwm::model {

/// V independent categoricals over K classes per batch row; logits (batch, V, K).
struct CategoricalDist {
  Var logits;

  index_t batch() const { return logits.dim(0); }
  index_t vars() const { return logits.dim(1); }
  index_t classes() const { return logits.dim(2); }

  Var probs() const;
  Var log_probs() const;
  /// Per-row entropy summed over variables, shape (batch).
  Tensor entropy() const;
};

/// Reshapes flat logits (batch, V*K) into a distribution.
CategoricalDist make_categorical(const Var& flat_logits, index_t vars, index_t classes);

/// Records straight-through samples so a later evaluation can reproduce the
/// exact same discrete draws and the same stop-gradient reference. Replaying
/// turns the sampled loss into the smooth surrogate whose gradient the
/// straight-through estimator returns, which is what finite differences need.
class SampleTape {
 public:
  enum class Mode { kRecord, kReplay };

  explicit SampleTape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Mode mode() const { return mode_; }
  /// Switches to replay from the first recorded entry.
  void rewind_for_replay() {
    mode_ = Mode::kReplay;
    cursor_ = 0;
  }
  size_t size() const { return entries_.size(); }

  struct Entry {
    Tensor sample;
    Tensor probs;
  };
  void record(Entry e) { entries_.push_back(std::move(e)); }
  const Entry& next();

 private:
  Mode mode_;
  std::vector<Entry> entries_;
  size_t cursor_ = 0;
};

/// Draws one class per (row, variable) by inverse CDF on a uniform from `rng`.
/// Forward value is exactly one-hot; gradient equals that of the softmax
/// probabilities. Non-finite logits are rejected.
Var sample_onehot_st(const CategoricalDist& dist, Rng& rng, SampleTape* tape = nullptr);

/// Most probable class per variable as a (constant) one-hot tensor.
Tensor mode_onehot(const CategoricalDist& dist);

/// One-hot tensor from explicit class indices (batch * V entries).
Tensor onehot_from_indices(const std::vector<index_t>& idx, index_t batch, index_t vars, index_t classes);

}  // namespace cwm::model
