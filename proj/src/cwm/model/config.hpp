#pragma once

#include "cwm/core/scalar.hpp"

namespace cwm::model {

struct ModelConfig {
  index_t det_size = 200;      ///< deterministic recurrent state width
  index_t stoch_vars = 8;      ///< categorical variables per latent (V)
  index_t stoch_classes = 8;   ///< classes per variable (K)
  index_t hidden = 200;        ///< dense layer width
  index_t action_dim = 2;
  index_t embed_dim = 768;     ///< flattened image-encoder output width
  int dense_layers = 1;        ///< depth of the input stack and of each distribution head

  index_t stoch_width() const { return stoch_vars * stoch_classes; }
  /// Width of h concatenated with the flattened stochastic sample.
  index_t feature_width() const { return det_size + stoch_width(); }

  static ModelConfig desk();
  static ModelConfig paper();
};

/// Throws a configuration error unless every field is >= 1.
void validate(const ModelConfig& cfg);

}  // namespace cwm::model
