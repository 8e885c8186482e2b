#ifndef MTPPO_FEATURES_HPP_
#define MTPPO_FEATURES_HPP_

#include <vector>

namespace mtppo {

// Finite featurization of a transcript prefix: one-hot of the last
// `window` tokens (position-indexed), a turn-counter one-hot and a bias
// slot. All active features have value 1, so a context is just the list of
// active indices.
struct FeatureConfig {
  int vocab_size = 0;
  int window = 4;
  int turn_slots = 3;  // turn counter clamps to the last slot

  int dim() const { return window * vocab_size + turn_slots + 1; }
};

using ContextFeatures = std::vector<int>;  // active indices, ascending

// `turn_index` is the 0-based index of the turn being generated.
ContextFeatures context_features(const FeatureConfig& cfg,
                                 const std::vector<int>& transcript,
                                 int turn_index);

}  // namespace mtppo

#endif  // MTPPO_FEATURES_HPP_
