#include "mtppo/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace mtppo {

ContextFeatures context_features(const FeatureConfig& cfg,
                                 const std::vector<int>& transcript,
                                 int turn_index) {
  if (cfg.vocab_size <= 0 || cfg.window <= 0 || cfg.turn_slots <= 0) {
    throw std::invalid_argument("context_features: bad feature config");
  }
  ContextFeatures active;
  active.reserve(cfg.window + 2);
  const int n = static_cast<int>(transcript.size());
  // Slot i holds the token i positions back; absent history leaves the
  // slot inactive.
  for (int back = 1; back <= cfg.window; ++back) {
    const int pos = n - back;
    if (pos < 0) break;
    const int tok = transcript[pos];
    if (tok < 0 || tok >= cfg.vocab_size) {
      throw std::invalid_argument("context_features: token out of vocabulary");
    }
    active.push_back((back - 1) * cfg.vocab_size + tok);
  }
  const int turn = std::min(std::max(turn_index, 0), cfg.turn_slots - 1);
  active.push_back(cfg.window * cfg.vocab_size + turn);
  active.push_back(cfg.window * cfg.vocab_size + cfg.turn_slots);  // bias
  std::sort(active.begin(), active.end());
  return active;
}

}  // namespace mtppo
