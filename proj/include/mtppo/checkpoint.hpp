#ifndef MTPPO_CHECKPOINT_HPP_
#define MTPPO_CHECKPOINT_HPP_

#include <string>

#include "mtppo/critic.hpp"
#include "mtppo/policy.hpp"

namespace mtppo {

// Checkpoint files are a one-line shape header followed by one hexfloat
// per line, so save/load round-trips bit-exactly.
void save_policy(const std::string& path, const PolicyParams& params);
PolicyParams load_policy(const std::string& path);

void save_critic(const std::string& path, const CriticParams& critic);
CriticParams load_critic(const std::string& path);

}  // namespace mtppo

#endif  // MTPPO_CHECKPOINT_HPP_
