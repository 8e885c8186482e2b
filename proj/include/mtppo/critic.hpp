#ifndef MTPPO_CRITIC_HPP_
#define MTPPO_CRITIC_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtppo/env_search.hpp"
#include "mtppo/features.hpp"
#include "mtppo/policy.hpp"
#include "mtppo/trajectory.hpp"

namespace mtppo {

// Linear value head on the sparse context features.
struct CriticParams {
  std::vector<double> values;  // length = feature_dim

  static CriticParams zeros(int feature_dim) {
    CriticParams c;
    c.values.assign(static_cast<size_t>(feature_dim), 0.0);
    return c;
  }
};

inline double critic_value(const CriticParams& critic,
                           const ContextFeatures& context) {
  double v = 0.0;
  for (int i : context) v += critic.values[static_cast<size_t>(i)];
  return v;
}

// Calls fn(position, turn_index, context) for every agent token of the
// trajectory, rebuilding the context features from the transcript prefix.
template <typename Fn>
void for_each_agent_context(const Trajectory& traj, const FeatureConfig& fcfg,
                            Fn&& fn) {
  std::vector<int> prefix;
  prefix.reserve(traj.tokens.size());
  size_t turn_idx = 0;
  for (int t = 0; t < static_cast<int>(traj.tokens.size()); ++t) {
    while (turn_idx < traj.turns.size() && t > traj.turns[turn_idx].t_end) {
      ++turn_idx;
    }
    if (traj.tokens[t].loss_mask) {
      fn(t, static_cast<int>(turn_idx),
         context_features(fcfg, prefix, static_cast<int>(turn_idx)));
    }
    prefix.push_back(traj.tokens[t].token_id);
  }
}

struct GaeConfig {
  double gamma = 1.0;
  double lambda = 1.0;
};

// GAE over the agent-token sequence: delta_t = r_t + gamma*V_{t+1} - V_t,
// A_t = sum_{j>=t} (gamma*lambda)^{j-t} delta_j. Terminal episodes pass
// bootstrap_value = 0. With gamma = lambda = 1 this is computed directly as
// return-minus-baseline, which the recursion equals algebraically.
std::vector<double> gae_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   double bootstrap_value,
                                   const GaeConfig& config);

// One least-squares gradient step on mean (V(s_t) - target_t)^2 over all
// agent tokens of the batch, target_t = advantage_t + value_t (both frozen
// at rollout time). Returns the pre-update mean squared error. Contexts are
// rebuilt from the trajectories with `fcfg`.
double critic_update(CriticParams& critic, const std::vector<Trajectory>& batch,
                     const FeatureConfig& fcfg, double learning_rate);

// Exact V^pi by backward induction over the finite token tree of one
// environment instance (fixed target). Keys are the transcript prefix
// rendered as comma-joined token ids, with environment-inserted tokens
// marked so they never collide with agent-emitted ones.
struct ExactValues {
  std::map<std::string, double> table;
  int target = 0;

  double at(const std::vector<int>& transcript,
            const std::vector<int>& mask) const;
  // All-agent-token convenience overload.
  double at(const std::vector<int>& transcript) const;
};

ExactValues exact_state_values(const SearchEnvConfig& env_cfg,
                               const FeatureConfig& fcfg,
                               const PolicyParams& policy, int target,
                               std::size_t max_states = 1000000);

// Ground-truth advantages A^pi_t = Q^pi(s_t, y_t) - V^pi(s_t) at every
// agent token of a trajectory generated on the same instance.
std::vector<double> exact_token_advantages(const Trajectory& traj,
                                           const SearchEnvConfig& env_cfg,
                                           const ExactValues& values);

}  // namespace mtppo

#endif  // MTPPO_CRITIC_HPP_
