#ifndef MTPPO_TRAJECTORY_HPP_
#define MTPPO_TRAJECTORY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mtppo {

// One sampled position in a multi-turn episode. Environment-inserted
// tokens carry loss_mask = false and logp_old = 0 by convention; they are
// excluded from every objective sum.
struct TokenRecord {
  int token_id = 0;
  double logp_old = 0.0;   // log-probability under the behavior policy
  bool loss_mask = false;  // true = agent-generated
  double reward = 0.0;     // nonzero only at the final agent token
  double value = 0.0;      // critic estimate at this position
  double advantage = 0.0;  // defined only where loss_mask is set
  bool has_advantage = false;
};

// Maximal run of agent-generated tokens. Positions are 0-based and
// inclusive; index is the 1-based turn counter.
struct Turn {
  int index = 0;
  int t_start = 0;
  int t_end = 0;
  int length() const { return t_end - t_start + 1; }
};

struct Trajectory {
  std::uint64_t query_seed = 0;
  std::vector<TokenRecord> tokens;
  std::vector<Turn> turns;
  double terminal_reward = 0.0;
  // Per-turn flag: did the turn contain a well-formed tool invocation.
  std::vector<bool> valid_action_flags;

  int agent_token_count() const;
};

// Groups maximal runs of set bits into turns; an all-zero mask yields an
// empty list (degenerate trajectory, the trainer skips it).
std::vector<Turn> segment_turns(const std::vector<int>& mask_bits);

struct TrajectoryViolation {
  std::string message;
  int position = -1;  // token position or turn index, depending on the check
};

// Checks every Trajectory/Turn/TokenRecord invariant and returns the first
// violation found, or nullopt when the trajectory is well-formed.
std::optional<TrajectoryViolation> validate_trajectory(const Trajectory& traj,
                                                       int max_turns = -1);

// Line-delimited record: query_seed, token ids, mask bits, logp_old list,
// terminal reward, tab-separated with comma-separated lists. Doubles are
// written as hexfloats so the round-trip is bit-exact.
std::string trajectory_to_line(const Trajectory& traj);
Trajectory trajectory_from_line(const std::string& line);

}  // namespace mtppo

#endif  // MTPPO_TRAJECTORY_HPP_
