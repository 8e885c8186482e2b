#ifndef MTPPO_ENV_SEARCH_HPP_
#define MTPPO_ENV_SEARCH_HPP_

#include <cstdint>
#include <vector>

namespace mtppo {

// Synthetic multi-turn search task: a hidden integer target in 0..N-1, up
// to K agent turns. A turn may probe with SEARCH <digit> (the environment
// replies with one comparison hint token, loss-masked out) or commit with
// ANSWER <digit> (episode ends, exact-match reward). Malformed turns get
// empty feedback and count as invalid actions.
struct SearchEnvConfig {
  int value_range = 10;        // N, targets drawn uniformly from 0..N-1
  int max_turns = 3;           // K
  int max_tokens_per_turn = 8; // L_a

  int vocab_size() const { return value_range + 6; }
  int tok_search() const { return value_range; }
  int tok_answer() const { return value_range + 1; }
  int tok_eot() const { return value_range + 2; }
  int tok_hint_low() const { return value_range + 3; }   // probe below target
  int tok_hint_eq() const { return value_range + 4; }
  int tok_hint_high() const { return value_range + 5; }  // probe above target

  void check() const;  // throws on invalid values
};

struct EnvState {
  int target = 0;
  int turn_counter = 0;  // completed turns
  std::vector<int> transcript;       // all tokens so far
  std::vector<int> transcript_mask;  // 1 = agent, 0 = environment
  bool terminated = false;
  double reward = 0.0;  // set on termination
  std::vector<bool> valid_action_flags;  // one per completed turn
};

struct StepResult {
  std::vector<int> feedback;  // environment tokens (loss_mask 0)
  bool done = false;
  double reward = 0.0;
  bool valid_action = false;
};

// Deterministic target from the instance seed, empty transcript.
EnvState env_reset(std::uint64_t seed, const SearchEnvConfig& config);

// Consumes one agent turn. The agent tokens are appended to the transcript
// with mask 1, any feedback with mask 0. Throws if called after
// termination or with an over-long turn.
StepResult env_step_turn(EnvState& state, const std::vector<int>& agent_tokens,
                         const SearchEnvConfig& config);

// Success probability of the optimal K-turn strategy, by exhaustive search
// over belief states (comparison hints keep the candidate set an interval,
// so beliefs are intervals of 0..N-1 under the uniform prior).
double optimal_success_rate(const SearchEnvConfig& config);

}  // namespace mtppo

#endif  // MTPPO_ENV_SEARCH_HPP_
