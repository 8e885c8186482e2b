#include "mtppo/env_search.hpp"

#include <algorithm>
#include <stdexcept>

#include "mtppo/rng.hpp"

namespace mtppo {

void SearchEnvConfig::check() const {
  if (value_range < 1) throw std::invalid_argument("env: value_range < 1");
  if (max_turns < 1) throw std::invalid_argument("env: max_turns < 1");
  if (max_tokens_per_turn < 3) {
    throw std::invalid_argument("env: max_tokens_per_turn < 3");
  }
}

EnvState env_reset(std::uint64_t seed, const SearchEnvConfig& config) {
  config.check();
  EnvState state;
  Rng rng(derive_seed(seed, 0xe17));
  state.target = static_cast<int>(
      rng.next_below(static_cast<std::uint64_t>(config.value_range)));
  return state;
}

namespace {

// First action token (SEARCH or ANSWER) immediately followed by a digit.
struct ParsedAction {
  bool found = false;
  bool is_answer = false;
  int digit = 0;
};

ParsedAction parse_turn(const std::vector<int>& tokens,
                        const SearchEnvConfig& cfg) {
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    const bool is_search = tokens[i] == cfg.tok_search();
    const bool is_answer = tokens[i] == cfg.tok_answer();
    if ((is_search || is_answer) && tokens[i + 1] >= 0 &&
        tokens[i + 1] < cfg.value_range) {
      return ParsedAction{true, is_answer, tokens[i + 1]};
    }
  }
  return {};
}

}  // namespace

StepResult env_step_turn(EnvState& state, const std::vector<int>& agent_tokens,
                         const SearchEnvConfig& config) {
  if (state.terminated) {
    throw std::logic_error("env_step_turn: episode already terminated");
  }
  if (static_cast<int>(agent_tokens.size()) > config.max_tokens_per_turn) {
    throw std::invalid_argument("env_step_turn: turn exceeds max_tokens_per_turn");
  }
  for (int tok : agent_tokens) {
    state.transcript.push_back(tok);
    state.transcript_mask.push_back(1);
  }

  StepResult result;
  const ParsedAction action = parse_turn(agent_tokens, config);
  if (action.found && action.is_answer) {
    result.done = true;
    result.reward = action.digit == state.target ? 1.0 : 0.0;
    result.valid_action = true;
  } else if (action.found) {
    int hint = config.tok_hint_eq();
    if (action.digit < state.target) hint = config.tok_hint_low();
    if (action.digit > state.target) hint = config.tok_hint_high();
    result.feedback.push_back(hint);
    result.valid_action = true;
    state.transcript.push_back(hint);
    state.transcript_mask.push_back(0);
  }
  state.valid_action_flags.push_back(result.valid_action);
  ++state.turn_counter;
  if (state.turn_counter >= config.max_turns) result.done = true;
  if (result.done) {
    state.terminated = true;
    state.reward = result.reward;
  }
  return result;
}

namespace {

// Optimal success probability with `m` remaining candidates and `turns`
// turns left. A probe spends a turn and splits the interval; an answer
// spends the final turn on the best single guess.
double optimal_value(int m, int turns, std::vector<std::vector<double>>& memo) {
  if (m <= 0) return 0.0;
  if (turns <= 0) return 0.0;
  if (m == 1) return 1.0;
  double& slot = memo[m][turns];
  if (slot >= 0.0) return slot;
  double best = 1.0 / m;  // blind answer
  if (turns >= 2) {
    for (int below = 0; below < m; ++below) {
      const int above = m - 1 - below;
      const double v = (1.0 + below * optimal_value(below, turns - 1, memo) +
                        above * optimal_value(above, turns - 1, memo)) /
                       m;
      best = std::max(best, v);
    }
  }
  slot = best;
  return best;
}

}  // namespace

double optimal_success_rate(const SearchEnvConfig& config) {
  config.check();
  std::vector<std::vector<double>> memo(
      config.value_range + 1,
      std::vector<double>(config.max_turns + 1, -1.0));
  return optimal_value(config.value_range, config.max_turns, memo);
}

}  // namespace mtppo
