#include "mtppo/critic.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mtppo {

std::vector<double> gae_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   double bootstrap_value,
                                   const GaeConfig& config) {
  if (rewards.size() != values.size() || rewards.empty()) {
    throw std::invalid_argument("gae_advantages: length mismatch or empty");
  }
  const int n = static_cast<int>(rewards.size());
  std::vector<double> advantages(rewards.size());
  if (config.gamma == 1.0 && config.lambda == 1.0) {
    // Telescoped form: A_t = G_t - V_t with G_t the suffix reward sum.
    double suffix = bootstrap_value;
    for (int t = n - 1; t >= 0; --t) {
      suffix += rewards[t];
      advantages[t] = suffix - values[t];
    }
    return advantages;
  }
  double acc = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double next_value = t + 1 < n ? values[t + 1] : bootstrap_value;
    const double delta = rewards[t] + config.gamma * next_value - values[t];
    acc = delta + config.gamma * config.lambda * acc;
    advantages[t] = acc;
  }
  return advantages;
}

double critic_update(CriticParams& critic, const std::vector<Trajectory>& batch,
                     const FeatureConfig& fcfg, double learning_rate) {
  if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
  std::vector<double> grad(critic.values.size(), 0.0);
  double sq_error = 0.0;
  int count = 0;
  for (const Trajectory& traj : batch) {
    for_each_agent_context(
        traj, fcfg, [&](int t, int, const ContextFeatures& ctx) {
          const TokenRecord& tok = traj.tokens[t];
          if (!tok.has_advantage) {
            throw std::invalid_argument("critic_update: advantages missing");
          }
          const double target = tok.advantage + tok.value;
          const double err = critic_value(critic, ctx) - target;
          sq_error += err * err;
          for (int i : ctx) grad[static_cast<size_t>(i)] += 2.0 * err;
          ++count;
        });
  }
  if (count == 0) return 0.0;
  const double scale = learning_rate / count;
  for (size_t i = 0; i < critic.values.size(); ++i) {
    critic.values[i] -= scale * grad[i];
  }
  return sq_error / count;
}

namespace {

// Environment-inserted tokens are keyed distinctly from agent tokens: an
// agent may emit a hint token id itself, and the two states have different
// futures.
std::string transcript_key(const std::vector<int>& transcript,
                           const std::vector<int>& mask) {
  std::ostringstream oss;
  for (size_t i = 0; i < transcript.size(); ++i) {
    if (i) oss << ',';
    if (!mask[i]) oss << 'e';
    oss << transcript[i];
  }
  return oss.str();
}

// Deterministic turn-completion rule shared by the enumerator and the
// trajectory replay: feedback token (if any), done flag and reward for a
// finished agent turn.
struct TurnOutcome {
  int feedback = -1;  // -1 = none
  bool done = false;
  double reward = 0.0;
};

TurnOutcome resolve_turn(const std::vector<int>& agent_tokens, int target,
                         int completed_turns, const SearchEnvConfig& cfg) {
  TurnOutcome out;
  for (size_t i = 0; i + 1 < agent_tokens.size(); ++i) {
    const bool is_search = agent_tokens[i] == cfg.tok_search();
    const bool is_answer = agent_tokens[i] == cfg.tok_answer();
    const int next = agent_tokens[i + 1];
    if ((is_search || is_answer) && next >= 0 && next < cfg.value_range) {
      if (is_answer) {
        out.done = true;
        out.reward = next == target ? 1.0 : 0.0;
      } else if (next < target) {
        out.feedback = cfg.tok_hint_low();
      } else if (next > target) {
        out.feedback = cfg.tok_hint_high();
      } else {
        out.feedback = cfg.tok_hint_eq();
      }
      break;
    }
  }
  if (completed_turns + 1 >= cfg.max_turns) out.done = true;
  return out;
}

class Enumerator {
 public:
  Enumerator(const SearchEnvConfig& env_cfg, const FeatureConfig& fcfg,
             const PolicyParams& policy, int target, std::size_t max_states)
      : env_(env_cfg),
        fcfg_(fcfg),
        policy_(policy),
        target_(target),
        max_states_(max_states) {}

  // transcript/mask: full token sequence so far; pending: agent tokens of
  // the current partial turn (already part of transcript's tail).
  // env_turns counts completed environment turns (the turn budget);
  // run_index is the mask-run turn index the features see.
  double value(std::vector<int>& transcript, std::vector<int>& mask,
               std::vector<int>& pending, int env_turns, int run_index) {
    const std::string key = transcript_key(transcript, mask);
    const auto it = table_.find(key);
    if (it != table_.end()) return it->second;
    if (table_.size() >= max_states_) {
      throw std::runtime_error(
          "exact_state_values: state-space guard exceeded at " +
          std::to_string(table_.size()) + " states");
    }
    table_.emplace(key, 0.0);  // placeholder; the tree has no cycles

    const ContextFeatures ctx = context_features(fcfg_, transcript, run_index);
    const std::vector<double> logp = log_prob_all(policy_, ctx);
    double v = 0.0;
    for (int tok = 0; tok < env_.vocab_size(); ++tok) {
      v += std::exp(logp[tok]) *
           child_value(transcript, mask, pending, env_turns, run_index, tok);
    }
    table_[key] = v;
    return v;
  }

  // Q^pi(s, tok): expected future reward after emitting `tok` at this state.
  double child_value(std::vector<int>& transcript, std::vector<int>& mask,
                     std::vector<int>& pending, int env_turns, int run_index,
                     int tok) {
    transcript.push_back(tok);
    mask.push_back(1);
    pending.push_back(tok);
    double q = 0.0;
    if (tok == env_.tok_eot() ||
        static_cast<int>(pending.size()) >= env_.max_tokens_per_turn) {
      const TurnOutcome out = resolve_turn(pending, target_, env_turns, env_);
      q = out.reward;
      if (out.feedback >= 0) {
        transcript.push_back(out.feedback);
        mask.push_back(0);
      }
      if (!out.done) {
        std::vector<int> next_pending;
        q += value(transcript, mask, next_pending, env_turns + 1,
                   run_index + (out.feedback >= 0 ? 1 : 0));
      } else {
        table_.emplace(transcript_key(transcript, mask), 0.0);  // terminal
      }
      if (out.feedback >= 0) {
        transcript.pop_back();
        mask.pop_back();
      }
    } else {
      q = value(transcript, mask, pending, env_turns, run_index);
    }
    transcript.pop_back();
    mask.pop_back();
    pending.pop_back();
    return q;
  }

  std::map<std::string, double> take_table() { return std::move(table_); }

 private:
  SearchEnvConfig env_;
  FeatureConfig fcfg_;
  const PolicyParams& policy_;
  int target_;
  std::size_t max_states_;
  std::map<std::string, double> table_;
};

}  // namespace

double ExactValues::at(const std::vector<int>& transcript,
                       const std::vector<int>& mask) const {
  const auto it = table.find(transcript_key(transcript, mask));
  if (it == table.end()) {
    throw std::out_of_range("ExactValues: context not enumerated");
  }
  return it->second;
}

double ExactValues::at(const std::vector<int>& transcript) const {
  return at(transcript, std::vector<int>(transcript.size(), 1));
}

ExactValues exact_state_values(const SearchEnvConfig& env_cfg,
                               const FeatureConfig& fcfg,
                               const PolicyParams& policy, int target,
                               std::size_t max_states) {
  env_cfg.check();
  Enumerator en(env_cfg, fcfg, policy, target, max_states);
  std::vector<int> transcript;
  std::vector<int> mask;
  std::vector<int> pending;
  en.value(transcript, mask, pending, 0, 0);
  ExactValues out;
  out.table = en.take_table();
  out.target = target;
  return out;
}

std::vector<double> exact_token_advantages(const Trajectory& traj,
                                           const SearchEnvConfig& env_cfg,
                                           const ExactValues& values) {
  // Replay the trajectory and read V and Q off the precomputed table.
  std::vector<double> advantages;
  std::vector<int> transcript;
  std::vector<int> mask;
  std::vector<int> pending;
  int env_turns = 0;
  for (const TokenRecord& tok : traj.tokens) {
    if (!tok.loss_mask) {
      transcript.push_back(tok.token_id);  // environment feedback
      mask.push_back(0);
      continue;
    }
    const double v_here = values.at(transcript, mask);
    transcript.push_back(tok.token_id);
    mask.push_back(1);
    pending.push_back(tok.token_id);
    double q;
    if (tok.token_id == env_cfg.tok_eot() ||
        static_cast<int>(pending.size()) >= env_cfg.max_tokens_per_turn) {
      const TurnOutcome out =
          resolve_turn(pending, values.target, env_turns, env_cfg);
      q = out.reward;
      if (!out.done) {
        std::vector<int> next = transcript;
        std::vector<int> next_mask = mask;
        if (out.feedback >= 0) {
          next.push_back(out.feedback);
          next_mask.push_back(0);
        }
        q += values.at(next, next_mask);
      }
      pending.clear();
      ++env_turns;
    } else {
      q = values.at(transcript, mask);
    }
    advantages.push_back(q - v_here);
  }
  return advantages;
}

}  // namespace mtppo
