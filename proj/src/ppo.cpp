#include "mtppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtppo/critic.hpp"

namespace mtppo {

namespace {
constexpr double kBoundaryTol = 1e-12;
}

void PpoConfig::check() const {
  if (epsilon <= 0.0 || epsilon >= 1.0) {
    throw std::invalid_argument("ppo: epsilon outside (0,1)");
  }
  if (bias_floor <= 0.0) throw std::invalid_argument("ppo: bias_floor <= 0");
  if (log_ratio_cap <= 0.0) throw std::invalid_argument("ppo: log_ratio_cap <= 0");
}

double token_ratio(double logp_new, double logp_old, double log_ratio_cap) {
  double delta = logp_new - logp_old;
  delta = std::clamp(delta, -log_ratio_cap, log_ratio_cap);
  return std::exp(delta);
}

double turn_weight(const std::vector<double>& turn_logp_new,
                   const std::vector<double>& turn_logp_old) {
  if (turn_logp_new.empty() || turn_logp_new.size() != turn_logp_old.size()) {
    throw std::invalid_argument("turn_weight: empty turn or length mismatch");
  }
  double sum = 0.0;
  for (size_t i = 0; i < turn_logp_new.size(); ++i) {
    sum += turn_logp_new[i] - turn_logp_old[i];
  }
  return std::exp(sum / static_cast<double>(turn_logp_new.size()));
}

bool clip_membership(double advantage, double weight, double epsilon) {
  if (advantage >= 0.0) return weight <= 1.0 + epsilon + kBoundaryTol;
  return weight >= 1.0 - epsilon - kBoundaryTol;
}

MinibatchEval evaluate_minibatch(const std::vector<Trajectory>& minibatch,
                                 const PolicyParams& policy,
                                 const FeatureConfig& fcfg,
                                 const PpoConfig& config) {
  config.check();
  if (minibatch.empty()) {
    throw std::invalid_argument("evaluate_minibatch: empty minibatch");
  }
  const bool turn_level = turn_granularity(config.variant);

  MinibatchEval eval;
  eval.gradient.assign(policy.values.size(), 0.0);

  struct PendingToken {
    ContextFeatures context;
    size_t term_index;
  };
  std::vector<PendingToken> pending;

  double objective_sum = 0.0;
  double bias_sum = 0.0;
  double kl_sum = 0.0;
  int clipped_tokens = 0;
  int total_tokens = 0;

  for (int ti = 0; ti < static_cast<int>(minibatch.size()); ++ti) {
    const Trajectory& traj = minibatch[ti];
    const int agent_count = traj.agent_token_count();
    if (agent_count == 0) continue;  // degenerate rollout, nothing to train on
    ++eval.trajectories_used;
    const double inv_len = 1.0 / agent_count;

    const size_t first_term = eval.tokens.size();
    for_each_agent_context(
        traj, fcfg, [&](int pos, int turn, const ContextFeatures& ctx) {
          const TokenRecord& tok = traj.tokens[pos];
          if (!tok.has_advantage) {
            throw std::invalid_argument("evaluate_minibatch: advantages missing");
          }
          TokenTerm term;
          term.trajectory = ti;
          term.position = pos;
          term.turn = turn;
          term.logp_old = tok.logp_old;
          term.logp_new = log_prob(policy, ctx, tok.token_id);
          term.advantage = tok.advantage;
          const double delta = term.logp_new - term.logp_old;
          if (delta > config.log_ratio_cap || delta < -config.log_ratio_cap) {
            ++eval.bias.saturation_count;
          }
          term.w_token =
              token_ratio(term.logp_new, term.logp_old, config.log_ratio_cap);
          pending.push_back(PendingToken{ctx, eval.tokens.size()});
          eval.tokens.push_back(std::move(term));
        });

    // Shared turn weights where the variant asks for them.
    if (turn_level) {
      size_t i = first_term;
      while (i < eval.tokens.size()) {
        size_t j = i;
        double log_sum = 0.0;
        while (j < eval.tokens.size() && eval.tokens[j].turn == eval.tokens[i].turn) {
          double d = eval.tokens[j].logp_new - eval.tokens[j].logp_old;
          d = std::clamp(d, -config.log_ratio_cap, config.log_ratio_cap);
          log_sum += d;
          ++j;
        }
        const double w_turn = std::exp(log_sum / static_cast<double>(j - i));
        for (size_t k = i; k < j; ++k) eval.tokens[k].w_used = w_turn;
        i = j;
      }
    } else {
      for (size_t k = first_term; k < eval.tokens.size(); ++k) {
        eval.tokens[k].w_used = eval.tokens[k].w_token;
      }
    }

    double traj_objective = 0.0;
    double traj_bias = 0.0;
    for (size_t k = first_term; k < eval.tokens.size(); ++k) {
      TokenTerm& term = eval.tokens[k];
      term.in_b = clip_membership(term.advantage, term.w_used, config.epsilon);
      const double clipped_w = std::clamp(term.w_used, 1.0 - config.epsilon,
                                          1.0 + config.epsilon);
      traj_objective += std::min(term.w_used * term.advantage,
                                 clipped_w * term.advantage);
      if (!term.in_b) {
        traj_bias += term.w_used * term.advantage;
        ++clipped_tokens;
      }
      kl_sum += term.logp_old - term.logp_new;
      ++total_tokens;
    }

    // Gradient coefficients. Turn level: every token of turn k carries
    // w_k^turn * A^k / (|y| * |y^k|); token level: 1{B} w_t A_t / |y|.
    if (turn_level) {
      size_t i = first_term;
      while (i < eval.tokens.size()) {
        size_t j = i;
        double a_k = 0.0;
        while (j < eval.tokens.size() && eval.tokens[j].turn == eval.tokens[i].turn) {
          if (eval.tokens[j].in_b) a_k += eval.tokens[j].advantage;
          ++j;
        }
        const double turn_len = static_cast<double>(j - i);
        const double coeff =
            eval.tokens[i].w_used * a_k / (agent_count * turn_len);
        for (size_t k = i; k < j; ++k) eval.tokens[k].clip_coeff = coeff;
        i = j;
      }
    } else {
      for (size_t k = first_term; k < eval.tokens.size(); ++k) {
        TokenTerm& term = eval.tokens[k];
        term.clip_coeff =
            term.in_b ? term.w_token * term.advantage * inv_len : 0.0;
      }
    }

    objective_sum += inv_len * traj_objective;
    bias_sum += inv_len * traj_bias;
  }

  if (eval.trajectories_used == 0) {
    throw std::invalid_argument("evaluate_minibatch: no agent tokens in minibatch");
  }
  const double inv_t = 1.0 / eval.trajectories_used;

  // KL penalty enters the objective as -kl_coefficient * mean(logp_old -
  // logp_new); its gradient adds kl_coefficient / |y| per token.
  double kl_penalty = 0.0;
  for (size_t k = 0; k < eval.tokens.size(); ++k) {
    const TokenTerm& term = eval.tokens[k];
    const int agent_count = minibatch[term.trajectory].agent_token_count();
    kl_penalty += (term.logp_old - term.logp_new) / agent_count;
  }
  eval.objective = inv_t * (objective_sum - config.kl_coefficient * kl_penalty);

  for (const PendingToken& pt : pending) {
    const TokenTerm& term = eval.tokens[pt.term_index];
    const int agent_count = minibatch[term.trajectory].agent_token_count();
    const double coeff =
        inv_t * (term.clip_coeff + config.kl_coefficient / agent_count);
    accumulate_grad_log_prob(policy, pt.context,
                             minibatch[term.trajectory].tokens[term.position].token_id,
                             coeff, eval.gradient);
  }

  eval.bias.c_value = inv_t * bias_sum;
  eval.bias.clip_ratio =
      total_tokens > 0 ? static_cast<double>(clipped_tokens) / total_tokens : 0.0;
  eval.bias.kl_estimate = total_tokens > 0 ? kl_sum / total_tokens : 0.0;
  return eval;
}

double objective_value(const std::vector<Trajectory>& minibatch,
                       const PolicyParams& policy, const FeatureConfig& fcfg,
                       const PpoConfig& config) {
  return evaluate_minibatch(minibatch, policy, fcfg, config).objective;
}

std::vector<double> analytic_gradient(const std::vector<Trajectory>& minibatch,
                                      const PolicyParams& policy,
                                      const FeatureConfig& fcfg,
                                      const PpoConfig& config) {
  return std::move(evaluate_minibatch(minibatch, policy, fcfg, config).gradient);
}

BiasStats clipping_bias(const std::vector<Trajectory>& minibatch,
                        const PolicyParams& policy, const FeatureConfig& fcfg,
                        const PpoConfig& config) {
  return evaluate_minibatch(minibatch, policy, fcfg, config).bias;
}

std::vector<double> surrogate_gradient(const std::vector<Trajectory>& minibatch,
                                       const PolicyParams& policy,
                                       const FeatureConfig& fcfg,
                                       const PpoConfig& config,
                                       BiasStats* stats_out) {
  MinibatchEval eval = evaluate_minibatch(minibatch, policy, fcfg, config);
  if (bias_normalized(config.variant)) {
    const double scale =
        1.0 / std::max(std::abs(eval.bias.c_value), config.bias_floor);
    for (double& g : eval.gradient) g *= scale;
  }
  if (stats_out) *stats_out = eval.bias;
  return std::move(eval.gradient);
}

DecompositionReport decomposition_check(
    const std::vector<Trajectory>& minibatch, const PolicyParams& policy,
    const FeatureConfig& fcfg, const PpoConfig& config,
    const std::vector<std::vector<double>>* exact_advantages) {
  if (turn_granularity(config.variant)) {
    throw std::invalid_argument(
        "decomposition_check: stated at token granularity only");
  }
  const MinibatchEval eval = evaluate_minibatch(minibatch, policy, fcfg, config);

  DecompositionReport report;
  report.has_exact_values = exact_advantages != nullptr;

  // Running index of the agent token within its trajectory, for aligning
  // with the exact-advantage vectors.
  int prev_traj = -1;
  int agent_idx = 0;
  for (const TokenTerm& term : eval.tokens) {
    if (term.trajectory != prev_traj) {
      prev_traj = term.trajectory;
      agent_idx = 0;
    }
    const double wa = term.w_token * term.advantage;
    const double unclipped_minus_clipped = wa - (term.in_b ? 0.0 : wa);
    const double kept = term.in_b ? wa : 0.0;
    report.max_token_residual = std::max(
        report.max_token_residual, std::abs(unclipped_minus_clipped - kept));

    const int agent_count = minibatch[term.trajectory].agent_token_count();
    const double norm = 1.0 / (eval.trajectories_used * agent_count);
    report.gradient_coefficient += norm * kept;
    if (!term.in_b) report.clipping_bias_term += norm * wa;
    if (exact_advantages) {
      const double a_pi = (*exact_advantages)[term.trajectory][agent_idx];
      report.off_policy_term += norm * term.w_token * a_pi;
      report.estimation_error_term +=
          norm * term.w_token * (term.advantage - a_pi);
    } else {
      report.off_policy_term += norm * wa;
    }
    ++agent_idx;
  }
  report.three_term_residual =
      std::abs(report.off_policy_term + report.estimation_error_term -
               report.clipping_bias_term - report.gradient_coefficient);
  return report;
}

}  // namespace mtppo
