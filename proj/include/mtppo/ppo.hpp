#ifndef MTPPO_PPO_HPP_
#define MTPPO_PPO_HPP_

#include <vector>

#include "mtppo/features.hpp"
#include "mtppo/policy.hpp"
#include "mtppo/trajectory.hpp"

namespace mtppo {

enum class PpoVariant { TokenPPO, TurnPPO, S_PPO, ST_PPO };

// Importance-weight granularity implied by the variant.
inline bool turn_granularity(PpoVariant v) {
  return v == PpoVariant::TurnPPO || v == PpoVariant::ST_PPO;
}
// Whether the gradient is rescaled by the inverse clipping-bias magnitude.
inline bool bias_normalized(PpoVariant v) {
  return v == PpoVariant::S_PPO || v == PpoVariant::ST_PPO;
}

struct PpoConfig {
  PpoVariant variant = PpoVariant::ST_PPO;
  double epsilon = 0.2;
  double kl_coefficient = 0.001;
  double bias_floor = 1.0;     // c_min: scale = 1 / max(|C|, c_min)
  double log_ratio_cap = 30.0; // ratios saturate at exp(+-cap)

  void check() const;
};

// Scalar clipping-bias statistic and companion diagnostics for one
// minibatch.
struct BiasStats {
  double c_value = 0.0;     // batch mean of (1/|y|) sum_{t in B^c} w_t A_t
  double clip_ratio = 0.0;  // fraction of agent tokens with clipping active
  double kl_estimate = 0.0; // mean(logp_old - logp_new) over agent tokens
  int saturation_count = 0; // tokens whose log-ratio hit the cap
};

// exp(logp_new - logp_old), evaluated in log space and saturated at
// exp(+-cap) so extreme ratios stay finite.
double token_ratio(double logp_new, double logp_old, double log_ratio_cap = 30.0);

// Geometric-mean ratio over one turn: exp of the mean log-ratio.
double turn_weight(const std::vector<double>& turn_logp_new,
                   const std::vector<double>& turn_logp_old);

// Clipping-inactive test. Boundary ties (within 1e-12) count as inactive.
bool clip_membership(double advantage, double weight, double epsilon);

// Everything the four variants need from one evaluation pass over a
// minibatch under the current parameters.
struct TokenTerm {
  int trajectory = 0;
  int position = 0;    // token position within the trajectory
  int turn = 0;        // 0-based turn index
  double logp_new = 0.0;
  double logp_old = 0.0;
  double advantage = 0.0;
  double w_token = 0.0;
  double w_used = 0.0;  // token or shared turn weight per the variant
  bool in_b = false;    // clipping inactive at w_used
  // Clip-part gradient coefficient on grad log pi, including the 1/|y| and
  // (for turn granularity) 1/|y^k| factors; excludes the 1/T batch average
  // and the KL term.
  double clip_coeff = 0.0;
};

struct MinibatchEval {
  double objective = 0.0;         // clipped surrogate minus KL penalty
  BiasStats bias;
  std::vector<double> gradient;   // analytic gradient of `objective`
  std::vector<TokenTerm> tokens;
  int trajectories_used = 0;      // degenerate (all-masked) ones are skipped
};

MinibatchEval evaluate_minibatch(const std::vector<Trajectory>& minibatch,
                                 const PolicyParams& policy,
                                 const FeatureConfig& fcfg,
                                 const PpoConfig& config);

double objective_value(const std::vector<Trajectory>& minibatch,
                       const PolicyParams& policy, const FeatureConfig& fcfg,
                       const PpoConfig& config);

std::vector<double> analytic_gradient(const std::vector<Trajectory>& minibatch,
                                      const PolicyParams& policy,
                                      const FeatureConfig& fcfg,
                                      const PpoConfig& config);

BiasStats clipping_bias(const std::vector<Trajectory>& minibatch,
                        const PolicyParams& policy, const FeatureConfig& fcfg,
                        const PpoConfig& config);

// analytic_gradient scaled by 1 / max(|c_value|, bias_floor) for the
// bias-normalized variants; unscaled otherwise. Fills `stats_out` when
// given.
std::vector<double> surrogate_gradient(const std::vector<Trajectory>& minibatch,
                                       const PolicyParams& policy,
                                       const FeatureConfig& fcfg,
                                       const PpoConfig& config,
                                       BiasStats* stats_out = nullptr);

// Token-level gradient decomposition: per-token indicator identity plus,
// when ground-truth advantages are supplied (one vector per trajectory,
// aligned with agent tokens), the three-way off-policy / estimation-error /
// clipping-bias split.
struct DecompositionReport {
  double max_token_residual = 0.0;  // must be exactly 0
  double off_policy_term = 0.0;
  double estimation_error_term = 0.0;
  double clipping_bias_term = 0.0;
  double gradient_coefficient = 0.0;  // batch mean of (1/|y|) sum 1{B} w A
  double three_term_residual = 0.0;   // |off + est - bias - coefficient|
  bool has_exact_values = false;
};

DecompositionReport decomposition_check(
    const std::vector<Trajectory>& minibatch, const PolicyParams& policy,
    const FeatureConfig& fcfg, const PpoConfig& config,
    const std::vector<std::vector<double>>* exact_advantages = nullptr);

}  // namespace mtppo

#endif  // MTPPO_PPO_HPP_
