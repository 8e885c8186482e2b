#ifndef MTPPO_POLICY_HPP_
#define MTPPO_POLICY_HPP_

#include <vector>

#include "mtppo/features.hpp"
#include "mtppo/rng.hpp"

namespace mtppo {

// Softmax policy over the discrete vocabulary. The default is a linear
// head on the sparse context features; hidden_dim > 0 inserts one tanh
// layer with closed-form backpropagation.
struct PolicyConfig {
  int feature_dim = 0;
  int vocab_size = 0;
  int hidden_dim = 0;  // 0 = linear

  int param_count() const {
    return hidden_dim > 0 ? feature_dim * hidden_dim + hidden_dim * vocab_size
                          : feature_dim * vocab_size;
  }
};

struct PolicyParams {
  PolicyConfig config;
  std::vector<double> values;  // flat, see layout in policy.cpp

  static PolicyParams zeros(const PolicyConfig& config);
  // Deep immutable copy of the live parameters (pi_old).
  PolicyParams snapshot() const { return *this; }
};

// Log-softmax over the whole vocabulary at this context.
std::vector<double> log_prob_all(const PolicyParams& params,
                                 const ContextFeatures& context);

double log_prob(const PolicyParams& params, const ContextFeatures& context,
                int token);

// Analytic gradient of log_prob with respect to every parameter.
std::vector<double> grad_log_prob(const PolicyParams& params,
                                  const ContextFeatures& context, int token);

// grad += coeff * grad_log_prob(params, context, token), without
// materializing the per-token gradient.
void accumulate_grad_log_prob(const PolicyParams& params,
                              const ContextFeatures& context, int token,
                              double coeff, std::vector<double>& grad);

// Shannon entropy of the token distribution at this context.
double entropy(const PolicyParams& params, const ContextFeatures& context);

// grad += coeff * dH/dtheta for the entropy at this context. Used as an
// exploration bonus during training; it is not part of the surrogate.
void accumulate_grad_entropy(const PolicyParams& params,
                             const ContextFeatures& context, double coeff,
                             std::vector<double>& grad);

struct SampledTurn {
  std::vector<int> tokens;   // ends with EOT unless truncated at max_len
  std::vector<double> logps; // behavior log-probability per emitted token
};

// Autoregressive sampling at temperature 1 until EOT or max_len tokens.
// `transcript` is the episode transcript before this turn; emitted tokens
// extend the context window as they are produced.
SampledTurn sample_turn(const PolicyParams& params, const FeatureConfig& fcfg,
                        const std::vector<int>& transcript, int turn_index,
                        int eot_token, int max_len, Rng& rng);

// Greedy (argmax) decoding with the same contract as sample_turn.
SampledTurn greedy_turn(const PolicyParams& params, const FeatureConfig& fcfg,
                        const std::vector<int>& transcript, int turn_index,
                        int eot_token, int max_len);

}  // namespace mtppo

#endif  // MTPPO_POLICY_HPP_
