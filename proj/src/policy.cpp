#include "mtppo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtppo {

// Parameter layout:
//   linear:  W1[feature_dim][vocab_size], logits = W1^T phi
//   hidden:  W1[feature_dim][hidden_dim], W2[hidden_dim][vocab_size],
//            h = tanh(W1^T phi), logits = W2^T h
// Rows are stored contiguously (row = input index).

PolicyParams PolicyParams::zeros(const PolicyConfig& config) {
  if (config.feature_dim <= 0 || config.vocab_size <= 0) {
    throw std::invalid_argument("PolicyParams: bad config");
  }
  PolicyParams p;
  p.config = config;
  p.values.assign(static_cast<size_t>(config.param_count()), 0.0);
  return p;
}

namespace {

std::vector<double> logits_of(const PolicyParams& p,
                              const ContextFeatures& context,
                              std::vector<double>* hidden_out) {
  const PolicyConfig& c = p.config;
  if (c.hidden_dim == 0) {
    std::vector<double> logits(c.vocab_size, 0.0);
    for (int i : context) {
      const double* row = p.values.data() + static_cast<size_t>(i) * c.vocab_size;
      for (int v = 0; v < c.vocab_size; ++v) logits[v] += row[v];
    }
    return logits;
  }
  std::vector<double> z(c.hidden_dim, 0.0);
  for (int i : context) {
    const double* row = p.values.data() + static_cast<size_t>(i) * c.hidden_dim;
    for (int h = 0; h < c.hidden_dim; ++h) z[h] += row[h];
  }
  for (double& x : z) x = std::tanh(x);
  const double* w2 = p.values.data() +
                     static_cast<size_t>(c.feature_dim) * c.hidden_dim;
  std::vector<double> logits(c.vocab_size, 0.0);
  for (int h = 0; h < c.hidden_dim; ++h) {
    const double* row = w2 + static_cast<size_t>(h) * c.vocab_size;
    for (int v = 0; v < c.vocab_size; ++v) logits[v] += z[h] * row[v];
  }
  if (hidden_out) *hidden_out = std::move(z);
  return logits;
}

void log_softmax_inplace(std::vector<double>& logits) {
  double max_logit = logits[0];
  for (double x : logits) max_logit = std::max(max_logit, x);
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - max_logit);
  const double lse = max_logit + std::log(sum);
  for (double& x : logits) x -= lse;
}

// grad += coeff * J^T dlogit, where J is the Jacobian of the logits with
// respect to the parameters at this context.
void backprop_dlogit(const PolicyParams& params, const ContextFeatures& context,
                     const std::vector<double>& hidden,
                     const std::vector<double>& dlogit, double coeff,
                     std::vector<double>& grad) {
  const PolicyConfig& c = params.config;
  if (c.hidden_dim == 0) {
    for (int i : context) {
      double* row = grad.data() + static_cast<size_t>(i) * c.vocab_size;
      for (int v = 0; v < c.vocab_size; ++v) row[v] += coeff * dlogit[v];
    }
    return;
  }
  const size_t w2_off = static_cast<size_t>(c.feature_dim) * c.hidden_dim;
  const double* w2 = params.values.data() + w2_off;
  // dW2[h][v] = h_h * dlogit[v]; dz_h = (1 - h_h^2) * sum_v W2[h][v] dlogit[v]
  for (int h = 0; h < c.hidden_dim; ++h) {
    double* row = grad.data() + w2_off + static_cast<size_t>(h) * c.vocab_size;
    double dh = 0.0;
    const double* w2row = w2 + static_cast<size_t>(h) * c.vocab_size;
    for (int v = 0; v < c.vocab_size; ++v) {
      row[v] += coeff * hidden[h] * dlogit[v];
      dh += w2row[v] * dlogit[v];
    }
    const double dz = (1.0 - hidden[h] * hidden[h]) * dh;
    for (int i : context) {
      grad[static_cast<size_t>(i) * c.hidden_dim + h] += coeff * dz;
    }
  }
}

}  // namespace

std::vector<double> log_prob_all(const PolicyParams& params,
                                 const ContextFeatures& context) {
  std::vector<double> logits = logits_of(params, context, nullptr);
  log_softmax_inplace(logits);
  return logits;
}

double log_prob(const PolicyParams& params, const ContextFeatures& context,
                int token) {
  if (token < 0 || token >= params.config.vocab_size) {
    throw std::invalid_argument("log_prob: token out of vocabulary");
  }
  return log_prob_all(params, context)[token];
}

void accumulate_grad_log_prob(const PolicyParams& params,
                              const ContextFeatures& context, int token,
                              double coeff, std::vector<double>& grad) {
  const PolicyConfig& c = params.config;
  if (token < 0 || token >= c.vocab_size) {
    throw std::invalid_argument("grad_log_prob: token out of vocabulary");
  }
  std::vector<double> hidden;
  std::vector<double> logits = logits_of(params, context, &hidden);
  log_softmax_inplace(logits);
  // dlogit[v] = 1{v = token} - p(v)
  std::vector<double> dlogit(c.vocab_size);
  for (int v = 0; v < c.vocab_size; ++v) dlogit[v] = -std::exp(logits[v]);
  dlogit[token] += 1.0;
  backprop_dlogit(params, context, hidden, dlogit, coeff, grad);
}

double entropy(const PolicyParams& params, const ContextFeatures& context) {
  const std::vector<double> logp = log_prob_all(params, context);
  double h = 0.0;
  for (double lp : logp) h -= std::exp(lp) * lp;
  return h;
}

void accumulate_grad_entropy(const PolicyParams& params,
                             const ContextFeatures& context, double coeff,
                             std::vector<double>& grad) {
  const PolicyConfig& c = params.config;
  std::vector<double> hidden;
  std::vector<double> logits = logits_of(params, context, &hidden);
  log_softmax_inplace(logits);
  double h = 0.0;
  for (double lp : logits) h -= std::exp(lp) * lp;
  // dH/dlogit_v = -p_v (log p_v + H)
  std::vector<double> dlogit(c.vocab_size);
  for (int v = 0; v < c.vocab_size; ++v) {
    dlogit[v] = -std::exp(logits[v]) * (logits[v] + h);
  }
  backprop_dlogit(params, context, hidden, dlogit, coeff, grad);
}

std::vector<double> grad_log_prob(const PolicyParams& params,
                                  const ContextFeatures& context, int token) {
  std::vector<double> grad(params.values.size(), 0.0);
  accumulate_grad_log_prob(params, context, token, 1.0, grad);
  return grad;
}

namespace {

template <typename PickToken>
SampledTurn decode_turn(const PolicyParams& params, const FeatureConfig& fcfg,
                        const std::vector<int>& transcript, int turn_index,
                        int eot_token, int max_len, PickToken pick) {
  SampledTurn out;
  std::vector<int> extended = transcript;
  for (int step = 0; step < max_len; ++step) {
    const ContextFeatures ctx = context_features(fcfg, extended, turn_index);
    const std::vector<double> logp = log_prob_all(params, ctx);
    const int tok = pick(logp);
    out.tokens.push_back(tok);
    out.logps.push_back(logp[tok]);
    extended.push_back(tok);
    if (tok == eot_token) break;
  }
  return out;
}

}  // namespace

SampledTurn sample_turn(const PolicyParams& params, const FeatureConfig& fcfg,
                        const std::vector<int>& transcript, int turn_index,
                        int eot_token, int max_len, Rng& rng) {
  return decode_turn(params, fcfg, transcript, turn_index, eot_token, max_len,
                     [&rng](const std::vector<double>& logp) {
                       const double u = rng.next_double();
                       double acc = 0.0;
                       const int last = static_cast<int>(logp.size()) - 1;
                       for (int v = 0; v < last; ++v) {
                         acc += std::exp(logp[v]);
                         if (u < acc) return v;
                       }
                       return last;
                     });
}

SampledTurn greedy_turn(const PolicyParams& params, const FeatureConfig& fcfg,
                        const std::vector<int>& transcript, int turn_index,
                        int eot_token, int max_len) {
  return decode_turn(params, fcfg, transcript, turn_index, eot_token, max_len,
                     [](const std::vector<double>& logp) {
                       int best = 0;
                       for (int v = 1; v < static_cast<int>(logp.size()); ++v) {
                         if (logp[v] > logp[best]) best = v;
                       }
                       return best;
                     });
}

}  // namespace mtppo
