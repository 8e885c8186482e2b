#include "mtppo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "mtppo/critic.hpp"
#include "mtppo/ppo.hpp"
#include "mtppo/trainer.hpp"

namespace mtppo {

std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& params, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_gradient: step <= 0");
  std::vector<double> grad(params.size());
  std::vector<double> point = params;
  for (size_t i = 0; i < params.size(); ++i) {
    point[i] = params[i] + step;
    const double up = objective(point);
    point[i] = params[i] - step;
    const double down = objective(point);
    point[i] = params[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

namespace {

struct TrialSetup {
  SearchEnvConfig env;
  FeatureConfig fcfg;
  PolicyParams policy;       // evaluation policy (off-policy w.r.t. rollouts)
  std::vector<Trajectory> minibatch;
};

double max_abs_diff_scaled(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double scale = 1e-8;
  for (double x : b) scale = std::max(scale, std::abs(x));
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// Any importance weight within 1e-6 of a clip boundary makes the objective
// non-differentiable; such draws are rejected and the policy re-perturbed.
bool near_kink(const TrialSetup& setup, const PpoConfig& cfg) {
  const MinibatchEval eval =
      evaluate_minibatch(setup.minibatch, setup.policy, setup.fcfg, cfg);
  for (const TokenTerm& term : eval.tokens) {
    if (std::abs(term.w_used - (1.0 + cfg.epsilon)) < 1e-6) return true;
    if (std::abs(term.w_used - (1.0 - cfg.epsilon)) < 1e-6) return true;
  }
  return false;
}

TrialSetup make_trial(std::uint64_t trial_seed, const PpoConfig& token_cfg,
                      const PpoConfig& turn_cfg) {
  Rng rng(trial_seed);
  TrialSetup setup;
  setup.env.value_range = 2 + static_cast<int>(rng.next_below(3));  // 2..4
  setup.env.max_turns = 2 + static_cast<int>(rng.next_below(2));    // 2..3
  setup.env.max_tokens_per_turn = 4 + static_cast<int>(rng.next_below(3));
  setup.fcfg = FeatureConfig{setup.env.vocab_size(),
                             2 + static_cast<int>(rng.next_below(2)),
                             setup.env.max_turns};
  // Every third trial exercises the one-hidden-layer policy.
  const int hidden = trial_seed % 3 == 0 ? 6 : 0;
  const PolicyConfig pcfg{setup.fcfg.dim(), setup.env.vocab_size(), hidden};

  PolicyParams behavior = PolicyParams::zeros(pcfg);
  for (double& w : behavior.values) w = 0.4 * rng.next_gaussian();

  setup.minibatch =
      collect_batch(behavior, setup.fcfg, setup.env,
                    2 + static_cast<int>(rng.next_below(2)), rng);

  // Random critic supplies the values; GAE at the paper defaults fills the
  // advantages the objectives consume.
  CriticParams critic = CriticParams::zeros(setup.fcfg.dim());
  for (double& w : critic.values) w = 0.3 * rng.next_gaussian();
  for (Trajectory& traj : setup.minibatch) {
    std::vector<int> positions;
    std::vector<double> rewards, values;
    for_each_agent_context(traj, setup.fcfg,
                           [&](int pos, int, const ContextFeatures& ctx) {
                             positions.push_back(pos);
                             rewards.push_back(traj.tokens[pos].reward);
                             values.push_back(critic_value(critic, ctx));
                           });
    const std::vector<double> adv =
        gae_advantages(rewards, values, 0.0, GaeConfig{1.0, 1.0});
    for (size_t i = 0; i < positions.size(); ++i) {
      traj.tokens[positions[i]].value = values[i];
      traj.tokens[positions[i]].advantage = adv[i];
      traj.tokens[positions[i]].has_advantage = true;
    }
  }

  // Perturb away from the behavior policy so ratios differ from 1;
  // re-perturb while any weight sits next to a clip boundary.
  for (int attempt = 0; attempt < 64; ++attempt) {
    setup.policy = behavior;
    for (double& w : setup.policy.values) w += 0.15 * rng.next_gaussian();
    if (!near_kink(setup, token_cfg) && !near_kink(setup, turn_cfg)) {
      return setup;
    }
  }
  throw std::runtime_error("run_identity_suite: could not avoid clip kinks");
}

void record(IdentityCheck& check, double residual, std::uint64_t trial_seed) {
  if (residual > check.max_residual) {
    check.max_residual = residual;
    check.worst_trial_seed = trial_seed;
  }
}

}  // namespace

IdentityReport run_identity_suite(std::uint64_t seed, int trials,
                                  double fd_tolerance) {
  if (trials < 1) throw std::invalid_argument("run_identity_suite: trials < 1");

  PpoConfig token_cfg;
  token_cfg.variant = PpoVariant::TokenPPO;
  PpoConfig turn_cfg;
  turn_cfg.variant = PpoVariant::TurnPPO;
  PpoConfig s_cfg = token_cfg;
  s_cfg.variant = PpoVariant::S_PPO;
  PpoConfig st_cfg = turn_cfg;
  st_cfg.variant = PpoVariant::ST_PPO;

  IdentityReport report;
  report.trials = trials;
  report.checks = {
      IdentityCheck{"token_gradient_vs_finite_diff", 0.0, fd_tolerance},
      IdentityCheck{"turn_gradient_vs_finite_diff", 0.0, fd_tolerance},
      IdentityCheck{"decomposition_token_residual", 0.0, 0.0},
      IdentityCheck{"decomposition_three_term", 0.0, 1e-10},
      IdentityCheck{"turn_credit_sharing", 0.0, 0.0},
      IdentityCheck{"st_turn_collinearity", 0.0, 1e-9},
      IdentityCheck{"s_token_collinearity", 0.0, 1e-9},
  };
  IdentityCheck& fd_token = report.checks[0];
  IdentityCheck& fd_turn = report.checks[1];
  IdentityCheck& decomp_residual = report.checks[2];
  IdentityCheck& decomp_sum = report.checks[3];
  IdentityCheck& credit = report.checks[4];
  IdentityCheck& collinear_st = report.checks[5];
  IdentityCheck& collinear_s = report.checks[6];

  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(seed, trial);
    const TrialSetup setup = make_trial(trial_seed, token_cfg, turn_cfg);

    const auto fd_of = [&](const PpoConfig& cfg) {
      PolicyParams probe = setup.policy;
      return finite_diff_gradient(
          [&](const std::vector<double>& values) {
            probe.values = values;
            return objective_value(setup.minibatch, probe, setup.fcfg, cfg);
          },
          setup.policy.values, 1e-5);
    };

    // (a) Analytic gradients vs central differences.
    const std::vector<double> token_grad =
        analytic_gradient(setup.minibatch, setup.policy, setup.fcfg, token_cfg);
    const std::vector<double> turn_grad =
        analytic_gradient(setup.minibatch, setup.policy, setup.fcfg, turn_cfg);
    record(fd_token, max_abs_diff_scaled(token_grad, fd_of(token_cfg)),
           trial_seed);
    record(fd_turn, max_abs_diff_scaled(turn_grad, fd_of(turn_cfg)), trial_seed);

    // (b) Per-token decomposition identity.
    const DecompositionReport decomp = decomposition_check(
        setup.minibatch, setup.policy, setup.fcfg, token_cfg);
    record(decomp_residual, decomp.max_token_residual, trial_seed);
    record(decomp_sum, decomp.three_term_residual, trial_seed);

    // (c) Equal per-token coefficients within every turn, matching
    // w_k^turn * A^k / (|y| * |y^k|).
    const MinibatchEval turn_eval =
        evaluate_minibatch(setup.minibatch, setup.policy, setup.fcfg, turn_cfg);
    size_t i = 0;
    while (i < turn_eval.tokens.size()) {
      size_t j = i;
      double a_k = 0.0;
      while (j < turn_eval.tokens.size() &&
             turn_eval.tokens[j].trajectory == turn_eval.tokens[i].trajectory &&
             turn_eval.tokens[j].turn == turn_eval.tokens[i].turn) {
        if (turn_eval.tokens[j].in_b) a_k += turn_eval.tokens[j].advantage;
        ++j;
      }
      const int agent_count =
          setup.minibatch[turn_eval.tokens[i].trajectory].agent_token_count();
      const double expected = turn_eval.tokens[i].w_used * a_k /
                              (agent_count * static_cast<double>(j - i));
      for (size_t k = i; k < j; ++k) {
        record(credit, std::abs(turn_eval.tokens[k].clip_coeff - expected),
               trial_seed);
      }
      i = j;
    }

    // (d) Bias-normalized gradients are positively collinear with their
    // unnormalized counterparts.
    const auto cosine_residual = [](const std::vector<double>& a,
                                    const std::vector<double>& b) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
      }
      if (na == 0.0 || nb == 0.0) return 0.0;
      return std::abs(1.0 - dot / std::sqrt(na * nb));
    };
    record(collinear_st,
           cosine_residual(surrogate_gradient(setup.minibatch, setup.policy,
                                              setup.fcfg, st_cfg),
                           turn_grad),
           trial_seed);
    record(collinear_s,
           cosine_residual(surrogate_gradient(setup.minibatch, setup.policy,
                                              setup.fcfg, s_cfg),
                           token_grad),
           trial_seed);
  }

  for (IdentityCheck& check : report.checks) {
    check.passed = check.max_residual <= check.tolerance;
    report.all_passed = report.all_passed && check.passed;
  }
  return report;
}

std::string IdentityReport::to_text() const {
  std::ostringstream out;
  out << "identity suite: " << trials << " trials\n";
  char buf[64];
  for (const IdentityCheck& check : checks) {
    std::snprintf(buf, sizeof buf, "%.6e", check.max_residual);
    out << (check.passed ? "PASS" : "FAIL") << ' ' << check.name
        << " max_residual=" << buf;
    std::snprintf(buf, sizeof buf, "%.1e", check.tolerance);
    out << " tolerance=" << buf;
    if (!check.passed) out << " worst_trial_seed=" << check.worst_trial_seed;
    out << '\n';
  }
  out << (all_passed ? "ALL CHECKS PASSED" : "CHECK FAILURES PRESENT") << '\n';
  return out.str();
}

}  // namespace mtppo
