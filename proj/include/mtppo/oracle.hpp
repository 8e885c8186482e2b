#ifndef MTPPO_ORACLE_HPP_
#define MTPPO_ORACLE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mtppo {

// Central finite differences, one coordinate at a time. Independent of the
// analytic gradient path by construction.
std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& params, double step = 1e-5);

struct IdentityCheck {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::uint64_t worst_trial_seed = 0;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  int trials = 0;
  bool all_passed = true;

  std::string to_text() const;  // deterministic formatting
};

// Randomized verification battery: for each trial, a random small policy
// and off-policy rollouts, then (a) analytic gradients vs finite
// differences for the token- and turn-level objectives, (b) the per-token
// decomposition identity, (c) equal per-token credit coefficients within
// each turn, (d) collinearity of the bias-normalized gradients with their
// unnormalized counterparts. Trials whose ratios land within 1e-6 of a
// clip boundary are resampled (the objective has kinks there).
IdentityReport run_identity_suite(std::uint64_t seed, int trials,
                                  double fd_tolerance = 1e-4);

}  // namespace mtppo

#endif  // MTPPO_ORACLE_HPP_
