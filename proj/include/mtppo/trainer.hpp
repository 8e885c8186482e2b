#ifndef MTPPO_TRAINER_HPP_
#define MTPPO_TRAINER_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtppo/critic.hpp"
#include "mtppo/env_search.hpp"
#include "mtppo/ppo.hpp"
#include "mtppo/trajectory.hpp"

namespace mtppo {

struct TrainConfig {
  int batch_trajectories = 64;  // B
  int minibatch_count = 2;      // M sequential updates, M-1 off-policy
  double policy_lr = 0.05;
  double critic_lr = 0.5;  // 10x the policy rate by default
  double entropy_coefficient = 0.0;  // exploration bonus weight
  double entropy_decay = 1.0;        // per-batch multiplier on the bonus
  int total_batches = 300;
  int eval_every = 10;
  int eval_episodes = 200;
  std::uint64_t seed = 0;
  int context_window = 4;
  int hidden_dim = 0;
  PpoConfig ppo;
  GaeConfig gae;
  SearchEnvConfig env;

  void check() const;
  FeatureConfig feature_config() const;
  PolicyConfig policy_config() const;
};

struct UpdateStats {
  int batch = 0;
  int minibatch = 0;  // 1-based; minibatch 1 is exactly on-policy
  double clip_ratio = 0.0;
  double kl_estimate = 0.0;
  double grad_norm = 0.0;     // L2 norm of the applied surrogate gradient
  double bias_abs = 0.0;      // |C| of the minibatch
  double objective = 0.0;
  int saturation_count = 0;
};

struct BatchMetrics {
  int batch = 0;
  double success_rate = 0.0;        // mean terminal reward of the rollouts
  double valid_action_ratio = 0.0;  // valid turns / total turns
  double adv_mean = 0.0;
  double adv_std = 0.0;
  double grad_norm = 0.0;  // means over the batch's minibatch updates
  double bias_abs = 0.0;
  double clip_ratio = 0.0;
  double kl_estimate = 0.0;
  double objective = 0.0;
  double value_loss = 0.0;
  int saturation_count = 0;
  double eval_success = -1.0;  // greedy evaluation; -1 when not run
};

struct TrainerState {
  PolicyParams policy;
  CriticParams critic;
  FeatureConfig fcfg;
  Rng rng;
};

TrainerState make_trainer_state(const TrainConfig& config);

// Thrown when a gradient goes non-finite; the run stops with metrics
// already flushed.
struct TrainAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// B complete trajectories sampled from the frozen snapshot, turns
// segmented, terminal rewards attached, logp_old recorded.
std::vector<Trajectory> collect_batch(const PolicyParams& snapshot,
                                      const FeatureConfig& fcfg,
                                      const SearchEnvConfig& env_cfg,
                                      int batch_size, Rng& rng);

// Fills values and GAE advantages against the rollout snapshot (computed
// once, frozen across minibatches), then runs M sequential policy updates
// followed by one critic step. Returns per-minibatch stats; value_loss_out
// receives the critic's pre-update loss.
std::vector<UpdateStats> train_batch(TrainerState& state,
                                     std::vector<Trajectory>& batch,
                                     const TrainConfig& config,
                                     int batch_index, double* value_loss_out);

// Mean reward of argmax decoding over `episodes` fixed held-out instances
// (shared across runs so evaluations are comparable).
double greedy_eval(const PolicyParams& policy, const FeatureConfig& fcfg,
                   const SearchEnvConfig& env_cfg, int episodes);

struct RunResult {
  std::vector<UpdateStats> updates;
  std::vector<BatchMetrics> batches;
  bool aborted = false;
  std::string abort_message;
  double best_eval = -1.0;
  PolicyParams final_policy;
  CriticParams final_critic;
};

class MetricsWriter;  // metrics.hpp

// Algorithm outer loop. When `writer` is given, rows are appended and
// flushed as they are produced; when `out_dir` is nonempty, checkpoints are
// written at the end and at the best evaluation.
RunResult run_training(const TrainConfig& config, MetricsWriter* writer = nullptr,
                       const std::string& out_dir = "");

}  // namespace mtppo

#endif  // MTPPO_TRAINER_HPP_
