#include "mtppo/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "mtppo/checkpoint.hpp"
#include "mtppo/metrics.hpp"

namespace mtppo {

void TrainConfig::check() const {
  env.check();
  ppo.check();
  if (batch_trajectories < 1) throw std::invalid_argument("train: B < 1");
  if (minibatch_count < 1) throw std::invalid_argument("train: M < 1");
  if (batch_trajectories % minibatch_count != 0) {
    throw std::invalid_argument("train: B not divisible by M");
  }
  if (policy_lr < 0.0 || critic_lr < 0.0) {
    throw std::invalid_argument("train: negative learning rate");
  }
  if (entropy_coefficient < 0.0) {
    throw std::invalid_argument("train: negative entropy coefficient");
  }
  if (entropy_decay <= 0.0 || entropy_decay > 1.0) {
    throw std::invalid_argument("train: entropy decay outside (0, 1]");
  }
  if (total_batches < 0) throw std::invalid_argument("train: total_batches < 0");
  if (context_window < 1) throw std::invalid_argument("train: context_window < 1");
}

FeatureConfig TrainConfig::feature_config() const {
  return FeatureConfig{env.vocab_size(), context_window, env.max_turns};
}

PolicyConfig TrainConfig::policy_config() const {
  const FeatureConfig f = feature_config();
  return PolicyConfig{f.dim(), env.vocab_size(), hidden_dim};
}

TrainerState make_trainer_state(const TrainConfig& config) {
  config.check();
  TrainerState state{PolicyParams::zeros(config.policy_config()),
                     CriticParams::zeros(config.feature_config().dim()),
                     config.feature_config(), Rng(config.seed)};
  if (config.hidden_dim > 0) {
    // The hidden policy needs symmetry breaking; scale keeps the initial
    // distribution near uniform.
    Rng init(derive_seed(config.seed, 0x1417));
    for (double& w : state.policy.values) w = 0.01 * init.next_gaussian();
  }
  return state;
}

std::vector<Trajectory> collect_batch(const PolicyParams& snapshot,
                                      const FeatureConfig& fcfg,
                                      const SearchEnvConfig& env_cfg,
                                      int batch_size, Rng& rng) {
  std::vector<Trajectory> batch;
  batch.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    Trajectory traj;
    traj.query_seed = rng.next_u64();
    EnvState env = env_reset(traj.query_seed, env_cfg);
    // Feature turn index follows mask runs: a malformed turn leaves no
    // feedback, so the next turn continues the same run and keeps the
    // index. This matches the context reconstruction at training time.
    int run_index = 0;
    while (!env.terminated) {
      const SampledTurn turn =
          sample_turn(snapshot, fcfg, env.transcript, run_index,
                      env_cfg.tok_eot(), env_cfg.max_tokens_per_turn, rng);
      const StepResult step = env_step_turn(env, turn.tokens, env_cfg);
      if (!step.feedback.empty()) ++run_index;
      for (size_t i = 0; i < turn.tokens.size(); ++i) {
        TokenRecord tok;
        tok.token_id = turn.tokens[i];
        tok.logp_old = turn.logps[i];
        tok.loss_mask = true;
        traj.tokens.push_back(tok);
      }
      for (int fb : step.feedback) {
        TokenRecord tok;
        tok.token_id = fb;
        tok.loss_mask = false;
        traj.tokens.push_back(tok);
      }
    }
    traj.terminal_reward = env.reward;
    traj.valid_action_flags = env.valid_action_flags;
    for (int i = static_cast<int>(traj.tokens.size()) - 1; i >= 0; --i) {
      if (traj.tokens[i].loss_mask) {
        traj.tokens[i].reward = env.reward;
        break;
      }
    }
    std::vector<int> mask(traj.tokens.size());
    for (size_t i = 0; i < traj.tokens.size(); ++i) {
      mask[i] = traj.tokens[i].loss_mask ? 1 : 0;
    }
    if (!mask.empty()) traj.turns = segment_turns(mask);
    batch.push_back(std::move(traj));
  }
  return batch;
}

namespace {

void fill_advantages(std::vector<Trajectory>& batch, const CriticParams& critic,
                     const FeatureConfig& fcfg, const GaeConfig& gae) {
  for (Trajectory& traj : batch) {
    std::vector<int> positions;
    std::vector<double> rewards;
    std::vector<double> values;
    for_each_agent_context(traj, fcfg,
                           [&](int pos, int, const ContextFeatures& ctx) {
                             positions.push_back(pos);
                             rewards.push_back(traj.tokens[pos].reward);
                             values.push_back(critic_value(critic, ctx));
                           });
    if (positions.empty()) continue;
    const std::vector<double> adv = gae_advantages(rewards, values, 0.0, gae);
    for (size_t i = 0; i < positions.size(); ++i) {
      TokenRecord& tok = traj.tokens[positions[i]];
      tok.value = values[i];
      tok.advantage = adv[i];
      tok.has_advantage = true;
    }
  }
}

// Mean entropy gradient with the same weighting as the surrogate: tokens
// average within each trajectory, trajectories average across the minibatch.
void add_entropy_gradient(const std::vector<Trajectory>& minibatch,
                          const PolicyParams& policy, const FeatureConfig& fcfg,
                          double coeff, std::vector<double>& grad) {
  int used = 0;
  for (const Trajectory& traj : minibatch) {
    if (traj.agent_token_count() > 0) ++used;
  }
  if (used == 0) return;
  for (const Trajectory& traj : minibatch) {
    const int tokens = traj.agent_token_count();
    if (tokens == 0) continue;
    const double per_token = coeff / (static_cast<double>(tokens) * used);
    for_each_agent_context(traj, fcfg,
                           [&](int, int, const ContextFeatures& ctx) {
                             accumulate_grad_entropy(policy, ctx, per_token, grad);
                           });
  }
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

std::vector<UpdateStats> train_batch(TrainerState& state,
                                     std::vector<Trajectory>& batch,
                                     const TrainConfig& config,
                                     int batch_index, double* value_loss_out) {
  if (static_cast<int>(batch.size()) != config.batch_trajectories) {
    throw std::invalid_argument("train_batch: unexpected batch size");
  }
  // Values and advantages once per batch, against the rollout snapshot.
  fill_advantages(batch, state.critic, state.fcfg, config.gae);

  const int per_minibatch = config.batch_trajectories / config.minibatch_count;
  std::vector<UpdateStats> all_stats;
  for (int m = 0; m < config.minibatch_count; ++m) {
    const std::vector<Trajectory> minibatch(
        batch.begin() + static_cast<long>(m) * per_minibatch,
        batch.begin() + static_cast<long>(m + 1) * per_minibatch);
    BiasStats bias;
    std::vector<double> grad = surrogate_gradient(
        minibatch, state.policy, state.fcfg, config.ppo, &bias);
    const double entropy_coeff =
        config.entropy_coefficient *
        std::pow(config.entropy_decay, static_cast<double>(batch_index));
    if (entropy_coeff > 0.0) {
      add_entropy_gradient(minibatch, state.policy, state.fcfg, entropy_coeff,
                           grad);
    }
    if (!all_finite(grad)) {
      throw TrainAbort("non-finite gradient at batch " +
                       std::to_string(batch_index) + " minibatch " +
                       std::to_string(m + 1) + " (gradient explosion)");
    }
    UpdateStats stats;
    stats.batch = batch_index;
    stats.minibatch = m + 1;
    stats.clip_ratio = bias.clip_ratio;
    stats.kl_estimate = bias.kl_estimate;
    stats.grad_norm = l2_norm(grad);
    stats.bias_abs = std::abs(bias.c_value);
    stats.saturation_count = bias.saturation_count;
    stats.objective =
        objective_value(minibatch, state.policy, state.fcfg, config.ppo);
    for (size_t i = 0; i < grad.size(); ++i) {
      state.policy.values[i] += config.policy_lr * grad[i];
    }
    all_stats.push_back(stats);
  }

  const double value_loss =
      critic_update(state.critic, batch, state.fcfg, config.critic_lr);
  if (value_loss_out) *value_loss_out = value_loss;
  return all_stats;
}

double greedy_eval(const PolicyParams& policy, const FeatureConfig& fcfg,
                   const SearchEnvConfig& env_cfg, int episodes) {
  double total = 0.0;
  for (int j = 0; j < episodes; ++j) {
    // Fixed held-out instance seeds, shared across all runs.
    EnvState env = env_reset(derive_seed(0xe7a1u, j), env_cfg);
    int run_index = 0;  // mask-run convention, as in collect_batch
    while (!env.terminated) {
      const SampledTurn turn =
          greedy_turn(policy, fcfg, env.transcript, run_index,
                      env_cfg.tok_eot(), env_cfg.max_tokens_per_turn);
      const StepResult step = env_step_turn(env, turn.tokens, env_cfg);
      if (!step.feedback.empty()) ++run_index;
    }
    total += env.reward;
  }
  return episodes > 0 ? total / episodes : 0.0;
}

RunResult run_training(const TrainConfig& config, MetricsWriter* writer,
                       const std::string& out_dir) {
  config.check();
  TrainerState state = make_trainer_state(config);
  RunResult result;

  const std::string policy_best =
      out_dir.empty() ? "" : out_dir + "/policy_best.ckpt";
  if (!out_dir.empty()) {
    save_policy(out_dir + "/policy_initial.ckpt", state.policy);
  }

  for (int b = 0; b < config.total_batches; ++b) {
    const PolicyParams snapshot = state.policy.snapshot();
    std::vector<Trajectory> batch = collect_batch(
        snapshot, state.fcfg, config.env, config.batch_trajectories, state.rng);

    BatchMetrics metrics;
    metrics.batch = b;
    int valid_turns = 0;
    int total_turns = 0;
    double adv_sum = 0.0, adv_sq = 0.0;
    int adv_count = 0;
    for (const Trajectory& traj : batch) {
      metrics.success_rate += traj.terminal_reward;
      for (bool flag : traj.valid_action_flags) {
        valid_turns += flag ? 1 : 0;
        ++total_turns;
      }
    }
    metrics.success_rate /= batch.size();
    metrics.valid_action_ratio =
        total_turns > 0 ? static_cast<double>(valid_turns) / total_turns : 0.0;

    std::vector<UpdateStats> stats;
    double value_loss = 0.0;
    try {
      stats = train_batch(state, batch, config, b, &value_loss);
    } catch (const TrainAbort& abort) {
      result.aborted = true;
      result.abort_message = abort.what();
      if (writer) writer->add_batch(metrics);
      break;
    }

    for (const Trajectory& traj : batch) {
      for (const TokenRecord& tok : traj.tokens) {
        if (tok.has_advantage) {
          adv_sum += tok.advantage;
          adv_sq += tok.advantage * tok.advantage;
          ++adv_count;
        }
      }
    }
    if (adv_count > 0) {
      metrics.adv_mean = adv_sum / adv_count;
      metrics.adv_std =
          std::sqrt(std::max(0.0, adv_sq / adv_count -
                                      metrics.adv_mean * metrics.adv_mean));
    }
    for (const UpdateStats& u : stats) {
      metrics.grad_norm += u.grad_norm;
      metrics.bias_abs += u.bias_abs;
      metrics.clip_ratio += u.clip_ratio;
      metrics.kl_estimate += u.kl_estimate;
      metrics.objective += u.objective;
      metrics.saturation_count += u.saturation_count;
    }
    if (!stats.empty()) {
      const double inv = 1.0 / stats.size();
      metrics.grad_norm *= inv;
      metrics.bias_abs *= inv;
      metrics.clip_ratio *= inv;
      metrics.kl_estimate *= inv;
      metrics.objective *= inv;
    }
    metrics.value_loss = value_loss;

    const bool eval_now = config.eval_every > 0 &&
                          ((b + 1) % config.eval_every == 0 ||
                           b + 1 == config.total_batches);
    if (eval_now) {
      metrics.eval_success =
          greedy_eval(state.policy, state.fcfg, config.env, config.eval_episodes);
      if (metrics.eval_success > result.best_eval) {
        result.best_eval = metrics.eval_success;
        if (!policy_best.empty()) save_policy(policy_best, state.policy);
      }
    }

    if (writer) {
      for (const UpdateStats& u : stats) writer->add_update(u, metrics);
      writer->add_batch(metrics);
    }
    for (UpdateStats& u : stats) result.updates.push_back(u);
    result.batches.push_back(metrics);
  }

  result.final_policy = state.policy;
  result.final_critic = state.critic;
  if (!out_dir.empty()) {
    save_policy(out_dir + "/policy_final.ckpt", state.policy);
    save_critic(out_dir + "/critic_final.ckpt", state.critic);
  }
  return result;
}

}  // namespace mtppo
