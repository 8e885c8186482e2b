#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtppo/checkpoint.hpp"
#include "mtppo/config.hpp"
#include "mtppo/metrics.hpp"
#include "mtppo/rng.hpp"

using namespace mtppo;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("mtppo_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("variant names round-trip") {
  for (PpoVariant v : {PpoVariant::TokenPPO, PpoVariant::TurnPPO,
                       PpoVariant::S_PPO, PpoVariant::ST_PPO}) {
    CHECK(variant_from_name(variant_name(v)) == v);
  }
  CHECK(variant_name(PpoVariant::TokenPPO) == "token");
  CHECK(variant_name(PpoVariant::TurnPPO) == "turn");
  CHECK(variant_name(PpoVariant::S_PPO) == "s");
  CHECK(variant_name(PpoVariant::ST_PPO) == "st");
  CHECK_THROWS_AS(variant_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("config text round-trips every field") {
  TrainConfig cfg;
  cfg.batch_trajectories = 32;
  cfg.minibatch_count = 4;
  cfg.policy_lr = 0.0125;
  cfg.critic_lr = 0.25;
  cfg.entropy_coefficient = 0.0375;
  cfg.entropy_decay = 0.995;
  cfg.total_batches = 120;
  cfg.eval_every = 5;
  cfg.eval_episodes = 100;
  cfg.seed = 987654321;
  cfg.context_window = 3;
  cfg.hidden_dim = 6;
  cfg.ppo.variant = PpoVariant::S_PPO;
  cfg.ppo.epsilon = 0.15;
  cfg.ppo.kl_coefficient = 0.002;
  cfg.ppo.bias_floor = 1.5;
  cfg.ppo.log_ratio_cap = 25.0;
  cfg.gae.gamma = 0.97;
  cfg.gae.lambda = 0.9;
  cfg.env.value_range = 8;
  cfg.env.max_turns = 2;
  cfg.env.max_tokens_per_turn = 5;

  const TrainConfig back = parse_config_text(config_to_text(cfg));
  CHECK(back.batch_trajectories == cfg.batch_trajectories);
  CHECK(back.minibatch_count == cfg.minibatch_count);
  CHECK(back.policy_lr == cfg.policy_lr);
  CHECK(back.critic_lr == cfg.critic_lr);
  CHECK(back.entropy_coefficient == cfg.entropy_coefficient);
  CHECK(back.entropy_decay == cfg.entropy_decay);
  CHECK(back.total_batches == cfg.total_batches);
  CHECK(back.eval_every == cfg.eval_every);
  CHECK(back.eval_episodes == cfg.eval_episodes);
  CHECK(back.seed == cfg.seed);
  CHECK(back.context_window == cfg.context_window);
  CHECK(back.hidden_dim == cfg.hidden_dim);
  CHECK(back.ppo.variant == cfg.ppo.variant);
  CHECK(back.ppo.epsilon == cfg.ppo.epsilon);
  CHECK(back.ppo.kl_coefficient == cfg.ppo.kl_coefficient);
  CHECK(back.ppo.bias_floor == cfg.ppo.bias_floor);
  CHECK(back.ppo.log_ratio_cap == cfg.ppo.log_ratio_cap);
  CHECK(back.gae.gamma == cfg.gae.gamma);
  CHECK(back.gae.lambda == cfg.gae.lambda);
  CHECK(back.env.value_range == cfg.env.value_range);
  CHECK(back.env.max_turns == cfg.env.max_turns);
  CHECK(back.env.max_tokens_per_turn == cfg.env.max_tokens_per_turn);

  // Echo of an echo is stable.
  CHECK(config_to_text(back) == config_to_text(cfg));
}

TEST_CASE("config parsing accepts comments and rejects unknown keys") {
  const TrainConfig cfg = parse_config_text(
      "# a comment\nseed = 5\nvariant = turn\n\nvalue_range = 6\n");
  CHECK(cfg.seed == 5);
  CHECK(cfg.ppo.variant == PpoVariant::TurnPPO);
  CHECK(cfg.env.value_range == 6);
  CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("seed 5\n"), std::invalid_argument);
}

TEST_CASE("missing config file names the path") {
  CHECK_THROWS_WITH_AS(load_config("definitely_missing.cfg"),
                       doctest::Contains("config not found"),
                       std::invalid_argument);
}

TEST_CASE("config file write/load round-trip") {
  TempFile tmp("config.cfg");
  TrainConfig cfg;
  cfg.seed = 31337;
  cfg.policy_lr = 1.0 / 3.0;  // needs full precision to survive
  write_config(cfg, tmp.path);
  const TrainConfig back = load_config(tmp.path);
  CHECK(back.seed == cfg.seed);
  CHECK(back.policy_lr == cfg.policy_lr);
}

TEST_CASE("policy checkpoints round-trip bit-exactly") {
  TempFile tmp("policy.ckpt");
  Rng rng(8);
  for (int hidden : {0, 4}) {
    PolicyParams params = PolicyParams::zeros({17, 9, hidden});
    for (double& w : params.values) w = rng.next_gaussian() * 1e3;
    save_policy(tmp.path, params);
    const PolicyParams back = load_policy(tmp.path);
    CHECK(back.config.feature_dim == 17);
    CHECK(back.config.vocab_size == 9);
    CHECK(back.config.hidden_dim == hidden);
    CHECK(back.values == params.values);
  }
  CHECK_THROWS_AS(load_policy("definitely_missing.ckpt"),
                  std::invalid_argument);
}

TEST_CASE("critic checkpoints round-trip bit-exactly") {
  TempFile tmp("critic.ckpt");
  Rng rng(9);
  CriticParams critic = CriticParams::zeros(23);
  for (double& w : critic.values) w = rng.next_gaussian();
  save_critic(tmp.path, critic);
  const CriticParams back = load_critic(tmp.path);
  CHECK(back.values == critic.values);
}

TEST_CASE("metrics header carries the documented schema") {
  const std::string header = MetricsWriter::header();
  for (const char* column :
       {"batch", "minibatch", "variant", "seed", "clip_ratio", "kl",
        "grad_norm", "bias_abs", "success_rate", "valid_action_ratio",
        "adv_mean", "adv_std", "objective", "value_loss", "saturation",
        "eval_success"}) {
    INFO(column);
    CHECK(header.find(column) != std::string::npos);
  }
}

TEST_CASE("export_metrics with no runs is header-only") {
  TempFile tmp("empty.csv");
  export_metrics({}, tmp.path);
  CHECK(read_file(tmp.path) == MetricsWriter::header());
}

TEST_CASE("training metrics files are byte-identical across reruns") {
  TrainConfig cfg;
  cfg.env.value_range = 4;
  cfg.env.max_turns = 2;
  cfg.env.max_tokens_per_turn = 4;
  cfg.batch_trajectories = 8;
  cfg.minibatch_count = 2;
  cfg.total_batches = 3;
  cfg.eval_every = 2;
  cfg.eval_episodes = 20;
  cfg.context_window = 2;
  cfg.seed = 100;

  TempFile a("metrics_a.csv");
  TempFile b("metrics_b.csv");
  {
    MetricsWriter writer(a.path, variant_name(cfg.ppo.variant), cfg.seed);
    run_training(cfg, &writer);
  }
  {
    MetricsWriter writer(b.path, variant_name(cfg.ppo.variant), cfg.seed);
    run_training(cfg, &writer);
  }
  const std::string text_a = read_file(a.path);
  CHECK(text_a == read_file(b.path));
  CHECK(text_a.rfind(MetricsWriter::header(), 0) == 0);
  // 3 batches x (2 update rows + 1 batch row) + header.
  int lines = 0;
  for (char c : text_a) lines += c == '\n';
  CHECK(lines == 1 + 3 * 3);
}

TEST_CASE("export_metrics emits rows for every labeled run") {
  TrainConfig cfg;
  cfg.env.value_range = 4;
  cfg.env.max_turns = 2;
  cfg.env.max_tokens_per_turn = 4;
  cfg.batch_trajectories = 4;
  cfg.minibatch_count = 2;
  cfg.total_batches = 2;
  cfg.eval_every = 0;
  cfg.context_window = 2;
  cfg.seed = 11;
  const RunResult run_a = run_training(cfg);
  cfg.ppo.variant = PpoVariant::ST_PPO;
  const RunResult run_b = run_training(cfg);

  TempFile tmp("joined.csv");
  export_metrics({LabeledRun{"token", 11, &run_a}, LabeledRun{"st", 11, &run_b}},
                 tmp.path);
  const std::string text = read_file(tmp.path);
  CHECK(text.find(",token,") != std::string::npos);
  CHECK(text.find(",st,") != std::string::npos);
  int lines = 0;
  for (char c : text) lines += c == '\n';
  // Two runs, each 2 batches x (2 updates + 1 batch row), plus the header.
  CHECK(lines == 1 + 2 * 2 * 3);
}
