// Command-line trainer and verification harness for the multi-turn PPO
// library. Subcommands: train, verify, eval, compare.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtppo/checkpoint.hpp"
#include "mtppo/config.hpp"
#include "mtppo/metrics.hpp"
#include "mtppo/oracle.hpp"
#include "mtppo/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

std::string default_out_dir() {
  const char* env = std::getenv("MTPPO_OUT_DIR");
  return env ? env : "out";
}

void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

int run_train(const std::string& config_path, const std::string& out_dir,
              long long seed_override, const std::string& variant_override) {
  mtppo::TrainConfig cfg = mtppo::load_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (!variant_override.empty()) {
    cfg.ppo.variant = mtppo::variant_from_name(variant_override);
  }
  ensure_dir(out_dir);
  mtppo::write_config(cfg, out_dir + "/config.echo");
  mtppo::MetricsWriter writer(out_dir + "/metrics.csv",
                              mtppo::variant_name(cfg.ppo.variant), cfg.seed);
  const mtppo::RunResult result = mtppo::run_training(cfg, &writer, out_dir);
  if (result.aborted) {
    std::fprintf(stderr, "training aborted: %s\n", result.abort_message.c_str());
    return kExitCheckFailure;
  }
  std::printf("trained %d batches; best greedy eval %.4f\n",
              static_cast<int>(result.batches.size()), result.best_eval);
  return kExitOk;
}

int run_verify(std::uint64_t seed, int trials, double tolerance) {
  const mtppo::IdentityReport report =
      mtppo::run_identity_suite(seed, trials, tolerance);
  std::fputs(report.to_text().c_str(), stdout);
  return report.all_passed ? kExitOk : kExitCheckFailure;
}

int run_eval(const std::string& checkpoint, const std::string& config_path,
             int episodes) {
  const mtppo::TrainConfig cfg = mtppo::load_config(config_path);
  const mtppo::PolicyParams policy = mtppo::load_policy(checkpoint);
  const double success = mtppo::greedy_eval(policy, cfg.feature_config(),
                                            cfg.env, episodes);
  std::printf("greedy success rate over %d episodes: %.6f\n", episodes, success);
  return kExitOk;
}

int run_compare(const std::string& config_path, int seeds,
                const std::string& out_dir) {
  const mtppo::TrainConfig base = mtppo::load_config(config_path);
  ensure_dir(out_dir);
  const mtppo::PpoVariant variants[] = {
      mtppo::PpoVariant::TokenPPO, mtppo::PpoVariant::TurnPPO,
      mtppo::PpoVariant::S_PPO, mtppo::PpoVariant::ST_PPO};
  std::vector<mtppo::RunResult> results;
  std::vector<mtppo::LabeledRun> labeled;
  results.reserve(4 * static_cast<size_t>(seeds));
  for (int s = 0; s < seeds; ++s) {
    for (const mtppo::PpoVariant variant : variants) {
      mtppo::TrainConfig cfg = base;
      cfg.ppo.variant = variant;
      cfg.seed = mtppo::derive_seed(base.seed, static_cast<std::uint64_t>(s));
      std::printf("compare: variant=%s seed=%llu\n",
                  mtppo::variant_name(variant).c_str(),
                  static_cast<unsigned long long>(cfg.seed));
      std::fflush(stdout);
      results.push_back(mtppo::run_training(cfg));
      labeled.push_back(mtppo::LabeledRun{mtppo::variant_name(variant),
                                          cfg.seed, &results.back()});
    }
  }
  const std::string path = out_dir + "/compare.csv";
  mtppo::export_metrics(labeled, path);
  std::printf("wrote %s\n", path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-turn PPO trainer (token/turn-level importance sampling "
               "with clipping-bias normalization)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = default_out_dir();
  long long seed_override = -1;
  std::string variant_override;
  auto* train = app.add_subcommand("train", "train from a config file");
  train->add_option("--config", config_path, "run configuration file")->required();
  train->add_option("--out-dir", out_dir, "output directory");
  train->add_option("--seed", seed_override, "override the config seed");
  train->add_option("--variant", variant_override,
                    "override the variant (token|turn|s|st)");

  std::uint64_t verify_seed = 0;
  int trials = 100;
  double tolerance = 1e-4;
  auto* verify = app.add_subcommand("verify", "run the gradient identity suite");
  verify->add_option("--seed", verify_seed, "suite seed");
  verify->add_option("--trials", trials, "number of randomized trials");
  verify->add_option("--tolerance", tolerance,
                     "finite-difference relative tolerance");

  std::string checkpoint;
  int eval_episodes = 200;
  auto* eval = app.add_subcommand("eval", "greedy-evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  eval->add_option("--config", config_path, "run configuration file")->required();
  eval->add_option("--seeds", eval_episodes, "number of held-out episodes");

  int compare_seeds = 3;
  auto* compare = app.add_subcommand(
      "compare", "run all four variants on shared seeds");
  compare->add_option("--config", config_path, "run configuration file")->required();
  compare->add_option("--seeds", compare_seeds, "seeds per variant");
  compare->add_option("--out-dir", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      return run_train(config_path, out_dir, seed_override, variant_override);
    }
    if (*verify) return run_verify(verify_seed, trials, tolerance);
    if (*eval) return run_eval(checkpoint, config_path, eval_episodes);
    if (*compare) return run_compare(config_path, compare_seeds, out_dir);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
