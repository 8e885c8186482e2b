#include "mtppo/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mtppo/metrics.hpp"

namespace mtppo {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  return static_cast<int>(x);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: missing '=' on line " +
                                  std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "variant") cfg.ppo.variant = variant_from_name(value);
    else if (key == "epsilon") cfg.ppo.epsilon = to_double(key, value);
    else if (key == "kl_coefficient") cfg.ppo.kl_coefficient = to_double(key, value);
    else if (key == "bias_floor") cfg.ppo.bias_floor = to_double(key, value);
    else if (key == "log_ratio_cap") cfg.ppo.log_ratio_cap = to_double(key, value);
    else if (key == "gamma") cfg.gae.gamma = to_double(key, value);
    else if (key == "lambda") cfg.gae.lambda = to_double(key, value);
    else if (key == "value_range") cfg.env.value_range = to_int(key, value);
    else if (key == "max_turns") cfg.env.max_turns = to_int(key, value);
    else if (key == "max_tokens_per_turn") cfg.env.max_tokens_per_turn = to_int(key, value);
    else if (key == "batch_trajectories") cfg.batch_trajectories = to_int(key, value);
    else if (key == "minibatch_count") cfg.minibatch_count = to_int(key, value);
    else if (key == "policy_lr") cfg.policy_lr = to_double(key, value);
    else if (key == "critic_lr") cfg.critic_lr = to_double(key, value);
    else if (key == "entropy_coefficient") cfg.entropy_coefficient = to_double(key, value);
    else if (key == "entropy_decay") cfg.entropy_decay = to_double(key, value);
    else if (key == "total_batches") cfg.total_batches = to_int(key, value);
    else if (key == "eval_every") cfg.eval_every = to_int(key, value);
    else if (key == "eval_episodes") cfg.eval_episodes = to_int(key, value);
    else if (key == "seed") cfg.seed = std::strtoull(value.c_str(), nullptr, 10);
    else if (key == "context_window") cfg.context_window = to_int(key, value);
    else if (key == "hidden_dim") cfg.hidden_dim = to_int(key, value);
    else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  cfg.check();
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const TrainConfig& cfg) {
  char buf[64];
  std::ostringstream out;
  auto put_num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << '\n';
  };
  out << "variant = " << variant_name(cfg.ppo.variant) << '\n';
  put_num("epsilon", cfg.ppo.epsilon);
  put_num("kl_coefficient", cfg.ppo.kl_coefficient);
  put_num("bias_floor", cfg.ppo.bias_floor);
  put_num("log_ratio_cap", cfg.ppo.log_ratio_cap);
  put_num("gamma", cfg.gae.gamma);
  put_num("lambda", cfg.gae.lambda);
  out << "value_range = " << cfg.env.value_range << '\n';
  out << "max_turns = " << cfg.env.max_turns << '\n';
  out << "max_tokens_per_turn = " << cfg.env.max_tokens_per_turn << '\n';
  out << "batch_trajectories = " << cfg.batch_trajectories << '\n';
  out << "minibatch_count = " << cfg.minibatch_count << '\n';
  put_num("policy_lr", cfg.policy_lr);
  put_num("critic_lr", cfg.critic_lr);
  put_num("entropy_coefficient", cfg.entropy_coefficient);
  put_num("entropy_decay", cfg.entropy_decay);
  out << "total_batches = " << cfg.total_batches << '\n';
  out << "eval_every = " << cfg.eval_every << '\n';
  out << "eval_episodes = " << cfg.eval_episodes << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "context_window = " << cfg.context_window << '\n';
  out << "hidden_dim = " << cfg.hidden_dim << '\n';
  return out.str();
}

void write_config(const TrainConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << config_to_text(config);
}

}  // namespace mtppo
