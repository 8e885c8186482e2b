#include "mtppo/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace mtppo {

namespace {

void write_values(std::ofstream& out, const std::vector<double>& values) {
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%a\n", v);
    out << buf;
  }
}

std::vector<double> read_values(std::ifstream& in, size_t count,
                                const std::string& path) {
  std::vector<double> values;
  values.reserve(count);
  std::string line;
  while (values.size() < count && std::getline(in, line)) {
    values.push_back(std::strtod(line.c_str(), nullptr));
  }
  if (values.size() != count) {
    throw std::runtime_error("checkpoint: truncated file " + path);
  }
  return values;
}

}  // namespace

void save_policy(const std::string& path, const PolicyParams& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << "policy " << params.config.feature_dim << ' '
      << params.config.vocab_size << ' ' << params.config.hidden_dim << '\n';
  write_values(out, params.values);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("checkpoint: cannot read " + path);
  std::string kind;
  PolicyConfig cfg;
  in >> kind >> cfg.feature_dim >> cfg.vocab_size >> cfg.hidden_dim;
  if (kind != "policy" || !in) {
    throw std::runtime_error("checkpoint: bad policy header in " + path);
  }
  in.ignore();
  PolicyParams params;
  params.config = cfg;
  params.values = read_values(in, static_cast<size_t>(cfg.param_count()), path);
  return params;
}

void save_critic(const std::string& path, const CriticParams& critic) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << "critic " << critic.values.size() << '\n';
  write_values(out, critic.values);
}

CriticParams load_critic(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("checkpoint: cannot read " + path);
  std::string kind;
  size_t dim = 0;
  in >> kind >> dim;
  if (kind != "critic" || !in) {
    throw std::runtime_error("checkpoint: bad critic header in " + path);
  }
  in.ignore();
  CriticParams critic;
  critic.values = read_values(in, dim, path);
  return critic;
}

}  // namespace mtppo
