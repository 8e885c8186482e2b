#include "mtppo/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace mtppo {

std::string variant_name(PpoVariant variant) {
  switch (variant) {
    case PpoVariant::TokenPPO: return "token";
    case PpoVariant::TurnPPO: return "turn";
    case PpoVariant::S_PPO: return "s";
    case PpoVariant::ST_PPO: return "st";
  }
  throw std::logic_error("variant_name: unknown variant");
}

PpoVariant variant_from_name(const std::string& name) {
  if (name == "token") return PpoVariant::TokenPPO;
  if (name == "turn") return PpoVariant::TurnPPO;
  if (name == "s") return PpoVariant::S_PPO;
  if (name == "st") return PpoVariant::ST_PPO;
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected token|turn|s|st)");
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", x);
  return buf;
}

std::string row(const std::string& variant, std::uint64_t seed, int batch,
                int minibatch, double clip_ratio, double kl, double grad_norm,
                double bias_abs, const BatchMetrics& b, double objective,
                int saturation) {
  std::string s;
  s += std::to_string(batch) + ',' + std::to_string(minibatch) + ',';
  s += variant + ',' + std::to_string(seed) + ',';
  s += fmt(clip_ratio) + ',' + fmt(kl) + ',' + fmt(grad_norm) + ',';
  s += fmt(bias_abs) + ',' + fmt(b.success_rate) + ',';
  s += fmt(b.valid_action_ratio) + ',' + fmt(b.adv_mean) + ',';
  s += fmt(b.adv_std) + ',' + fmt(objective) + ',' + fmt(b.value_loss) + ',';
  s += std::to_string(saturation) + ',' + fmt(b.eval_success) + '\n';
  return s;
}

}  // namespace

std::string MetricsWriter::header() {
  return "batch,minibatch,variant,seed,clip_ratio,kl,grad_norm,bias_abs,"
         "success_rate,valid_action_ratio,adv_mean,adv_std,objective,"
         "value_loss,saturation,eval_success\n";
}

MetricsWriter::MetricsWriter(const std::string& path,
                             const std::string& variant, std::uint64_t seed)
    : out_(path), variant_(variant), seed_(seed) {
  if (!out_) throw std::runtime_error("metrics: cannot write " + path);
  out_ << header();
  out_.flush();
}

void MetricsWriter::add_update(const UpdateStats& stats,
                               const BatchMetrics& batch) {
  out_ << row(variant_, seed_, stats.batch, stats.minibatch, stats.clip_ratio,
              stats.kl_estimate, stats.grad_norm, stats.bias_abs, batch,
              stats.objective, stats.saturation_count);
  out_.flush();
}

void MetricsWriter::add_batch(const BatchMetrics& batch) {
  out_ << row(variant_, seed_, batch.batch, -1, batch.clip_ratio,
              batch.kl_estimate, batch.grad_norm, batch.bias_abs, batch,
              batch.objective, batch.saturation_count);
  out_.flush();
}

void export_metrics(const std::vector<LabeledRun>& runs,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("metrics: cannot write " + path);
  out << MetricsWriter::header();
  for (const LabeledRun& run : runs) {
    if (!run.result) continue;
    size_t update_idx = 0;
    for (const BatchMetrics& batch : run.result->batches) {
      while (update_idx < run.result->updates.size() &&
             run.result->updates[update_idx].batch == batch.batch) {
        const UpdateStats& u = run.result->updates[update_idx];
        out << row(run.variant, run.seed, u.batch, u.minibatch, u.clip_ratio,
                   u.kl_estimate, u.grad_norm, u.bias_abs, batch, u.objective,
                   u.saturation_count);
        ++update_idx;
      }
      out << row(run.variant, run.seed, batch.batch, -1, batch.clip_ratio,
                 batch.kl_estimate, batch.grad_norm, batch.bias_abs, batch,
                 batch.objective, batch.saturation_count);
    }
  }
}

}  // namespace mtppo
