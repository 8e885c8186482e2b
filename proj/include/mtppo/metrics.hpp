#ifndef MTPPO_METRICS_HPP_
#define MTPPO_METRICS_HPP_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mtppo/trainer.hpp"

namespace mtppo {

std::string variant_name(PpoVariant variant);
PpoVariant variant_from_name(const std::string& name);

// Append-only CSV: one row per minibatch update (minibatch >= 1) and one
// per batch (minibatch = -1). Batch-level values are repeated on update
// rows so any row is plottable on its own; numeric formatting is fixed so
// identical runs produce byte-identical files. Rows are flushed as
// written, so a crashed run still leaves a parseable file.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::string& variant,
                std::uint64_t seed);

  static std::string header();

  void add_update(const UpdateStats& stats, const BatchMetrics& batch);
  void add_batch(const BatchMetrics& batch);

 private:
  std::ofstream out_;
  std::string variant_;
  std::uint64_t seed_;
};

struct LabeledRun {
  std::string variant;
  std::uint64_t seed = 0;
  const RunResult* result = nullptr;
};

// Writes complete series in one go; an empty list yields a header-only
// file.
void export_metrics(const std::vector<LabeledRun>& runs,
                    const std::string& path);

}  // namespace mtppo

#endif  // MTPPO_METRICS_HPP_
