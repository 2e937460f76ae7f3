#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "asgnet/corpus.hpp"

namespace asgnet {

struct LabelMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;    // true instances
  std::uint64_t predicted = 0;  // predicted instances
};

/// Single-label multi-class evaluation of one split.
struct MetricsReport {
  std::string split;
  std::uint64_t examples = 0;
  std::vector<LabelMetrics> per_label;
  /// Mean F1 over labels that occur in the truth or the predictions.
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double accuracy = 0.0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::uint64_t>> confusion;
  /// Canonical text of the run configuration.
  std::string config_snapshot;
  double wall_clock_seconds = 0.0;

  /// One `name<TAB>label<TAB>value` line per metric. Timing is optional so
  /// that reruns can be compared byte for byte.
  std::string to_tsv(bool include_timing = true) const;
  std::string summary() const;
};

/// Precision and recall are 0 when undefined; F1 is 0 when both are 0.
MetricsReport compute_metrics(const LabelVocab& labels, std::span<const std::size_t> truth,
                              std::span<const std::size_t> predicted);

/// Writes <stem>.tsv (no timing, so reruns compare byte for byte) and
/// <stem>_summary.txt.
void save_report(const std::filesystem::path& dir, const std::string& stem, const MetricsReport& report);

}  // namespace asgnet
