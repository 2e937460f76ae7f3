#include "asgnet/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "asgnet/common.hpp"

namespace asgnet {

MetricsReport compute_metrics(const LabelVocab& labels, std::span<const std::size_t> truth,
                              std::span<const std::size_t> predicted) {
  if (truth.size() != predicted.size()) throw Error("truth and prediction counts differ");
  const std::size_t n = labels.size();
  MetricsReport r;
  r.examples = truth.size();
  r.confusion.assign(n, std::vector<std::uint64_t>(n, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n || predicted[i] >= n) throw Error("label index out of range in metrics");
    ++r.confusion[truth[i]][predicted[i]];
  }

  std::uint64_t correct = 0;
  double f1_sum = 0.0;
  std::size_t f1_count = 0;
  for (std::size_t c = 0; c < n; ++c) {
    LabelMetrics m;
    m.label = labels.name(c);
    const std::uint64_t tp = r.confusion[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      m.support += r.confusion[c][k];
      m.predicted += r.confusion[k][c];
    }
    correct += tp;
    m.precision = m.predicted ? static_cast<double>(tp) / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    if (m.support || m.predicted) {
      f1_sum += m.f1;
      ++f1_count;
    }
    r.per_label.push_back(std::move(m));
  }
  r.accuracy = r.examples ? static_cast<double>(correct) / static_cast<double>(r.examples) : 0.0;
  // Every example contributes exactly one prediction and one truth, so micro
  // precision, recall and F1 all equal accuracy.
  r.micro_f1 = r.accuracy;
  r.macro_f1 = f1_count ? f1_sum / static_cast<double>(f1_count) : 0.0;
  return r;
}

std::string MetricsReport::to_tsv(bool include_timing) const {
  std::ostringstream out;
  out.precision(17);
  out << "examples\t-\t" << examples << '\n';
  for (const auto& m : per_label) {
    out << "precision\t" << m.label << '\t' << m.precision << '\n';
    out << "recall\t" << m.label << '\t' << m.recall << '\n';
    out << "f1\t" << m.label << '\t' << m.f1 << '\n';
    out << "support\t" << m.label << '\t' << m.support << '\n';
  }
  out << "macro_f1\t-\t" << macro_f1 << '\n';
  out << "micro_f1\t-\t" << micro_f1 << '\n';
  out << "accuracy\t-\t" << accuracy << '\n';
  for (std::size_t t = 0; t < confusion.size(); ++t) {
    for (std::size_t p = 0; p < confusion[t].size(); ++p) {
      out << "confusion\t" << per_label[t].label << "->" << per_label[p].label << '\t' << confusion[t][p] << '\n';
    }
  }
  if (include_timing) out << "wall_clock_seconds\t-\t" << wall_clock_seconds << '\n';
  return out.str();
}

std::string MetricsReport::summary() const {
  std::ostringstream out;
  out << "split: " << split << "  examples: " << examples << '\n';
  out << std::left << std::setw(28) << "label" << std::right << std::setw(11) << "precision" << std::setw(9)
      << "recall" << std::setw(9) << "f1" << std::setw(9) << "support" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& m : per_label) {
    out << std::left << std::setw(28) << m.label << std::right << std::setw(11) << m.precision << std::setw(9)
        << m.recall << std::setw(9) << m.f1 << std::setw(9) << m.support << '\n';
  }
  out << "macro F1: " << macro_f1 << "  micro F1: " << micro_f1 << "  accuracy: " << accuracy << '\n';
  out << "confusion (rows = true label):\n";
  for (std::size_t t = 0; t < confusion.size(); ++t) {
    out << "  " << std::left << std::setw(26) << per_label[t].label << std::right;
    for (auto v : confusion[t]) out << std::setw(7) << v;
    out << '\n';
  }
  out << std::setprecision(2) << "wall clock: " << wall_clock_seconds << " s\n";
  if (!config_snapshot.empty()) out << "config:\n" << config_snapshot;
  return out.str();
}

void save_report(const std::filesystem::path& dir, const std::string& stem, const MetricsReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (stem + ".tsv"));
    if (!out) throw Error("cannot write report in '" + dir.string() + "'");
    out << report.to_tsv(false);
  }
  std::ofstream out(dir / (stem + "_summary.txt"));
  out << report.summary();
}

}  // namespace asgnet
