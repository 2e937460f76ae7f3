#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asgnet/common.hpp"
#include "asgnet/config.hpp"
#include "asgnet/corpus.hpp"
#include "asgnet/gnet.hpp"
#include "asgnet/metrics.hpp"
#include "asgnet/optim.hpp"
#include "asgnet/statfeat.hpp"
#include "asgnet/vnet.hpp"

namespace asgnet {

/// Failure inside a named pipeline stage.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Run directory layout.
namespace artifact {
inline constexpr const char* kConfig = "config.cfg";
inline constexpr const char* kStats = "stats.tsv";
inline constexpr const char* kVNet = "vnet.ckpt";
inline constexpr const char* kEmbeddings = "es_cache.bin";
inline constexpr const char* kModel = "model.ckpt";
inline constexpr const char* kVaeCurve = "vae_loss.tsv";
inline constexpr const char* kTrainLog = "train_log.tsv";
inline constexpr const char* kMetrics = "metrics";
}  // namespace artifact

LogDataset load_for_config(const RunConfig& config, std::vector<std::string>* warnings = nullptr);

/// Everything the classifier consumes: dataset, train-split dictionary,
/// pretrained V-Net and the cached statistics embedding of every message.
struct Prepared {
  LogDataset dataset;
  StatDictionary dictionary;
  VNet vnet;
  EmbeddingCache embeddings;
  PretrainResult vae;
};

/// Stages: load, build-stats, pretrain-vae, embed. Errors are PipelineError.
Prepared prepare(const RunConfig& config);

/// Normalized statistics vector of record `index`; train-split records use
/// held-out counts when `held_out` is set.
std::vector<double> record_stats(const LogDataset& dataset, std::size_t index, const StatDictionary& dict,
                                 std::size_t m_fixed, bool held_out);

/// Normalized statistics vectors of the train split.
std::vector<std::vector<double>> train_stat_vectors(const LogDataset& dataset, const StatDictionary& dict,
                                                    std::size_t m_fixed, bool held_out);

/// Posterior mean for every message, tagged with the dictionary hash.
EmbeddingCache embed_all(const VNet& vnet, const LogDataset& dataset, const StatDictionary& dict,
                         std::size_t m_fixed, bool held_out);

ModelDims model_dims(const RunConfig& config, const LogDataset& dataset);

/// Logits for `indices`; evaluation may run messages in parallel, results are
/// per-message deterministic. Throws if a message has no cached embedding.
std::vector<std::vector<double>> predict_logits(const AsgModel& model, const LogDataset& dataset,
                                                const EmbeddingCache& embeddings, const std::vector<std::size_t>& indices,
                                                const RunConfig& config);

MetricsReport evaluate_model(const AsgModel& model, const LogDataset& dataset, const EmbeddingCache& embeddings,
                             Split split, const RunConfig& config);

struct TrainResult {
  MetricsReport test;
  MetricsReport dev;
  Checkpoint checkpoint;
  /// 0 means the untrained initialization was kept.
  std::size_t best_epoch = 0;
  std::vector<double> train_loss;  // mean loss per epoch
  std::vector<double> dev_macro_f1;
  std::vector<std::vector<double>> test_logits;
  double wall_clock_seconds = 0.0;
};

/// Trains the fusion classifier on cached embeddings with Adam and keeps the
/// epoch with the best dev macro-F1. Never touches the V-Net.
TrainResult train_classifier(const RunConfig& config, const Prepared& prepared);

/// Full run. When `out_dir` is given, writes every artifact there.
TrainResult train(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Writes config, dictionary, V-Net checkpoint and embedding cache.
void save_prepared(const std::filesystem::path& dir, const RunConfig& config, const Prepared& prepared);

/// Re-evaluates a run directory against its dataset. Throws
/// StaleArtifactError when the dataset no longer produces the dictionary the
/// run was trained with. `config_override` replaces the stored config.
MetricsReport evaluate_run(const std::filesystem::path& run_dir, Split split,
                           const std::optional<RunConfig>& config_override = std::nullopt);

struct AblationResult {
  /// Keyed by mode name: full, stats_only, semantic_only, no_gate.
  std::map<std::string, TrainResult> runs;
};

/// Trains the full model and the three ablations on shared preprocessing.
AblationResult run_ablation(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

enum class SweepAxis { kHiddenDim, kEpsilon };
SweepAxis parse_axis(std::string_view s);
std::vector<double> parse_grid(std::string_view s);

struct SweepPoint {
  double value = 0.0;
  TrainResult result;
};

/// One training run per grid value with a shared seed.
std::vector<SweepPoint> run_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& grid,
                                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace asgnet
