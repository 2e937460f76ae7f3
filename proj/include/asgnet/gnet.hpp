#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "asgnet/optim.hpp"
#include "asgnet/rng.hpp"
#include "asgnet/snet.hpp"
#include "asgnet/tensor.hpp"
#include "asgnet/vnet.hpp"

namespace asgnet {

/// Which information paths reach the classifier.
enum class FusionMode {
  kFull,          // ReLU(H_C) + Gate(conf, eps) ⊙ H_E
  kStatsOnly,     // classifier over H_E alone
  kSemanticOnly,  // ReLU(H_C), statistics path dropped
  kNoGate,        // ReLU(H_C) + H_E, every statistic passes
};

std::string_view mode_name(FusionMode m);
FusionMode parse_mode(std::string_view s);

/// Half-width of the confidence band around 0.5; validated to [0, 0.5].
class GateConfig {
 public:
  explicit GateConfig(double epsilon = 0.2);
  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
};

/// Scalar gate: alpha inside the closed band [0.5 - eps, 0.5 + eps], else 0.
double gate_fn(double alpha, double epsilon);

/// Dense map of the statistics embedding into the d_model information space.
struct StatProjection {
  Tensor weight;  // d_z × d_model
  Tensor bias;    // 1 × d_model

  static StatProjection random(std::size_t d_z, std::size_t d_model, Rng& rng);
  void register_params(ParamSet& params);
};

/// H_E = e_s W + b, 1 × d_model. `e_s` is 1 × d_z.
Tensor project_stats(const StatProjection& proj, const Tensor& e_s);

/// H_O = ReLU(H_C) + gate_band(conf, eps) ⊙ H_E. H_E is either a 1×d row,
/// broadcast over token positions, or already m×d.
Tensor ada_sem_gate(const Tensor& h_c, const Tensor& confidence, const Tensor& h_e, double epsilon);

/// softmax(H_O Cᵀ) C with pad positions (mask 0) excluded as keys. When
/// `weights` is non-null it receives the attention matrix.
Tensor global_attention(const Tensor& h_o, const Tensor& c, std::span<const std::uint8_t> mask,
                        Tensor* weights = nullptr);

/// Mean over non-pad rows, then two dense layers with a ReLU between them.
struct ClassifierHead {
  Tensor w1;  // d_model × hidden
  Tensor b1;  // 1 × hidden
  Tensor w2;  // hidden × labels
  Tensor b2;  // 1 × labels

  static ClassifierHead random(std::size_t d_model, std::size_t hidden, std::size_t labels, Rng& rng);
  void register_params(ParamSet& params);
  std::size_t label_count() const { return w2.cols(); }
};

/// Logits for an already pooled 1×d_model feature.
Tensor classify_pooled(const ClassifierHead& head, const Tensor& pooled);
/// Logits (1 × labels) for an attended m × d_model map.
Tensor classify(const ClassifierHead& head, const Tensor& attended, std::span<const std::uint8_t> mask);

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t label_count = 0;
  std::size_t m_fixed = 16;
  std::size_t d_model = 64;
  std::size_t d_z = 16;
};

/// Intermediate tensors of one forward pass, for tests and diagnostics.
struct ForwardTrace {
  Tensor c, h_c, confidence, h_e, h_o, attention, attended, logits;
};

/// Complete classifier. Every component is initialized in a fixed order
/// regardless of the fusion mode, so runs that differ only in mode start
/// from identical weights.
class AsgModel {
 public:
  AsgModel(const ModelDims& dims, std::uint64_t seed);
  /// Custom encoder; the info projection, statistics projection and head are
  /// created from `seed`.
  AsgModel(const ModelDims& dims, std::unique_ptr<SemanticEncoder> encoder, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const SemanticEncoder& encoder() const { return *encoder_; }
  SemanticEncoder& encoder() { return *encoder_; }
  InfoProjection& info() { return info_; }
  StatProjection& stat() { return stat_; }
  ClassifierHead& head() { return head_; }

  /// Logits 1 × label_count.
  Tensor forward(const TokenWindow& window, std::span<const double> e_s, FusionMode mode, const GateConfig& gate,
                 ForwardTrace* trace = nullptr) const;

 private:
  void init(std::uint64_t seed);

  ModelDims dims_;
  std::unique_ptr<SemanticEncoder> encoder_;
  InfoProjection info_;
  StatProjection stat_;
  ClassifierHead head_;
  ParamSet params_;
};

}  // namespace asgnet
