#include "asgnet/gnet.hpp"

#include <string>

#include "asgnet/common.hpp"

namespace asgnet {

std::string_view mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::kFull: return "full";
    case FusionMode::kStatsOnly: return "stats_only";
    case FusionMode::kSemanticOnly: return "semantic_only";
    case FusionMode::kNoGate: return "no_gate";
  }
  return "?";
}

FusionMode parse_mode(std::string_view s) {
  if (s == "full") return FusionMode::kFull;
  if (s == "stats_only") return FusionMode::kStatsOnly;
  if (s == "semantic_only") return FusionMode::kSemanticOnly;
  if (s == "no_gate") return FusionMode::kNoGate;
  throw FormatError("unknown mode '" + std::string(s) + "' (expected full, stats_only, semantic_only or no_gate)");
}

GateConfig::GateConfig(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) {
    throw Error("epsilon must lie in [0, 0.5], got " + std::to_string(epsilon));
  }
}

double gate_fn(double alpha, double epsilon) { return in_gate_band(alpha, epsilon) ? alpha : 0.0; }

StatProjection StatProjection::random(std::size_t d_z, std::size_t d_model, Rng& rng) {
  return {xavier_uniform({d_z, d_model}, rng), Tensor::zeros({1, d_model}, true)};
}

void StatProjection::register_params(ParamSet& params) {
  params.add("gnet.stat.weight", weight);
  params.add("gnet.stat.bias", bias);
}

Tensor project_stats(const StatProjection& proj, const Tensor& e_s) {
  if (e_s.rows() != 1 || e_s.cols() != proj.weight.rows()) {
    throw ShapeError("project_stats: embedding " + e_s.shape().str() + " does not fit projection " +
                     proj.weight.shape().str());
  }
  return add_row(matmul(e_s, proj.weight), proj.bias);
}

Tensor ada_sem_gate(const Tensor& h_c, const Tensor& confidence, const Tensor& h_e, double epsilon) {
  if (h_c.shape() != confidence.shape()) {
    throw ShapeError("ada_sem_gate: H_C " + h_c.shape().str() + " vs confidence " + confidence.shape().str());
  }
  const Tensor stats = h_e.rows() == 1 && h_c.rows() != 1 ? broadcast_rows(h_e, h_c.rows()) : h_e;
  if (stats.shape() != h_c.shape()) {
    throw ShapeError("ada_sem_gate: H_E " + h_e.shape().str() + " cannot broadcast to " + h_c.shape().str());
  }
  return add(relu(h_c), mul(gate_band(confidence, epsilon), stats));
}

Tensor global_attention(const Tensor& h_o, const Tensor& c, std::span<const std::uint8_t> mask, Tensor* weights) {
  if (h_o.shape() != c.shape()) {
    throw ShapeError("global_attention: H_O " + h_o.shape().str() + " vs C " + c.shape().str());
  }
  const Tensor attn = softmax_rows(matmul(h_o, transpose(c)), mask);
  if (weights) *weights = attn;
  return matmul(attn, c);
}

ClassifierHead ClassifierHead::random(std::size_t d_model, std::size_t hidden, std::size_t labels, Rng& rng) {
  return {xavier_uniform({d_model, hidden}, rng), Tensor::zeros({1, hidden}, true),
          xavier_uniform({hidden, labels}, rng), Tensor::zeros({1, labels}, true)};
}

void ClassifierHead::register_params(ParamSet& params) {
  params.add("head.w1", w1);
  params.add("head.b1", b1);
  params.add("head.w2", w2);
  params.add("head.b2", b2);
}

Tensor classify_pooled(const ClassifierHead& head, const Tensor& pooled) {
  const Tensor hidden = relu(add_row(matmul(pooled, head.w1), head.b1));
  return add_row(matmul(hidden, head.w2), head.b2);
}

Tensor classify(const ClassifierHead& head, const Tensor& attended, std::span<const std::uint8_t> mask) {
  return classify_pooled(head, masked_mean_rows(attended, mask));
}

AsgModel::AsgModel(const ModelDims& dims, std::uint64_t seed) : dims_(dims) {
  Rng rng(seed, rng_stream::kModelInit);
  encoder_ = std::make_unique<AttentionEncoder>(dims.vocab_size, dims.d_model, dims.m_fixed, rng);
  info_ = InfoProjection::random(dims.d_model, rng);
  stat_ = StatProjection::random(dims.d_z, dims.d_model, rng);
  head_ = ClassifierHead::random(dims.d_model, dims.d_model, dims.label_count, rng);
  encoder_->register_params(params_);
  info_.register_params(params_);
  stat_.register_params(params_);
  head_.register_params(params_);
}

AsgModel::AsgModel(const ModelDims& dims, std::unique_ptr<SemanticEncoder> encoder, std::uint64_t seed)
    : dims_(dims), encoder_(std::move(encoder)) {
  if (!encoder_ || encoder_->d_model() != dims.d_model) throw Error("encoder does not match model d_model");
  Rng rng(seed, rng_stream::kModelInit);
  info_ = InfoProjection::random(dims.d_model, rng);
  stat_ = StatProjection::random(dims.d_z, dims.d_model, rng);
  head_ = ClassifierHead::random(dims.d_model, dims.d_model, dims.label_count, rng);
  encoder_->register_params(params_);
  info_.register_params(params_);
  stat_.register_params(params_);
  head_.register_params(params_);
}

Tensor AsgModel::forward(const TokenWindow& window, std::span<const double> e_s, FusionMode mode,
                         const GateConfig& gate, ForwardTrace* trace) const {
  if (e_s.size() != dims_.d_z) {
    throw ShapeError("statistics embedding has dimension " + std::to_string(e_s.size()) + ", model expects " +
                     std::to_string(dims_.d_z));
  }
  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;

  if (mode != FusionMode::kSemanticOnly) {
    t.h_e = project_stats(stat_, Tensor::row(std::vector<double>(e_s.begin(), e_s.end())));
  }
  if (mode == FusionMode::kStatsOnly) {
    t.logits = classify_pooled(head_, t.h_e);
    return t.logits;
  }

  t.c = encode_message(*encoder_, window);
  const InfoOutput info = project_info(info_, t.c);
  t.h_c = info.h;
  t.confidence = info.confidence;
  switch (mode) {
    case FusionMode::kFull: t.h_o = ada_sem_gate(t.h_c, t.confidence, t.h_e, gate.epsilon()); break;
    case FusionMode::kSemanticOnly: t.h_o = relu(t.h_c); break;
    case FusionMode::kNoGate: t.h_o = add(relu(t.h_c), broadcast_rows(t.h_e, t.h_c.rows())); break;
    case FusionMode::kStatsOnly: break;
  }
  t.attended = global_attention(t.h_o, t.c, window.mask, &t.attention);
  t.logits = classify(head_, t.attended, window.mask);
  return t.logits;
}

}  // namespace asgnet
