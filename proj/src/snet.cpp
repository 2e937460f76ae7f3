#include "asgnet/snet.hpp"

#include <cmath>

#include "asgnet/common.hpp"

namespace asgnet {

namespace {
constexpr double kInfoInitGain = 0.25;
}  // namespace

std::size_t TokenWindow::real_tokens() const {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

TokenWindow make_window(const WordVocab& vocab, const LogRecord& record, std::size_t m_fixed) {
  if (m_fixed == 0) throw Error("m_fixed must be at least 1");
  TokenWindow w;
  w.ids.assign(m_fixed, WordVocab::kPad);
  w.mask.assign(m_fixed, 0);
  const std::size_t used = std::min(m_fixed, record.tokens.size());
  for (std::size_t i = 0; i < used; ++i) {
    w.ids[i] = vocab.id(record.tokens[i]);
    w.mask[i] = 1;
  }
  return w;
}

Tensor sinusoidal_positions(std::size_t max_len, std::size_t d_model) {
  std::vector<double> v(max_len * d_model);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) / rate;
      v[pos * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({max_len, d_model}, std::move(v));
}

AttentionEncoder::AttentionEncoder(std::size_t vocab_size, std::size_t d_model, std::size_t max_len, Rng& rng)
    : d_model_(d_model), max_len_(max_len) {
  if (vocab_size < 2 || d_model == 0 || max_len == 0) throw Error("invalid encoder dimensions");
  positions_ = sinusoidal_positions(max_len, d_model);
  embedding_ = normal_init({vocab_size, d_model}, 1.0, rng);
  wq_ = xavier_uniform({d_model, d_model}, rng);
  wk_ = xavier_uniform({d_model, d_model}, rng);
  wv_ = xavier_uniform({d_model, d_model}, rng);
  wo_ = xavier_uniform({d_model, d_model}, rng);
  ff_w1_ = xavier_uniform({d_model, d_model}, rng);
  ff_b1_ = Tensor::zeros({1, d_model}, true);
  ff_w2_ = xavier_uniform({d_model, d_model}, rng);
  ff_b2_ = Tensor::zeros({1, d_model}, true);
}

void AttentionEncoder::register_params(ParamSet& params) {
  params.add("snet.embedding", embedding_);
  params.add("snet.attn.query", wq_);
  params.add("snet.attn.key", wk_);
  params.add("snet.attn.value", wv_);
  params.add("snet.attn.out", wo_);
  params.add("snet.ff.w1", ff_w1_);
  params.add("snet.ff.b1", ff_b1_);
  params.add("snet.ff.w2", ff_w2_);
  params.add("snet.ff.b2", ff_b2_);
}

Tensor AttentionEncoder::encode(const TokenWindow& window) const {
  const std::size_t m = window.length();
  if (m > max_len_) throw ShapeError("window of " + std::to_string(m) + " tokens exceeds encoder max length");
  std::vector<double> pos(positions_.values().begin(),
                          positions_.values().begin() + static_cast<std::ptrdiff_t>(m * d_model_));
  const Tensor x = add(gather_rows(embedding_, window.ids), Tensor::from({m, d_model_}, std::move(pos)));

  const Tensor q = matmul(x, wq_);
  const Tensor k = matmul(x, wk_);
  const Tensor v = matmul(x, wv_);
  const Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d_model_)));
  const Tensor attended = matmul(matmul(softmax_rows(scores, window.mask), v), wo_);
  const Tensor x1 = add(x, attended);

  const Tensor ff = add_row(matmul(relu(add_row(matmul(x1, ff_w1_), ff_b1_)), ff_w2_), ff_b2_);
  return add(x1, ff);
}

Tensor encode_message(const SemanticEncoder& encoder, const TokenWindow& window) {
  Tensor c = encoder.encode(window);
  if (c.rows() != window.length() || c.cols() != encoder.d_model()) {
    throw ShapeError("encoder returned " + c.shape().str() + " for a window of " + std::to_string(window.length()));
  }
  return c;
}

InfoProjection InfoProjection::random(std::size_t d_model, Rng& rng) {
  // Small initial H^C keeps most confidences inside the gate band early on;
  // training decides how far to move them out.
  return {xavier_uniform({d_model, d_model}, rng, kInfoInitGain), Tensor::zeros({1, d_model}, true)};
}

InfoProjection InfoProjection::identity(std::size_t d_model) {
  std::vector<double> eye(d_model * d_model, 0.0);
  for (std::size_t i = 0; i < d_model; ++i) eye[i * d_model + i] = 1.0;
  return {Tensor::from({d_model, d_model}, std::move(eye)), Tensor::zeros({1, d_model})};
}

void InfoProjection::register_params(ParamSet& params) {
  params.add("snet.info.weight", weight);
  params.add("snet.info.bias", bias);
}

InfoOutput project_info(const InfoProjection& proj, const Tensor& c) {
  if (c.cols() != proj.weight.rows()) {
    throw ShapeError("project_info: feature map " + c.shape().str() + " does not fit projection " +
                     proj.weight.shape().str());
  }
  InfoOutput out;
  out.h = add_row(matmul(c, proj.weight), proj.bias);
  out.confidence = sigmoid(out.h);
  return out;
}

}  // namespace asgnet
