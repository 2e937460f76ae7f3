#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "asgnet/corpus.hpp"
#include "asgnet/optim.hpp"
#include "asgnet/rng.hpp"
#include "asgnet/tensor.hpp"

namespace asgnet {

/// Token ids padded or truncated to a fixed length, with a 1/0 mask.
struct TokenWindow {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;

  std::size_t length() const { return ids.size(); }
  std::size_t real_tokens() const;
};

TokenWindow make_window(const WordVocab& vocab, const LogRecord& record, std::size_t m_fixed);

/// Produces the semantic feature map C (m × d_model) of a token window.
/// Implementations must return exactly one row per window position.
class SemanticEncoder {
 public:
  virtual ~SemanticEncoder() = default;
  virtual std::size_t d_model() const = 0;
  virtual Tensor encode(const TokenWindow& window) const = 0;
  /// Appends trainable tensors to `params`.
  virtual void register_params(ParamSet& params) = 0;
};

/// Default encoder: token embeddings plus sinusoidal positions, one
/// single-head scaled dot-product self-attention block and one feed-forward
/// block, both residual. Pad positions are masked as attention keys.
class AttentionEncoder final : public SemanticEncoder {
 public:
  AttentionEncoder(std::size_t vocab_size, std::size_t d_model, std::size_t max_len, Rng& rng);

  std::size_t d_model() const override { return d_model_; }
  Tensor encode(const TokenWindow& window) const override;
  void register_params(ParamSet& params) override;

  Tensor& embedding() { return embedding_; }

 private:
  std::size_t d_model_;
  std::size_t max_len_;
  Tensor positions_;  // max_len × d_model, constant
  Tensor embedding_, wq_, wk_, wv_, wo_, ff_w1_, ff_b1_, ff_w2_, ff_b2_;
};

/// Sinusoidal position table, rows = positions.
Tensor sinusoidal_positions(std::size_t max_len, std::size_t d_model);

/// C = encoder(window); shape (m_fixed × d_model).
Tensor encode_message(const SemanticEncoder& encoder, const TokenWindow& window);

/// Square per-token affine map into the information space.
struct InfoProjection {
  Tensor weight;  // d_model × d_model
  Tensor bias;    // 1 × d_model

  static InfoProjection random(std::size_t d_model, Rng& rng);
  /// W = I, b = 0, not trainable.
  static InfoProjection identity(std::size_t d_model);
  void register_params(ParamSet& params);
};

struct InfoOutput {
  Tensor h;           // C W + b, one row per token
  Tensor confidence;  // sigmoid(h), entries in (0, 1)
};

InfoOutput project_info(const InfoProjection& proj, const Tensor& c);

}  // namespace asgnet
