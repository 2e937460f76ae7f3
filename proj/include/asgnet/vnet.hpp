#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "asgnet/optim.hpp"
#include "asgnet/rng.hpp"
#include "asgnet/tensor.hpp"

namespace asgnet {

struct VNetConfig {
  std::size_t input_dim = 0;  // label count
  std::size_t latent_dim = 16;
  std::size_t hidden = 64;
};

/// Posterior parameters for a batch (one row per input). `sample` equals `mu`
/// when no noise was supplied.
struct LatentCode {
  Tensor mu;
  Tensor log_var;
  Tensor sample;
};

/// Variational autoencoder over normalized per-message statistics vectors.
/// Encoder: x -> relu(x W1 + b1) -> {mu, log_var} heads.
/// Decoder: z -> relu(z W3 + b3) -> W4 + b4 (linear output).
class VNet {
 public:
  VNet(VNetConfig config, std::uint64_t seed);

  const VNetConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Deterministic posterior; sample = mu.
  LatentCode encode(const Tensor& x) const;
  /// Reparameterized: sample = mu + exp(log_var / 2) ⊙ noise.
  LatentCode encode(const Tensor& x, const Tensor& noise) const;
  /// Draws standard-normal noise from `rng`.
  LatentCode encode(const Tensor& x, Rng& rng) const;
  Tensor decode(const Tensor& z) const;

  /// Posterior mean for one raw statistics vector (input scaling applied);
  /// no graph is recorded.
  std::vector<double> embed(std::span<const double> x) const;

  /// Per-column affine map applied to raw statistics vectors before encode:
  /// (x - mean) / scale. Identity until fit_input_scaling is called. Stored
  /// with the parameters, never trained.
  void fit_input_scaling(const std::vector<std::vector<double>>& inputs);
  std::vector<double> scale_input(std::span<const double> x) const;

  // Named access used by tests.
  Tensor& mu_weight() { return mu_w_; }
  Tensor& mu_bias() { return mu_b_; }
  Tensor& log_var_weight() { return lv_w_; }
  Tensor& log_var_bias() { return lv_b_; }

 private:
  void check_input(const Tensor& x) const;

  VNetConfig config_;
  ParamSet params_;
  Tensor input_mean_, input_scale_;
  Tensor enc_w_, enc_b_, mu_w_, mu_b_, lv_w_, lv_b_, dec_w1_, dec_b1_, dec_w2_, dec_b2_;
};

/// Closed-form KL(N(mu, diag σ²) || N(0, I)) summed over latent dims and
/// averaged over rows: -1/2 Σ (1 + log σ² - μ² - σ²).
Tensor kl_divergence(const LatentCode& code);

/// kl_weight * KL + 1/2 ||x - reconstruction||², averaged over rows. The
/// squared error is the negative Gaussian log-likelihood (unit variance)
/// without constants, so minimizing this maximizes the evidence lower bound.
Tensor elbo_loss(const Tensor& x, const LatentCode& code, const Tensor& reconstruction, double kl_weight = 1.0);

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double kl_weight = 1.0;
  std::uint64_t seed = 7;
  /// Fit the input scaling on `inputs` before training.
  bool standardize = true;
};

struct PretrainResult {
  /// Minibatch loss at every optimizer step.
  std::vector<double> step_loss;
  /// Full-data loss before training (index 0) and after each epoch, evaluated
  /// with the same noise draw each time.
  std::vector<double> epoch_loss;
  AdamState optimizer;
};

/// Unsupervised training on the given raw statistics vectors. Throws on empty
/// input.
PretrainResult pretrain(VNet& vnet, const std::vector<std::vector<double>>& inputs, const PretrainConfig& config);

/// Loss on raw `inputs` (input scaling applied) with noise drawn from Rng(seed, kVaeNoise) stream 1000.
double evaluate_elbo(const VNet& vnet, const std::vector<std::vector<double>>& inputs, double kl_weight,
                     std::uint64_t seed);

/// message_id -> statistics embedding, tagged with the dictionary it was
/// computed from.
///
/// Binary layout, little-endian: "ASGES001", u64 dictionary hash, u32 dim,
/// u64 count, then (u64 message_id, f64 values[dim])* in ascending id order.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  EmbeddingCache(std::uint64_t dictionary_hash, std::size_t dim) : dictionary_hash_(dictionary_hash), dim_(dim) {}

  void put(std::uint64_t message_id, std::vector<double> embedding);
  /// nullptr when the message was never embedded.
  const std::vector<double>* find(std::uint64_t message_id) const;
  std::size_t size() const { return table_.size(); }
  std::size_t dim() const { return dim_; }
  std::uint64_t dictionary_hash() const { return dictionary_hash_; }

  void write(std::ostream& out) const;
  static EmbeddingCache read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static EmbeddingCache load(const std::filesystem::path& path);

  friend bool operator==(const EmbeddingCache&, const EmbeddingCache&) = default;

 private:
  std::uint64_t dictionary_hash_ = 0;
  std::size_t dim_ = 0;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
};

}  // namespace asgnet
