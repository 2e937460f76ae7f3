#include "asgnet/vnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "asgnet/common.hpp"

namespace asgnet {

VNet::VNet(VNetConfig config, std::uint64_t seed) : config_(config) {
  if (config_.input_dim == 0 || config_.latent_dim == 0 || config_.hidden == 0) {
    throw Error("VNet dimensions must be positive");
  }
  Rng rng(seed, rng_stream::kVaeInit);
  const auto n = config_.input_dim;
  const auto h = config_.hidden;
  const auto z = config_.latent_dim;
  input_mean_ = params_.add("vnet.input.mean", Tensor::zeros({1, n}));
  input_scale_ = params_.add("vnet.input.scale", Tensor::full({1, n}, 1.0));
  enc_w_ = params_.add("vnet.enc.weight", xavier_uniform({n, h}, rng));
  enc_b_ = params_.add("vnet.enc.bias", Tensor::zeros({1, h}, true));
  mu_w_ = params_.add("vnet.mu.weight", xavier_uniform({h, z}, rng));
  mu_b_ = params_.add("vnet.mu.bias", Tensor::zeros({1, z}, true));
  lv_w_ = params_.add("vnet.log_var.weight", xavier_uniform({h, z}, rng));
  lv_b_ = params_.add("vnet.log_var.bias", Tensor::zeros({1, z}, true));
  dec_w1_ = params_.add("vnet.dec.hidden.weight", xavier_uniform({z, h}, rng));
  dec_b1_ = params_.add("vnet.dec.hidden.bias", Tensor::zeros({1, h}, true));
  dec_w2_ = params_.add("vnet.dec.out.weight", xavier_uniform({h, n}, rng));
  dec_b2_ = params_.add("vnet.dec.out.bias", Tensor::zeros({1, n}, true));
}

void VNet::check_input(const Tensor& x) const {
  if (x.cols() != config_.input_dim) {
    throw ShapeError("VNet expects statistics vectors of dimension " + std::to_string(config_.input_dim) + ", got " +
                     x.shape().str());
  }
}

LatentCode VNet::encode(const Tensor& x) const {
  check_input(x);
  const Tensor hidden = relu(add_row(matmul(x, enc_w_), enc_b_));
  LatentCode code;
  code.mu = add_row(matmul(hidden, mu_w_), mu_b_);
  code.log_var = add_row(matmul(hidden, lv_w_), lv_b_);
  code.sample = code.mu;
  return code;
}

LatentCode VNet::encode(const Tensor& x, const Tensor& noise) const {
  LatentCode code = encode(x);
  if (noise.shape() != code.mu.shape()) {
    throw ShapeError("reparameterization noise " + noise.shape().str() + " does not match latent " +
                     code.mu.shape().str());
  }
  code.sample = add(code.mu, mul(exp(scale(code.log_var, 0.5)), noise));
  return code;
}

LatentCode VNet::encode(const Tensor& x, Rng& rng) const {
  std::vector<double> eps(x.rows() * config_.latent_dim);
  for (double& e : eps) e = rng.normal();
  return encode(x, Tensor::from({x.rows(), config_.latent_dim}, std::move(eps)));
}

Tensor VNet::decode(const Tensor& z) const {
  if (z.cols() != config_.latent_dim) throw ShapeError("VNet decoder expects latent dimension " + std::to_string(config_.latent_dim));
  const Tensor hidden = relu(add_row(matmul(z, dec_w1_), dec_b1_));
  return add_row(matmul(hidden, dec_w2_), dec_b2_);
}

void VNet::fit_input_scaling(const std::vector<std::vector<double>>& inputs) {
  const std::size_t n = config_.input_dim;
  std::vector<double> mean(n, 0.0);
  std::vector<double> var(n, 0.0);
  for (const auto& v : inputs) {
    if (v.size() != n) throw ShapeError("statistics vectors have inconsistent dimensions");
    for (std::size_t j = 0; j < n; ++j) mean[j] += v[j];
  }
  const double count = static_cast<double>(std::max<std::size_t>(inputs.size(), 1));
  for (double& m : mean) m /= count;
  for (const auto& v : inputs) {
    for (std::size_t j = 0; j < n; ++j) var[j] += (v[j] - mean[j]) * (v[j] - mean[j]);
  }
  auto m = input_mean_.mutable_values();
  auto s = input_scale_.mutable_values();
  for (std::size_t j = 0; j < n; ++j) {
    const double sd = std::sqrt(var[j] / count);
    m[j] = mean[j];
    s[j] = sd > 1e-12 ? sd : 1.0;  // constant columns pass through centered
  }
}

std::vector<double> VNet::scale_input(std::span<const double> x) const {
  if (x.size() != config_.input_dim) {
    throw ShapeError("VNet expects statistics vectors of dimension " + std::to_string(config_.input_dim));
  }
  const auto m = input_mean_.values();
  const auto s = input_scale_.values();
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - m[j]) / s[j];
  return out;
}

std::vector<double> VNet::embed(std::span<const double> x) const {
  NoGradGuard no_grad;
  const Tensor in = Tensor::row(scale_input(x));
  const auto code = encode(in);
  return {code.mu.values().begin(), code.mu.values().end()};
}

Tensor kl_divergence(const LatentCode& code) {
  // -1/2 Σ (1 + lv - mu² - exp(lv)), summed over dims, mean over rows.
  const Tensor inner = sub(sub(add_scalar(code.log_var, 1.0), square(code.mu)), exp(code.log_var));
  return scale(sum(inner), -0.5 / static_cast<double>(code.mu.rows()));
}

Tensor elbo_loss(const Tensor& x, const LatentCode& code, const Tensor& reconstruction, double kl_weight) {
  if (x.shape() != reconstruction.shape()) {
    throw ShapeError("reconstruction " + reconstruction.shape().str() + " does not match input " + x.shape().str());
  }
  const Tensor recon = scale(sum(square(sub(x, reconstruction))), 0.5 / static_cast<double>(x.rows()));
  if (kl_weight == 0.0) return recon;
  return add(scale(kl_divergence(code), kl_weight), recon);
}

namespace {

Tensor stack_rows(const VNet& vnet, const std::vector<std::vector<double>>& inputs, std::span<const std::size_t> idx) {
  const std::size_t dim = vnet.config().input_dim;
  std::vector<double> v;
  v.reserve(idx.size() * dim);
  for (std::size_t i : idx) {
    if (inputs[i].size() != dim) throw ShapeError("statistics vectors have inconsistent dimensions");
    const auto scaled = vnet.scale_input(inputs[i]);
    v.insert(v.end(), scaled.begin(), scaled.end());
  }
  return Tensor::from({idx.size(), dim}, std::move(v));
}

}  // namespace

double evaluate_elbo(const VNet& vnet, const std::vector<std::vector<double>>& inputs, double kl_weight,
                     std::uint64_t seed) {
  if (inputs.empty()) throw Error("no statistics vectors to evaluate");
  NoGradGuard no_grad;
  std::vector<std::size_t> all(inputs.size());
  std::iota(all.begin(), all.end(), 0);
  const Tensor x = stack_rows(vnet, inputs, all);
  Rng rng(seed, rng_stream::kVaeNoise + 1000);
  const auto code = vnet.encode(x, rng);
  return elbo_loss(x, code, vnet.decode(code.sample), kl_weight).item();
}

PretrainResult pretrain(VNet& vnet, const std::vector<std::vector<double>>& inputs, const PretrainConfig& config) {
  if (inputs.empty()) throw Error("V-Net pretraining needs at least one statistics vector");
  if (config.batch_size == 0) throw Error("batch_size must be positive");
  if (config.standardize) vnet.fit_input_scaling(inputs);
  Adam adam(vnet.params(), AdamConfig{config.learning_rate});
  Rng shuffle_rng(config.seed, rng_stream::kVaeShuffle);
  Rng noise_rng(config.seed, rng_stream::kVaeNoise);

  PretrainResult result;
  result.epoch_loss.push_back(evaluate_elbo(vnet, inputs, config.kl_weight, config.seed));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Tensor x = stack_rows(vnet, inputs, std::span(order).subspan(start, end - start));
      adam.zero_grad();
      const auto code = vnet.encode(x, noise_rng);
      const Tensor loss = elbo_loss(x, code, vnet.decode(code.sample), config.kl_weight);
      backward(loss);
      adam.step();
      result.step_loss.push_back(loss.item());
    }
    result.epoch_loss.push_back(evaluate_elbo(vnet, inputs, config.kl_weight, config.seed));
  }
  vnet.params().zero_grad();
  result.optimizer = adam.state();
  return result;
}

// --- EmbeddingCache ---------------------------------------------------------------

void EmbeddingCache::put(std::uint64_t message_id, std::vector<double> embedding) {
  if (embedding.size() != dim_) {
    throw ShapeError("embedding of dimension " + std::to_string(embedding.size()) + " for cache of dimension " +
                     std::to_string(dim_));
  }
  table_[message_id] = std::move(embedding);
}

const std::vector<double>* EmbeddingCache::find(std::uint64_t message_id) const {
  auto it = table_.find(message_id);
  return it == table_.end() ? nullptr : &it->second;
}

namespace {
constexpr char kCacheMagic[8] = {'A', 'S', 'G', 'E', 'S', '0', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::istream& in, int bytes = 8) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("embedding cache: truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}
}  // namespace

void EmbeddingCache::write(std::ostream& out) const {
  out.write(kCacheMagic, sizeof(kCacheMagic));
  put_u64(out, dictionary_hash_);
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((dim_ >> (8 * i)) & 0xff));
  put_u64(out, table_.size());
  std::vector<std::uint64_t> ids;
  ids.reserve(table_.size());
  for (const auto& [id, _] : table_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (auto id : ids) {
    put_u64(out, id);
    for (double v : table_.at(id)) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

EmbeddingCache EmbeddingCache::read(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kCacheMagic)) throw FormatError("embedding cache: bad magic");
  const auto hash = get_u64(in);
  const auto dim = static_cast<std::size_t>(get_u64(in, 4));
  const auto count = get_u64(in);
  EmbeddingCache cache(hash, dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id = get_u64(in);
    std::vector<double> v(dim);
    for (double& x : v) x = std::bit_cast<double>(get_u64(in));
    cache.put(id, std::move(v));
  }
  return cache;
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding cache '" + path.string() + "'");
  write(out);
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read embedding cache '" + path.string() + "'");
  return read(in);
}

}  // namespace asgnet
