#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "asgnet/common.hpp"
#include "asgnet/vnet.hpp"
#include "gradcheck.hpp"
#include "vae_fixture.hpp"

using namespace asgnet;
using asgnet::testing::grad_check;

namespace {

void zero_heads(VNet& v) {
  for (Tensor* t : {&v.mu_weight(), &v.mu_bias(), &v.log_var_weight(), &v.log_var_bias()}) {
    for (auto& x : t->mutable_values()) x = 0.0;
  }
}

LatentCode code_of(std::vector<double> mu, std::vector<double> log_var) {
  const std::size_t d = mu.size();
  LatentCode c;
  c.mu = Tensor::from({1, d}, std::move(mu));
  c.log_var = Tensor::from({1, d}, std::move(log_var));
  c.sample = c.mu;
  return c;
}

// E_q[log q(z) - log p(z)] from n samples of the posterior.
double monte_carlo_kl(const std::vector<double>& mu, const std::vector<double>& log_var, std::size_t n, Rng& rng) {
  long double total = 0.0L;
  for (std::size_t s = 0; s < n; ++s) {
    double log_ratio = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double sigma = std::exp(0.5 * log_var[j]);
      const double eps = rng.normal();
      const double z = mu[j] + sigma * eps;
      // log N(z; mu, sigma²) - log N(z; 0, 1); the 2π terms cancel.
      log_ratio += -0.5 * log_var[j] - 0.5 * eps * eps + 0.5 * z * z;
    }
    total += log_ratio;
  }
  return static_cast<double>(total / static_cast<long double>(n));
}

}  // namespace

TEST_CASE("zero heads give a standard normal posterior") {
  VNet v(VNetConfig{3, 4, 8}, 1);
  zero_heads(v);
  const auto x = Tensor::from({2, 3}, {0.3, 1.2, -0.5, 2, 0, 1});
  const auto noise = Tensor::from({2, 4}, {0.1, -0.2, 0.3, 1.5, -1, 2, 0, 0.25});
  const auto code = v.encode(x, noise);
  for (double m : code.mu.values()) CHECK(m == 0.0);
  for (double l : code.log_var.values()) CHECK(l == 0.0);
  for (std::size_t k = 0; k < 8; ++k) CHECK(code.sample.values()[k] == noise.values()[k]);
}

TEST_CASE("seeded noise gives identical samples") {
  VNet v(VNetConfig{3, 4, 8}, 1);
  const auto x = Tensor::from({1, 3}, {0.3, 1.2, -0.5});
  Rng a(5), b(5);
  const auto s1 = v.encode(x, a).sample;
  const auto s2 = v.encode(x, b).sample;
  CHECK(std::equal(s1.values().begin(), s1.values().end(), s2.values().begin()));
  CHECK_THROWS_AS(v.encode(Tensor::zeros({1, 2})), ShapeError);
}

TEST_CASE("reparameterized sample gradient matches finite differences with frozen noise") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    VNet v(VNetConfig{3, 4, 6}, seed);
    Rng rng(seed + 100);
    std::vector<double> xs(6), ns(8), ws(8);
    for (auto& e : xs) e = rng.normal();
    for (auto& e : ns) e = rng.normal();
    for (auto& e : ws) e = rng.normal();
    const auto x = Tensor::from({2, 3}, xs);
    const auto noise = Tensor::from({2, 4}, ns);
    const auto w = Tensor::from({2, 4}, ws);
    std::vector<Tensor> encoder;
    for (const char* name : {"vnet.enc.weight", "vnet.enc.bias", "vnet.mu.weight", "vnet.mu.bias",
                             "vnet.log_var.weight", "vnet.log_var.bias"}) {
      encoder.push_back(v.params().get(name));
    }
    const auto r = grad_check(encoder, [&] { return sum(mul(v.encode(x, noise).sample, w)); });
    CHECK_MESSAGE(r.max_error < 1e-4, r.worst);

    // The full loss, through the decoder as well.
    std::vector<Tensor> all;
    for (const auto& p : v.params().params()) {
      if (p.tensor.requires_grad()) all.push_back(p.tensor);
    }
    const auto full = grad_check(all, [&] {
      const auto code = v.encode(x, noise);
      return elbo_loss(x, code, v.decode(code.sample), 0.7);
    });
    CHECK_MESSAGE(full.max_error < 1e-4, full.worst);
  }
}

TEST_CASE("closed-form KL examples") {
  CHECK(kl_divergence(code_of({0, 0, 0}, {0, 0, 0})).item() == 0.0);
  CHECK(kl_divergence(code_of({1}, {0})).item() == 0.5);
}

TEST_CASE("closed-form KL is non-negative and zero only at the prior") {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t d = 1 + rng.below(6);
    std::vector<double> mu(d), lv(d);
    for (auto& m : mu) m = rng.normal() * 2.0;
    for (auto& l : lv) l = rng.uniform(-4.0, 4.0);
    CHECK(kl_divergence(code_of(mu, lv)).item() > 0.0);
  }
  CHECK(kl_divergence(code_of({0, 1e-4}, {0, 0})).item() > 0.0);
  CHECK(kl_divergence(code_of({0}, {1e-4})).item() > 0.0);
}

TEST_CASE("closed-form KL matches a Monte Carlo estimate") {
  Rng rng(21);
  for (int i = 0; i < 3; ++i) {
    std::vector<double> mu(4), lv(4);
    for (auto& m : mu) m = rng.normal();
    for (auto& l : lv) l = rng.uniform(-1.5, 1.0);
    const double closed = kl_divergence(code_of(mu, lv)).item();
    const double mc = monte_carlo_kl(mu, lv, 200000, rng);
    CHECK(std::abs(mc - closed) / closed < 0.01);
  }
}

TEST_CASE("elbo loss cases") {
  const auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto prior = code_of({0, 0}, {0, 0});
  CHECK(elbo_loss(x, prior, x).item() == 0.0);

  const auto recon = Tensor::from({2, 3}, {1, 2, 4, 4, 3, 6});
  const auto posterior = code_of({1, -1}, {0.5, 0.0});
  // Plain autoencoder loss: (1 + 4) / 2 per example, mean over 2 rows.
  CHECK(elbo_loss(x, posterior, recon, 0.0).item() == 1.25);
  const double kl = kl_divergence(posterior).item();
  CHECK(std::abs(elbo_loss(x, posterior, recon, 1.0).item() - (1.25 + kl)) < 1e-15);
  CHECK_THROWS_AS(elbo_loss(x, prior, Tensor::zeros({1, 3})), ShapeError);
}

TEST_CASE("pretraining loss falls, smoothed over 10-step windows") {
  const auto xs = asgnet::testing::synthetic_stat_vectors(200, 4, 7);
  VNet v(VNetConfig{4, 16, 64}, 7);
  PretrainConfig pc;
  pc.epochs = 50;
  pc.batch_size = 200;
  pc.learning_rate = 1e-3;
  const auto r = pretrain(v, xs, pc);
  REQUIRE(r.step_loss.size() == 50);
  const auto w = asgnet::testing::window_means(r.step_loss, 10);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] < w[i - 1]);
  REQUIRE(r.epoch_loss.size() == 51);
  for (std::size_t i = 1; i < r.epoch_loss.size(); ++i) CHECK(r.epoch_loss[i] <= r.epoch_loss[i - 1]);
}

TEST_CASE("one epoch lowers the loss relative to none") {
  const auto xs = asgnet::testing::synthetic_stat_vectors(200, 4, 3);
  PretrainConfig zero;
  zero.epochs = 0;
  VNet a(VNetConfig{4, 16, 64}, 3);
  const auto r0 = pretrain(a, xs, zero);
  PretrainConfig one = zero;
  one.epochs = 1;
  VNet b(VNetConfig{4, 16, 64}, 3);
  const auto r1 = pretrain(b, xs, one);
  CHECK(r0.epoch_loss.size() == 1);
  CHECK(r1.epoch_loss[1] < r0.epoch_loss[0]);
  CHECK(r1.epoch_loss[0] == r0.epoch_loss[0]);
  CHECK_THROWS_AS(pretrain(a, {}, one), Error);
}

TEST_CASE("same seed gives identical checkpoints") {
  const auto xs = asgnet::testing::synthetic_stat_vectors(100, 5, 4);
  PretrainConfig pc;
  pc.epochs = 5;
  VNet a(VNetConfig{5, 8, 16}, 4), b(VNetConfig{5, 8, 16}, 4);
  const auto ra = pretrain(a, xs, pc);
  const auto rb = pretrain(b, xs, pc);
  CHECK(Checkpoint::capture(a.params(), &ra.optimizer) == Checkpoint::capture(b.params(), &rb.optimizer));
  CHECK(ra.step_loss == rb.step_loss);
}

TEST_CASE("two separated clusters are linearly separable in the latent means") {
  std::vector<std::size_t> cluster;
  const auto xs = asgnet::testing::synthetic_stat_vectors(200, 4, 11, 2, &cluster);
  VNet v(VNetConfig{4, 16, 64}, 11);
  PretrainConfig pc;
  pc.epochs = 30;
  pretrain(v, xs, pc);

  // Perceptron: converges to zero training errors iff the data is separable
  // (given enough passes).
  std::vector<std::vector<double>> mus;
  for (const auto& x : xs) mus.push_back(v.embed(x));
  std::vector<double> w(17, 0.0);
  std::size_t errors = 1;
  for (int pass = 0; pass < 10000 && errors > 0; ++pass) {
    errors = 0;
    for (std::size_t i = 0; i < mus.size(); ++i) {
      const double y = cluster[i] == 0 ? 1.0 : -1.0;
      double s = w[16];
      for (std::size_t j = 0; j < 16; ++j) s += w[j] * mus[i][j];
      if (y * s <= 0.0) {
        ++errors;
        for (std::size_t j = 0; j < 16; ++j) w[j] += y * mus[i][j];
        w[16] += y;
      }
    }
  }
  CHECK(errors == 0);
}

TEST_CASE("statistics embedding is deterministic") {
  VNet v(VNetConfig{4, 16, 64}, 2);
  pretrain(v, asgnet::testing::synthetic_stat_vectors(50, 4, 2), PretrainConfig{});
  const std::vector<double> x{0.5, 1.5, 0.0, 2.0};
  const auto e1 = v.embed(x);
  CHECK(e1 == v.embed(x));
  CHECK(e1.size() == 16);
  const std::vector<double> zeros(4, 0.0);
  const auto z = v.embed(zeros);
  CHECK(z == v.embed(std::vector<double>(4, 0.0)));
  // e_s is the posterior mean of the scaled input.
  const auto scaled = v.scale_input(x);
  const auto mu = v.encode(Tensor::row(scaled)).mu;
  CHECK(std::equal(e1.begin(), e1.end(), mu.values().begin()));
  CHECK_THROWS_AS(v.embed(std::vector<double>(3, 0.0)), ShapeError);
}

TEST_CASE("input scaling is fitted and not trained") {
  VNet v(VNetConfig{2, 4, 8}, 1);
  CHECK(v.scale_input(std::vector<double>{3.0, -1.0}) == std::vector<double>{3.0, -1.0});
  v.fit_input_scaling({{1.0, 5.0}, {3.0, 5.0}});
  CHECK(v.scale_input(std::vector<double>{3.0, 6.0}) == std::vector<double>{1.0, 1.0});
  const auto before = v.params().get("vnet.input.mean").values()[0];
  PretrainConfig pc;
  pc.epochs = 3;
  pc.standardize = false;
  pretrain(v, {{1.0, 5.0}, {3.0, 5.0}}, pc);
  CHECK(v.params().get("vnet.input.mean").values()[0] == before);
}

TEST_CASE("embedding cache round trip") {
  EmbeddingCache cache(0xabcdef, 3);
  cache.put(9, {1.0, -2.0, 1e-310});
  cache.put(2, {0.0, 4.5, -0.0});
  CHECK_THROWS_AS(cache.put(1, {1.0}), ShapeError);
  std::stringstream buf;
  cache.write(buf);
  const auto back = EmbeddingCache::read(buf);
  CHECK(back == cache);
  CHECK(back.dictionary_hash() == 0xabcdef);
  CHECK(back.find(7) == nullptr);
  CHECK((*back.find(9))[2] == 1e-310);
  std::stringstream bad("ASGES001");
  CHECK_THROWS_AS(EmbeddingCache::read(bad), FormatError);
}
