#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "asgnet/common.hpp"
#include "asgnet/metrics.hpp"
#include "asgnet/rng.hpp"

using namespace asgnet;

namespace {

const LabelVocab kFour({"a", "b", "c", "d"});

struct Prf {
  double p, r, f;
};

// Counts tp/fp/fn per label with plain loops.
Prf oracle_label(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred, std::size_t label) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] == label && truth[i] == label) tp += 1;
    if (pred[i] == label && truth[i] != label) fp += 1;
    if (pred[i] != label && truth[i] == label) fn += 1;
  }
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0};
}

}  // namespace

TEST_CASE("perfect predictor") {
  const std::vector<std::size_t> y{0, 1, 2, 3, 3, 2};
  const auto r = compute_metrics(kFour, y, y);
  for (const auto& m : r.per_label) CHECK(m.f1 == 1.0);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.micro_f1 == 1.0);
}

TEST_CASE("constant predictor on balanced data") {
  std::vector<std::size_t> truth, pred;
  for (std::size_t i = 0; i < 40; ++i) {
    truth.push_back(i % 4);
    pred.push_back(1);
  }
  const auto r = compute_metrics(kFour, truth, pred);
  CHECK(r.micro_f1 == 0.25);
  CHECK(r.accuracy == 0.25);
  CHECK(r.per_label[1].precision == 0.25);
  CHECK(r.per_label[1].recall == 1.0);
  CHECK(r.per_label[0].f1 == 0.0);
  CHECK(r.confusion[2][1] == 10);
}

TEST_CASE("metrics match a scalar-loop oracle on 100 predictions") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> truth(100), pred(100);
    for (std::size_t i = 0; i < 100; ++i) {
      truth[i] = rng.below(4);
      pred[i] = rng.bernoulli(0.6) ? truth[i] : rng.below(4);
    }
    const auto r = compute_metrics(kFour, truth, pred);
    double f1_sum = 0;
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t l = 0; l < 4; ++l) {
      const auto o = oracle_label(truth, pred, l);
      CHECK(r.per_label[l].precision == doctest::Approx(o.p).epsilon(1e-14));
      CHECK(r.per_label[l].recall == doctest::Approx(o.r).epsilon(1e-14));
      CHECK(r.per_label[l].f1 == doctest::Approx(o.f).epsilon(1e-14));
      CHECK(r.per_label[l].precision >= 0.0);
      CHECK(r.per_label[l].f1 <= 1.0);
      f1_sum += o.f;
      for (std::size_t i = 0; i < 100; ++i) {
        tp += pred[i] == l && truth[i] == l;
        fp += pred[i] == l && truth[i] != l;
        fn += pred[i] != l && truth[i] == l;
      }
    }
    CHECK(r.macro_f1 == doctest::Approx(f1_sum / 4).epsilon(1e-14));
    // Micro-F1 from pooled counts equals accuracy.
    const double micro = 2 * tp / (2 * tp + fp + fn);
    CHECK(r.micro_f1 == doctest::Approx(micro).epsilon(1e-14));
    double correct = 0;
    for (std::size_t i = 0; i < 100; ++i) correct += truth[i] == pred[i];
    CHECK(r.accuracy == doctest::Approx(correct / 100).epsilon(1e-14));
    std::uint64_t total = 0;
    for (const auto& row : r.confusion) {
      for (auto v : row) total += v;
    }
    CHECK(total == 100);
  }
}

TEST_CASE("macro average skips labels absent from truth and predictions") {
  const std::vector<std::size_t> y{0, 1, 0, 1};
  CHECK(compute_metrics(kFour, y, y).macro_f1 == 1.0);
}

TEST_CASE("invalid inputs") {
  const std::vector<std::size_t> a{0, 1}, b{0}, c{0, 4};
  CHECK_THROWS_AS(compute_metrics(kFour, a, b), Error);
  CHECK_THROWS_AS(compute_metrics(kFour, a, c), Error);
}

TEST_CASE("report files") {
  const std::vector<std::size_t> y{0, 1, 2, 3}, p{0, 1, 2, 2};
  auto r = compute_metrics(kFour, y, p);
  r.split = "test";
  r.wall_clock_seconds = 1.5;
  r.config_snapshot = "seed = 7\n";
  const auto tsv = r.to_tsv();
  CHECK(tsv.find("macro_f1\t-\t") != std::string::npos);
  CHECK(tsv.find("f1\td\t0\n") != std::string::npos);
  CHECK(tsv.find("confusion\td->c\t1\n") != std::string::npos);
  CHECK(tsv.find("wall_clock_seconds") != std::string::npos);
  CHECK(r.to_tsv(false).find("wall_clock_seconds") == std::string::npos);
  // Every line is name, label, value.
  std::istringstream lines(tsv);
  for (std::string line; std::getline(lines, line);) CHECK(std::count(line.begin(), line.end(), '\t') == 2);

  const auto dir = std::filesystem::temp_directory_path() / "asgnet_metrics_test";
  save_report(dir, "metrics", r);
  std::ifstream in(dir / "metrics.tsv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == r.to_tsv(false));
  CHECK(std::filesystem::exists(dir / "metrics_summary.txt"));
  std::filesystem::remove_all(dir);
}
