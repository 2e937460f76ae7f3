#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "asgnet/common.hpp"
#include "asgnet/pipeline.hpp"
#include "run_fixture.hpp"

using namespace asgnet;
using asgnet::testing::read_file;
using asgnet::testing::scratch_dir;
using asgnet::testing::small_run;

namespace {

double max_logit_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) worst = std::max(worst, std::abs(a[i][k] - b[i][k]));
  }
  return worst;
}

}  // namespace

TEST_CASE("train writes every artifact and reruns are bit-identical") {
  const auto dir = scratch_dir("pipeline_repro");
  const auto config = small_run(dir);
  const auto a = train(config, dir / "a");
  const auto b = train(config, dir / "b");
  for (const char* f : {artifact::kConfig, artifact::kStats, artifact::kVNet, artifact::kEmbeddings, artifact::kModel,
                        artifact::kVaeCurve, artifact::kTrainLog, "metrics.tsv", "dev_metrics.tsv"}) {
    REQUIRE_MESSAGE(std::filesystem::exists(dir / "a" / f), f);
    CHECK_MESSAGE(read_file(dir / "a" / f) == read_file(dir / "b" / f), f);
  }
  CHECK(std::filesystem::exists(dir / "a" / "metrics_summary.txt"));
  CHECK(a.test_logits == b.test_logits);
  CHECK(a.checkpoint == b.checkpoint);
  CHECK(a.test.macro_f1 >= 0.0);
  CHECK(a.test.macro_f1 <= 1.0);
  CHECK(a.train_loss.size() == 3);
  CHECK(a.dev_macro_f1.size() == 3);
  CHECK(a.best_epoch >= 1);
  CHECK(a.dev_macro_f1[a.best_epoch - 1] == *std::max_element(a.dev_macro_f1.begin(), a.dev_macro_f1.end()));
  CHECK(RunConfig::load(dir / "a" / artifact::kConfig) == config);
  std::filesystem::remove_all(dir);
}

TEST_CASE("zero epochs still produces a report") {
  const auto dir = scratch_dir("pipeline_zero");
  auto config = small_run(dir);
  config.epochs = 0;
  const auto r = train(config, dir / "run");
  CHECK(r.best_epoch == 0);
  CHECK(r.train_loss.empty());
  CHECK(r.test.examples == 24);
  CHECK(r.test.macro_f1 < 0.7);
  CHECK(std::filesystem::exists(dir / "run" / "metrics.tsv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("a trained model learns the indicator corpus") {
  const auto dir = scratch_dir("pipeline_learn");
  auto config = small_run(dir);
  config.epochs = 15;
  CHECK(train(config).test.macro_f1 >= 0.9);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stats only reaches perfect F1 when one word per label decides") {
  const auto dir = scratch_dir("pipeline_stats_only");
  auto config = small_run(dir);
  config.mode = FusionMode::kStatsOnly;
  config.epochs = 30;
  config.vae_epochs = 30;
  CHECK(train(config).test.macro_f1 == 1.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("classifier training never touches the V-Net") {
  const auto dir = scratch_dir("pipeline_independent");
  const auto config = small_run(dir);
  const Prepared prepared = prepare(config);
  const auto before = Checkpoint::capture(prepared.vnet.params());
  for (auto mode : {FusionMode::kFull, FusionMode::kNoGate}) {
    auto c = config;
    c.mode = mode;
    train_classifier(c, prepared);
  }
  CHECK(Checkpoint::capture(prepared.vnet.params()) == before);

  // The same holds on disk: an ablation run writes the same V-Net file as a
  // plain training run.
  train(config, dir / "train");
  run_ablation(config, dir / "ablate");
  CHECK(read_file(dir / "train" / artifact::kVNet) == read_file(dir / "ablate" / artifact::kVNet));
  CHECK(std::filesystem::exists(dir / "ablate" / "ablation.tsv"));
  for (const char* mode : {"full", "stats_only", "semantic_only", "no_gate"}) {
    CHECK(std::filesystem::exists(dir / "ablate" / mode / "metrics.tsv"));
  }
  // The full-mode ablation run equals plain training.
  CHECK(read_file(dir / "train" / "metrics.tsv") == read_file(dir / "ablate" / "full" / "metrics.tsv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("semantic only equals the full model at epsilon 0") {
  const auto dir = scratch_dir("pipeline_eps0");
  auto config = small_run(dir);
  config.epsilon = 0.0;
  const Prepared prepared = prepare(config);
  const auto full = train_classifier(config, prepared);
  config.mode = FusionMode::kSemanticOnly;
  const auto sem = train_classifier(config, prepared);
  CHECK(max_logit_diff(full.test_logits, sem.test_logits) < 1e-9);
  CHECK(full.test.to_tsv(false) == sem.test.to_tsv(false));
  std::filesystem::remove_all(dir);
}

TEST_CASE("evaluate reproduces the training report and detects stale artifacts") {
  const auto dir = scratch_dir("pipeline_eval");
  const auto config = small_run(dir);
  const auto r = train(config, dir / "run");
  const auto again = evaluate_run(dir / "run", Split::kTest);
  CHECK(again.to_tsv(false) == r.test.to_tsv(false));
  CHECK(evaluate_run(dir / "run", Split::kDev).to_tsv(false) == r.dev.to_tsv(false));

  // Regenerate the corpus with another seed: the dictionary changes.
  small_run(dir, 99);
  try {
    evaluate_run(dir / "run", Split::kTest);
    FAIL("expected a stale-artifact error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "evaluate");
    CHECK(std::string(e.what()).find("different statistics dictionary") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("stale embedding caches are refused by the classifier") {
  const auto dir = scratch_dir("pipeline_stale_cache");
  const auto config = small_run(dir);
  Prepared prepared = prepare(config);
  prepared.embeddings = EmbeddingCache(prepared.embeddings.dictionary_hash() ^ 1, config.d_z);
  try {
    train_classifier(config, prepared);
    FAIL("expected a stale-artifact error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "train");
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing embeddings name the preprocessing stage") {
  const auto dir = scratch_dir("pipeline_missing");
  const auto config = small_run(dir);
  const Prepared prepared = prepare(config);
  const AsgModel model(model_dims(config, prepared.dataset), 1);
  const EmbeddingCache empty(prepared.dictionary.content_hash(), config.d_z);
  try {
    predict_logits(model, prepared.dataset, empty, {0}, config);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("pretrain-vae") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("stage failures carry the stage name") {
  RunConfig config;
  config.dataset = "/nonexistent/corpus.log";
  try {
    train(config);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "load");
  }
  const auto dir = scratch_dir("pipeline_stage");
  auto bad = small_run(dir);
  bad.split = "0,0.5,0.5";
  try {
    train(bad);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "build-stats");
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweeps") {
  CHECK(parse_axis("epsilon") == SweepAxis::kEpsilon);
  CHECK(parse_axis("hidden_dim") == SweepAxis::kHiddenDim);
  CHECK_THROWS_AS(parse_axis("depth"), FormatError);
  CHECK(parse_grid("0,0.1,0.2") == std::vector<double>{0, 0.1, 0.2});
  CHECK_THROWS_AS(parse_grid(""), FormatError);
  CHECK_THROWS_AS(parse_grid("0,x"), FormatError);

  const auto dir = scratch_dir("pipeline_sweep");
  auto config = small_run(dir);

  SUBCASE("a singleton grid equals a plain run") {
    const auto plain = train(config);
    const auto points = run_sweep(config, SweepAxis::kEpsilon, {config.epsilon});
    REQUIRE(points.size() == 1);
    CHECK(points[0].result.test_logits == plain.test_logits);
    CHECK(points[0].result.checkpoint == plain.checkpoint);
  }
  SUBCASE("epsilon grid writes one report per point") {
    const auto points = run_sweep(config, SweepAxis::kEpsilon, {0, 0.1, 0.2, 0.3, 0.4, 0.5}, dir / "eps");
    CHECK(points.size() == 6);
    for (const char* name : {"epsilon_0", "epsilon_0.1", "epsilon_0.2", "epsilon_0.3", "epsilon_0.4", "epsilon_0.5"}) {
      CHECK_MESSAGE(std::filesystem::exists(dir / "eps" / name / "metrics.tsv"), name);
    }
    CHECK(std::filesystem::exists(dir / "eps" / "sweep.tsv"));
    CHECK_THROWS_AS(run_sweep(config, SweepAxis::kEpsilon, {0.7}), PipelineError);
  }
  SUBCASE("wider models cost more") {
    config.epochs = 4;
    const auto points = run_sweep(config, SweepAxis::kHiddenDim, {32, 64, 128});
    CHECK(points[0].result.wall_clock_seconds < points[1].result.wall_clock_seconds);
    CHECK(points[1].result.wall_clock_seconds < points[2].result.wall_clock_seconds);
    CHECK_THROWS_AS(run_sweep(config, SweepAxis::kHiddenDim, {12.5}), PipelineError);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("held-out statistics differ from plain ones only on train messages") {
  const auto dir = scratch_dir("pipeline_holdout");
  const auto config = small_run(dir);
  const auto ds = load_for_config(config);
  const auto dict = build_stat_dictionary(ds);
  for (std::size_t i = 0; i < ds.records().size(); ++i) {
    const auto plain = record_stats(ds, i, dict, config.m_fixed, false);
    const auto held = record_stats(ds, i, dict, config.m_fixed, true);
    if (ds.split_of(i) == Split::kTrain) {
      for (std::size_t k = 0; k < plain.size(); ++k) CHECK(held[k] <= plain[k]);
    } else {
      CHECK(held == plain);
    }
  }
  const auto vnet_dim = dict.label_count();
  CHECK(train_stat_vectors(ds, dict, config.m_fixed, true).size() == ds.count(Split::kTrain));
  CHECK(vnet_dim == 4);
  std::filesystem::remove_all(dir);
}
