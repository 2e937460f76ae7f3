#include "asgnet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asgnet/common.hpp"

namespace asgnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs `fn`, rethrowing library errors as PipelineError tagged with `stage`.
template <typename F>
auto staged(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

LogDataset load_for_config(const RunConfig& config, std::vector<std::string>* warnings) {
  config.validate();
  if (config.dataset.empty()) throw Error("config does not name a dataset");
  LoadOptions options;
  options.split = SplitSpec::parse(config.split, config.seed);
  const auto labels = config.label_list();
  if (!labels.empty()) options.labels = LabelVocab(labels);
  options.warnings = warnings;
  return load_dataset(config.dataset, options);
}

std::vector<double> record_stats(const LogDataset& dataset, std::size_t index, const StatDictionary& dict,
                                 std::size_t m_fixed, bool held_out) {
  const auto& rec = dataset.records().at(index);
  if (held_out && dataset.split_of(index) == Split::kTrain) return held_out_normalized_stats(dict, rec, m_fixed);
  return normalized_stats(dict, rec, m_fixed);
}

std::vector<std::vector<double>> train_stat_vectors(const LogDataset& dataset, const StatDictionary& dict,
                                                    std::size_t m_fixed, bool held_out) {
  std::vector<std::vector<double>> out;
  for (std::size_t idx : dataset.indices(Split::kTrain)) out.push_back(record_stats(dataset, idx, dict, m_fixed, held_out));
  return out;
}

EmbeddingCache embed_all(const VNet& vnet, const LogDataset& dataset, const StatDictionary& dict,
                         std::size_t m_fixed, bool held_out) {
  EmbeddingCache cache(dict.content_hash(), vnet.config().latent_dim);
  for (std::size_t i = 0; i < dataset.records().size(); ++i) {
    cache.put(dataset.records()[i].message_id, vnet.embed(record_stats(dataset, i, dict, m_fixed, held_out)));
  }
  return cache;
}

Prepared prepare(const RunConfig& config) {
  staged("config", [&] { config.validate(); });
  std::vector<std::string> warnings;
  LogDataset dataset = staged("load", [&] { return load_for_config(config, &warnings); });
  StatDictionary dict = staged("build-stats", [&] { return build_stat_dictionary(dataset); });
  return staged("pretrain-vae", [&] {
    VNet vnet(VNetConfig{dict.label_count(), config.d_z, 64}, config.seed);
    const auto inputs = train_stat_vectors(dataset, dict, config.m_fixed, config.stats_holdout);
    PretrainConfig pc;
    pc.epochs = config.vae_epochs;
    pc.batch_size = config.batch_size;
    pc.learning_rate = config.vae_learning_rate;
    pc.kl_weight = config.kl_weight;
    pc.seed = config.seed;
    PretrainResult curve = pretrain(vnet, inputs, pc);
    EmbeddingCache cache = embed_all(vnet, dataset, dict, config.m_fixed, config.stats_holdout);
    return Prepared{std::move(dataset), std::move(dict), std::move(vnet), std::move(cache), std::move(curve)};
  });
}

ModelDims model_dims(const RunConfig& config, const LogDataset& dataset) {
  ModelDims d;
  d.vocab_size = dataset.vocab().size();
  d.label_count = dataset.labels().size();
  d.m_fixed = config.m_fixed;
  d.d_model = config.d_model;
  d.d_z = config.d_z;
  return d;
}

std::vector<std::vector<double>> predict_logits(const AsgModel& model, const LogDataset& dataset,
                                                const EmbeddingCache& embeddings,
                                                const std::vector<std::size_t>& indices, const RunConfig& config) {
  std::vector<TokenWindow> windows(indices.size());
  std::vector<const std::vector<double>*> stats(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& rec = dataset.records().at(indices[i]);
    stats[i] = embeddings.find(rec.message_id);
    if (!stats[i]) {
      throw Error("no statistics embedding for message " + std::to_string(rec.message_id) +
                  "; run the pretrain-vae preprocessing stage first");
    }
    windows[i] = make_window(dataset.vocab(), rec, config.m_fixed);
  }
  const GateConfig gate(config.epsilon);
  std::vector<std::vector<double>> out(indices.size());
  const auto n = static_cast<std::ptrdiff_t>(indices.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    NoGradGuard no_grad;
    const auto k = static_cast<std::size_t>(i);
    const Tensor logits = model.forward(windows[k], *stats[k], config.mode, gate);
    out[k].assign(logits.values().begin(), logits.values().end());
  }
  return out;
}

MetricsReport evaluate_model(const AsgModel& model, const LogDataset& dataset, const EmbeddingCache& embeddings,
                             Split split, const RunConfig& config) {
  const auto idx = dataset.indices(split);
  const auto logits = predict_logits(model, dataset, embeddings, idx, config);
  std::vector<std::size_t> truth(idx.size());
  std::vector<std::size_t> pred(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    truth[i] = dataset.records()[idx[i]].label_id;
    pred[i] = argmax(logits[i]);
  }
  MetricsReport r = compute_metrics(dataset.labels(), truth, pred);
  r.split = std::string(split_name(split));
  r.config_snapshot = config.to_text();
  return r;
}

TrainResult train_classifier(const RunConfig& config, const Prepared& prepared) {
  return staged("train", [&] {
    const auto start = Clock::now();
    config.validate();
    const LogDataset& ds = prepared.dataset;
    if (prepared.embeddings.dictionary_hash() != prepared.dictionary.content_hash()) {
      throw StaleArtifactError("embedding cache was computed from a different statistics dictionary");
    }
    AsgModel model(model_dims(config, ds), config.seed);
    Adam adam(model.params(), AdamConfig{config.learning_rate});
    const GateConfig gate(config.epsilon);

    const auto train_idx = ds.indices(Split::kTrain);
    if (train_idx.empty()) throw Error("train split is empty");
    std::vector<TokenWindow> windows(ds.records().size());
    std::vector<const std::vector<double>*> stats(ds.records().size());
    for (std::size_t i = 0; i < ds.records().size(); ++i) {
      const auto& rec = ds.records()[i];
      windows[i] = make_window(ds.vocab(), rec, config.m_fixed);
      stats[i] = prepared.embeddings.find(rec.message_id);
      if (!stats[i]) {
        throw Error("no statistics embedding for message " + std::to_string(rec.message_id) +
                    "; run the pretrain-vae preprocessing stage first");
      }
    }

    TrainResult result;
    const bool have_dev = ds.count(Split::kDev) > 0;
    double best_f1 = -1.0;
    auto best_params = model.params().snapshot();
    AdamState best_adam = adam.state();
    if (config.epochs == 0 || !have_dev) best_f1 = 0.0;

    Rng shuffle_rng(config.seed, rng_stream::kTrainShuffle);
    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
        const std::size_t end = std::min(order.size(), b + config.batch_size);
        std::vector<Tensor> logits;
        std::vector<std::size_t> labels;
        for (std::size_t k = b; k < end; ++k) {
          const std::size_t idx = order[k];
          logits.push_back(model.forward(windows[idx], *stats[idx], config.mode, gate));
          labels.push_back(ds.records()[idx].label_id);
        }
        adam.zero_grad();
        const Tensor loss = cross_entropy(concat_rows(logits), labels);
        backward(loss);
        adam.step();
        loss_sum += loss.item();
        ++batches;
      }
      result.train_loss.push_back(loss_sum / static_cast<double>(batches));
      if (have_dev) {
        const double f1 = evaluate_model(model, ds, prepared.embeddings, Split::kDev, config).macro_f1;
        result.dev_macro_f1.push_back(f1);
        if (f1 > best_f1) {
          best_f1 = f1;
          result.best_epoch = epoch;
          best_params = model.params().snapshot();
          best_adam = adam.state();
        }
      } else {
        result.best_epoch = epoch;
        best_params = model.params().snapshot();
        best_adam = adam.state();
      }
    }
    model.params().restore(best_params);
    model.params().zero_grad();

    result.checkpoint = Checkpoint::capture(model.params(), &best_adam);
    result.checkpoint.metadata["dictionary_hash"] = to_hex(prepared.dictionary.content_hash());
    result.checkpoint.metadata["train_hash"] = to_hex(ds.train_hash());
    result.checkpoint.metadata["mode"] = std::string(mode_name(config.mode));
    result.checkpoint.metadata["best_epoch"] = std::to_string(result.best_epoch);
    result.checkpoint.metadata["config"] = config.to_text();

    const auto test_idx = ds.indices(Split::kTest);
    result.test_logits = predict_logits(model, ds, prepared.embeddings, test_idx, config);
    result.test = evaluate_model(model, ds, prepared.embeddings, Split::kTest, config);
    result.dev = evaluate_model(model, ds, prepared.embeddings, Split::kDev, config);
    result.wall_clock_seconds = seconds_since(start);
    result.test.wall_clock_seconds = result.wall_clock_seconds;
    result.dev.wall_clock_seconds = result.wall_clock_seconds;
    return result;
  });
}

void save_prepared(const std::filesystem::path& dir, const RunConfig& config, const Prepared& prepared) {
  staged("write-artifacts", [&] {
    std::filesystem::create_directories(dir);
    write_text(dir / artifact::kConfig, config.to_text());
    save_stat_dictionary(dir / artifact::kStats, prepared.dictionary);
    Checkpoint vnet_ckpt = Checkpoint::capture(prepared.vnet.params(), &prepared.vae.optimizer);
    vnet_ckpt.metadata["dictionary_hash"] = to_hex(prepared.dictionary.content_hash());
    vnet_ckpt.metadata["latent_dim"] = std::to_string(prepared.vnet.config().latent_dim);
    save_checkpoint(dir / artifact::kVNet, vnet_ckpt);
    prepared.embeddings.save(dir / artifact::kEmbeddings);
    std::ostringstream curve;
    curve.precision(17);
    curve << "epoch\tloss\n";
    for (std::size_t e = 0; e < prepared.vae.epoch_loss.size(); ++e) curve << e << '\t' << prepared.vae.epoch_loss[e] << '\n';
    write_text(dir / artifact::kVaeCurve, curve.str());
  });
}

namespace {

void save_train_result(const std::filesystem::path& dir, const TrainResult& r) {
  staged("write-artifacts", [&] {
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / artifact::kModel, r.checkpoint);
    save_report(dir, artifact::kMetrics, r.test);
    save_report(dir, "dev_metrics", r.dev);
    std::ostringstream log;
    log.precision(17);
    log << "epoch\ttrain_loss\tdev_macro_f1\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
      log << e + 1 << '\t' << r.train_loss[e] << '\t' << (e < r.dev_macro_f1.size() ? r.dev_macro_f1[e] : 0.0) << '\n';
    }
    log << "# best_epoch " << r.best_epoch << '\n';
    write_text(dir / artifact::kTrainLog, log.str());
  });
}

}  // namespace

TrainResult train(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  const auto start = Clock::now();
  const Prepared prepared = prepare(config);
  if (out_dir) save_prepared(*out_dir, config, prepared);
  TrainResult r = train_classifier(config, prepared);
  r.wall_clock_seconds = seconds_since(start);
  r.test.wall_clock_seconds = r.wall_clock_seconds;
  if (out_dir) save_train_result(*out_dir, r);
  return r;
}

MetricsReport evaluate_run(const std::filesystem::path& run_dir, Split split,
                           const std::optional<RunConfig>& config_override) {
  const auto start = Clock::now();
  const RunConfig config =
      config_override ? *config_override : staged("load", [&] { return RunConfig::load(run_dir / artifact::kConfig); });
  LogDataset dataset = staged("load", [&] { return load_for_config(config); });
  const Checkpoint ckpt = staged("load", [&] { return load_checkpoint(run_dir / artifact::kModel); });
  const EmbeddingCache cache = staged("load", [&] { return EmbeddingCache::load(run_dir / artifact::kEmbeddings); });

  return staged("evaluate", [&] {
    const StatDictionary dict = build_stat_dictionary(dataset);
    const auto hash = to_hex(dict.content_hash());
    const auto it = ckpt.metadata.find("dictionary_hash");
    if (it == ckpt.metadata.end() || it->second != hash) {
      throw StaleArtifactError("checkpoint was trained on a different statistics dictionary (checkpoint " +
                               (it == ckpt.metadata.end() ? std::string("none") : it->second) + ", dataset " + hash +
                               "); retrain or point at the original dataset");
    }
    if (to_hex(cache.dictionary_hash()) != hash) {
      throw StaleArtifactError("embedding cache does not match the dataset's statistics dictionary; rerun pretrain-vae");
    }
    AsgModel model(model_dims(config, dataset), config.seed);
    ckpt.apply(model.params());
    MetricsReport r = evaluate_model(model, dataset, cache, split, config);
    r.wall_clock_seconds = seconds_since(start);
    return r;
  });
}

AblationResult run_ablation(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  const Prepared prepared = prepare(config);
  if (out_dir) save_prepared(*out_dir, config, prepared);
  AblationResult result;
  for (FusionMode mode : {FusionMode::kFull, FusionMode::kStatsOnly, FusionMode::kSemanticOnly, FusionMode::kNoGate}) {
    RunConfig c = config;
    c.mode = mode;
    TrainResult r = train_classifier(c, prepared);
    const std::string name(mode_name(mode));
    if (out_dir) save_train_result(*out_dir / name, r);
    result.runs.emplace(name, std::move(r));
  }
  if (out_dir) {
    std::ostringstream table;
    table.precision(17);
    table << "mode\tmacro_f1\tmicro_f1\twall_clock_seconds\n";
    for (const auto& [name, r] : result.runs) {
      table << name << '\t' << r.test.macro_f1 << '\t' << r.test.micro_f1 << '\t' << r.wall_clock_seconds << '\n';
    }
    write_text(*out_dir / "ablation.tsv", table.str());
  }
  return result;
}

SweepAxis parse_axis(std::string_view s) {
  if (s == "hidden_dim" || s == "d_model") return SweepAxis::kHiddenDim;
  if (s == "epsilon") return SweepAxis::kEpsilon;
  throw FormatError("unknown sweep axis '" + std::string(s) + "' (expected hidden_dim or epsilon)");
}

std::vector<double> parse_grid(std::string_view s) {
  std::vector<double> grid;
  std::stringstream ss{std::string(s)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw FormatError("invalid grid value '" + item + "'");
    }
  }
  if (grid.empty()) throw FormatError("sweep grid is empty");
  return grid;
}

std::vector<SweepPoint> run_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& grid,
                                  const std::optional<std::filesystem::path>& out_dir) {
  if (grid.empty()) throw PipelineError("sweep", "grid is empty");
  std::vector<RunConfig> configs;
  for (double v : grid) {
    RunConfig c = config;
    if (axis == SweepAxis::kEpsilon) {
      c.epsilon = v;
    } else {
      if (v < 1 || v != std::floor(v)) throw PipelineError("sweep", "hidden_dim values must be positive integers");
      c.d_model = static_cast<std::size_t>(v);
    }
    staged("config", [&] { c.validate(); });
    configs.push_back(c);
  }
  // Neither axis changes preprocessing, so every point shares it.
  const Prepared prepared = prepare(config);
  if (out_dir) save_prepared(*out_dir, config, prepared);
  std::vector<SweepPoint> points;
  const std::string axis_name = axis == SweepAxis::kEpsilon ? "epsilon" : "hidden_dim";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto start = Clock::now();
    TrainResult r = train_classifier(configs[i], prepared);
    r.wall_clock_seconds = seconds_since(start);
    if (out_dir) {
      std::ostringstream name;
      name << axis_name << "_" << grid[i];
      save_train_result(*out_dir / name.str(), r);
    }
    points.push_back({grid[i], std::move(r)});
  }
  if (out_dir) {
    std::ostringstream table;
    table.precision(17);
    table << axis_name << "\tmacro_f1\tmicro_f1\twall_clock_seconds\n";
    for (const auto& p : points) {
      table << p.value << '\t' << p.result.test.macro_f1 << '\t' << p.result.test.micro_f1 << '\t'
            << p.result.wall_clock_seconds << '\n';
    }
    write_text(*out_dir / "sweep.tsv", table.str());
  }
  return points;
}

}  // namespace asgnet
