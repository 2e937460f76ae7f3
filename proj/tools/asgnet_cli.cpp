// asgnet: command-line front end for the training pipeline.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "asgnet/config.hpp"
#include "asgnet/corpus.hpp"
#include "asgnet/pipeline.hpp"
#include "asgnet/statfeat.hpp"
#include "asgnet/synth.hpp"

namespace fs = std::filesystem;
using namespace asgnet;

namespace {

constexpr int kUsageError = 2;
constexpr int kPipelineError = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
};

void add_run_args(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Run configuration file (key = value lines)")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", args.overrides, "Override one config key, as key=value (repeatable)");
  cmd->add_option("-o,--out", args.out,
                  "Output directory (default: $ASGNET_OUT/<subcommand>, or ./asgnet_runs/<subcommand>)");
}

RunConfig resolve_config(const RunArgs& args) {
  RunConfig config;
  if (!args.config_path.empty()) {
    try {
      config = RunConfig::load(args.config_path);
    } catch (const std::exception& e) {
      throw PipelineError("config", e.what());
    }
  }
  for (const auto& o : args.overrides) {
    try {
      config.apply_override(o);
    } catch (const std::exception& e) {
      throw UsageError(std::string("--set ") + o + ": " + e.what());
    }
  }
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw PipelineError("config", e.what());
  }
  return config;
}

fs::path resolve_out(const std::string& flag, const std::string& subcommand) {
  if (!flag.empty()) return flag;
  const char* root = std::getenv("ASGNET_OUT");
  return fs::path(root && *root ? root : "asgnet_runs") / subcommand;
}

void write_config(const fs::path& dir, const RunConfig& config) {
  fs::create_directories(dir);
  std::ofstream(dir / artifact::kConfig) << config.to_text();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asgnet: log diagnosis with statistics-gated semantic features"};
  app.require_subcommand(1);

  // profile
  std::string profile_path;
  bool profile_labeled = false;
  bool profile_kv = false;
  auto* profile = app.add_subcommand("profile", "Print word-frequency statistics of a corpus");
  profile->add_option("corpus", profile_path, "Corpus file")->required()->check(CLI::ExistingFile);
  profile->add_flag("--labeled", profile_labeled, "Lines are <label>\\t<task_id>\\t<message>; profile the message only");
  profile->add_flag("--kv", profile_kv, "Machine-readable key/value output");

  // synth
  std::string synth_spec;
  std::string synth_output;
  std::uint64_t synth_seed = 7;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus from a JSON spec");
  synth->add_option("--spec", synth_spec, "Synthetic corpus spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--output", synth_output, "Corpus path; the manifest goes next to it")->required();

  RunArgs stats_args, vae_args, train_args, ablate_args, sweep_args, eval_args;
  auto* build_stats = app.add_subcommand("build-stats", "Build the statistics dictionary from the train split");
  add_run_args(build_stats, stats_args);
  auto* pretrain_vae = app.add_subcommand("pretrain-vae", "Build statistics, pretrain the V-Net and cache embeddings");
  add_run_args(pretrain_vae, vae_args);
  auto* train_cmd = app.add_subcommand("train", "Run the full pipeline and train the classifier");
  add_run_args(train_cmd, train_args);
  auto* ablate = app.add_subcommand("ablate", "Train the full model and the stats_only, semantic_only, no_gate ablations");
  add_run_args(ablate, ablate_args);

  std::string sweep_axis;
  std::string sweep_grid;
  auto* sweep = app.add_subcommand("sweep", "Train once per grid value of one hyperparameter");
  add_run_args(sweep, sweep_args);
  sweep->add_option("--axis", sweep_axis, "hidden_dim or epsilon")->required();
  sweep->add_option("--grid", sweep_grid, "Comma-separated values, e.g. 0,0.1,0.2")->required();

  std::string eval_run;
  std::string eval_split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Re-evaluate a trained run directory");
  evaluate->add_option("--run", eval_run, "Run directory written by train")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--split", eval_split, "train, dev or test")->capture_default_str();
  add_run_args(evaluate, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*profile) {
      ProfileOptions opts;
      opts.labeled = profile_labeled;
      CorpusProfile p;
      try {
        p = profile_corpus(profile_path, opts);
      } catch (const std::exception& e) {
        throw PipelineError("profile", e.what());
      }
      if (profile_kv) {
        write_profile_kv(std::cout, p);
      } else {
        write_profile_text(std::cout, p);
      }
    } else if (*synth) {
      try {
        const auto manifest = generate_synthetic(SynthSpec::load(synth_spec), synth_seed, fs::path(synth_output));
        std::cout << "wrote " << manifest.lines << " lines to " << synth_output << '\n';
      } catch (const std::exception& e) {
        throw PipelineError("synth", e.what());
      }
    } else if (*build_stats) {
      const RunConfig config = resolve_config(stats_args);
      const fs::path out = resolve_out(stats_args.out, "build-stats");
      std::vector<std::string> warnings;
      LogDataset ds = [&] {
        try {
          return load_for_config(config, &warnings);
        } catch (const std::exception& e) {
          throw PipelineError("load", e.what());
        }
      }();
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      try {
        write_config(out, config);
        save_stat_dictionary(out / artifact::kStats, build_stat_dictionary(ds));
      } catch (const std::exception& e) {
        throw PipelineError("build-stats", e.what());
      }
      std::cout << "wrote " << (out / artifact::kStats).string() << '\n';
    } else if (*pretrain_vae) {
      const RunConfig config = resolve_config(vae_args);
      const fs::path out = resolve_out(vae_args.out, "pretrain-vae");
      const Prepared prepared = prepare(config);
      save_prepared(out, config, prepared);
      std::cout << "V-Net loss " << prepared.vae.epoch_loss.front() << " -> " << prepared.vae.epoch_loss.back()
                << "; artifacts in " << out.string() << '\n';
    } else if (*train_cmd) {
      const RunConfig config = resolve_config(train_args);
      const fs::path out = resolve_out(train_args.out, "train");
      const TrainResult r = train(config, out);
      std::cout << r.test.summary() << "artifacts in " << out.string() << '\n';
    } else if (*evaluate) {
      std::optional<RunConfig> override_config;
      if (!eval_args.config_path.empty() || !eval_args.overrides.empty()) {
        RunArgs args = eval_args;
        if (args.config_path.empty()) args.config_path = (fs::path(eval_run) / artifact::kConfig).string();
        override_config = resolve_config(args);
      }
      Split split;
      try {
        split = parse_split(eval_split);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      const MetricsReport r = evaluate_run(eval_run, split, override_config);
      const fs::path out = eval_args.out.empty() ? fs::path(eval_run) : fs::path(eval_args.out);
      save_report(out, "eval_" + eval_split, r);
      std::cout << r.summary();
    } else if (*ablate) {
      const RunConfig config = resolve_config(ablate_args);
      const fs::path out = resolve_out(ablate_args.out, "ablate");
      const AblationResult r = run_ablation(config, out);
      for (const auto& [mode, run] : r.runs) std::cout << mode << "\tmacro_f1=" << run.test.macro_f1 << '\n';
      std::cout << "artifacts in " << out.string() << '\n';
    } else if (*sweep) {
      const RunConfig config = resolve_config(sweep_args);
      SweepAxis axis;
      std::vector<double> grid;
      try {
        axis = parse_axis(sweep_axis);
        grid = parse_grid(sweep_grid);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      const fs::path out = resolve_out(sweep_args.out, "sweep");
      const auto points = run_sweep(config, axis, grid, out);
      for (const auto& p : points) std::cout << sweep_axis << '=' << p.value << "\tmacro_f1=" << p.result.test.macro_f1 << '\n';
      std::cout << "artifacts in " << out.string() << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kUsageError;
  } catch (const PipelineError& e) {
    std::cerr << "error [" << e.stage() << "] " << e.what() << '\n';
    return kPipelineError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPipelineError;
  }
  return 0;
}
