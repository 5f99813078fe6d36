// Command-line pipeline: gen -> train -> discover -> train --c2al -> eval ->
// analyze, all driven by one JSON config. Exit codes: 0 success, 2 config or
// usage error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "c2al/commands.hpp"

namespace {

c2al::ExperimentConfig load_config(const std::string& path) {
  c2al::ExperimentConfig cfg = c2al::ExperimentConfig::load(path);
  if (const char* dir = std::getenv("C2AL_OUTPUT_DIR"); dir != nullptr && *dir) {
    cfg.output_dir = dir;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factorization-machine attention with cohort-contrastive auxiliary tasks"};
  app.require_subcommand(1);

  std::string config_path;

  auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  gen->add_option("--config", config_path, "experiment config JSON")->required();

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  bool baseline_flag = false;
  bool c2al_flag = false;
  std::string cohort_report;
  train->add_flag("--baseline", baseline_flag, "single-task objective only");
  train->add_flag("--c2al", c2al_flag, "with cohort-contrastive auxiliary tasks");
  train->add_option("--cohort-report", cohort_report,
                    "discovery report supplying the head/tail pair");

  auto* discover = app.add_subcommand("discover", "rank cohort divergence");
  discover->add_option("--config", config_path, "experiment config JSON")->required();
  std::string discover_checkpoint;
  std::string metric;
  discover->add_option("--checkpoint", discover_checkpoint, "baseline checkpoint")
      ->required();
  discover->add_option("--metric", metric, "kl | js | wasserstein | cosine");

  auto* eval = app.add_subcommand("eval", "normalized-entropy report");
  eval->add_option("--config", config_path, "experiment config JSON")->required();
  std::string eval_checkpoint;
  std::string against;
  std::string eval_cohort_report;
  std::string out_stem = "eval";
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate")
      ->required();
  eval->add_option("--against", against, "baseline checkpoint for NE_diff columns");
  eval->add_option("--cohort-report", eval_cohort_report,
                   "cohort report for head/tail rollups");
  eval->add_option("--out", out_stem, "output file stem (default eval)");

  auto* analyze = app.add_subcommand("analyze", "attention-weight statistics");
  analyze->add_option("--config", config_path, "experiment config JSON")->required();
  std::string snapshots_dir;
  std::string against_dir;
  analyze->add_option("--snapshots", snapshots_dir, "snapshot directory (run A)")
      ->required();
  analyze->add_option("--against", against_dir, "snapshot directory (run B)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const c2al::ExperimentConfig cfg = load_config(config_path);
    if (gen->parsed()) {
      const auto path = c2al::cmd_gen(cfg);
      std::cout << "wrote " << path.string() << "\n";
    } else if (train->parsed()) {
      if (baseline_flag == c2al_flag) {
        std::cerr << "train: pass exactly one of --baseline or --c2al\n";
        return 2;
      }
      c2al::TrainOptions opts;
      opts.c2al = c2al_flag;
      if (!cohort_report.empty()) {
        opts.cohort_report = cohort_report;
      }
      const auto dir = c2al::cmd_train(cfg, opts);
      std::cout << "wrote " << dir.string() << "\n";
    } else if (discover->parsed()) {
      std::optional<c2al::DivMetric> override_metric;
      if (!metric.empty()) {
        override_metric = c2al::div_metric_from_string(metric);
      }
      const auto path = c2al::cmd_discover(cfg, discover_checkpoint, override_metric);
      std::cout << "wrote " << path.string() << "\n";
    } else if (eval->parsed()) {
      c2al::EvalOptions opts;
      opts.checkpoint = eval_checkpoint;
      if (!against.empty()) {
        opts.against = against;
      }
      if (!eval_cohort_report.empty()) {
        opts.cohort_report = eval_cohort_report;
      }
      opts.out_stem = out_stem;
      const auto path = c2al::cmd_eval(cfg, opts);
      std::cout << "wrote " << path.string() << "\n";
    } else if (analyze->parsed()) {
      const auto dir = c2al::cmd_analyze(cfg, snapshots_dir, against_dir);
      std::cout << "wrote " << dir.string() << "\n";
    }
  } catch (const c2al::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const c2al::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const c2al::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
