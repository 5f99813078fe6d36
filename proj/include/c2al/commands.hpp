#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "c2al/experiment.hpp"

namespace c2al {

// Pipeline entry points shared by the CLI binary and the test suites. Every
// command writes its artifacts under cfg.output_dir and returns the primary
// artifact path. Outputs contain no timestamps, so identical configs rewrite
// identical bytes.

// Dataset + per-segment positive-rate summary.
std::filesystem::path cmd_gen(const ExperimentConfig& cfg);

struct TrainOptions {
  bool c2al = false;
  std::optional<std::filesystem::path> cohort_report;
};

// Trains on the first 80% of the dataset (the last 20% is held out for
// evaluation). Writes final checkpoint(s), a snapshot series and the training
// log into output_dir/baseline or output_dir/c2al. A C2AL run additionally
// writes final_stripped.c2al, the serving artifact with aux heads removed.
std::filesystem::path cmd_train(const ExperimentConfig& cfg, const TrainOptions& opts);

// Runs baseline inference over the training split, grouped by segment, and
// writes the divergence report as cohorts_<metric>.json.
std::filesystem::path cmd_discover(const ExperimentConfig& cfg,
                                   const std::filesystem::path& checkpoint,
                                   std::optional<DivMetric> metric_override = {});

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> against;  // baseline checkpoint for NE_diff
  std::optional<std::filesystem::path> cohort_report;
  std::string out_stem = "eval";
};

// Normalized-entropy report over the held-out split: overall, per segment,
// and head/tail rollups when a cohort choice is available.
std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const EvalOptions& opts);

// Attention-weight statistics for two aligned snapshot series plus their
// comparison table and histogram charts.
std::filesystem::path cmd_analyze(const ExperimentConfig& cfg,
                                  const std::filesystem::path& snapshots_a,
                                  const std::filesystem::path& snapshots_b);

// First 80% / last 20% by position; both sides see the same split for any
// fixed dataset.
std::size_t train_split_size(std::size_t total);

}  // namespace c2al
