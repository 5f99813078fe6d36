#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2al/cohorts.hpp"
#include "c2al/model.hpp"
#include "c2al/synthdata.hpp"
#include "c2al/trainer.hpp"

namespace c2al {

struct CohortSelectConfig {
  DivMetric metric = DivMetric::js;
  int bins = 64;
  int min_count = 100;
  // Explicit segment choice; when absent, training reads a discovery report.
  std::optional<std::vector<int>> head;
  std::optional<std::vector<int>> tail;
};

struct EvalConfig {
  double tau = 0.01;
  int bins = 64;
};

// One config drives the whole pipeline. Unset seeds for generation,
// initialization and shuffling are derived from the global seed, so a single
// integer reseeds every stage.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  GenConfig gen;
  ModelConfig model;
  TrainConfig train;
  CohortSelectConfig cohorts;
  EvalConfig eval;

  static ExperimentConfig defaults();
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // FNV-1a of the canonical JSON, embedded in report artifacts.
  std::string hash() const;

  void validate() const;
};

// Geometric interpolation from head_rate down to tail_rate across segments.
std::vector<double> geometric_base_rates(int num_segments, double head_rate,
                                         double tail_rate);

}  // namespace c2al
