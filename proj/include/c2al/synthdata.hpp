#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2al/model.hpp"

namespace c2al {

struct CohortSpec {
  std::string axis_name = "segment";
  int num_segments = 0;
  std::vector<int> head_segments;
  std::vector<int> tail_segments;

  void validate() const;  // disjoint head/tail, ids in range
  bool in_head(int segment) const;
  bool in_tail(int segment) const;
};

struct GenConfig {
  std::int64_t num_samples = 200000;
  int num_segments = 10;
  std::vector<double> base_rates;  // per-segment target positive rate
  std::vector<double> priors;      // per-segment sampling probability
  int latent_dim = 4;
  double w_strength = 0.5;         // norm of the per-segment weight vectors
  double w_dispersion = 1.0;       // angular spread of those vectors
  // Explicit weight vectors override the seeded draw.
  std::optional<std::vector<std::vector<double>>> weights;
  int cohort_slot = 0;             // slot whose index encodes the segment id
  std::vector<int> head_segments = {0};  // planted cohorts for stored aux labels
  std::vector<int> tail_segments = {9};
  int num_slots = 6;
  std::vector<int> vocab_sizes = {10, 32, 32, 32, 32, 32};
  std::uint64_t seed = 1;

  void validate() const;
  CohortSpec planted_spec() const;
};

nlohmann::json gen_config_to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j);

struct Dataset {
  GenConfig config;
  std::vector<Sample> samples;
  std::vector<double> plr;                 // empirical per-segment positive rate
  std::vector<std::int64_t> segment_counts;
};

// Each sample: segment c ~ priors, latent z ~ N(0, I), slot indices from
// per-slot unit projections of z quantile-mapped into the vocab, the cohort
// slot carrying c directly, and y ~ Bernoulli(sigmoid(logit(b_c) + w_c.z)).
// A pure function of the config, including its seed.
Dataset generate(const GenConfig& cfg);

// (y_head, y_tail) = (y * [c in head], y * [c in tail]).
std::pair<int, int> derive_aux_labels(int y, int cohort_id, const CohortSpec& spec);

// Rewrites every sample's aux labels under a new head/tail choice.
void apply_cohort_labels(Dataset& ds, const CohortSpec& spec);

// One JSON object per line. The first line is a header
// {"config": ..., "plr": {...}}; sample lines are
// {"f": [...], "c": id, "y": 0|1, "yh": 0|1, "yt": 0|1}.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace c2al
