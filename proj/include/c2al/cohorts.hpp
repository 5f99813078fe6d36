#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2al/types.hpp"

namespace c2al {

struct PredHistogram {
  int bins = 0;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  Vector normalized;
};

// Uniform-width bins over [0, 1]; a prediction of exactly 1.0 lands in the
// last bin. Throws on an empty prediction list.
PredHistogram histogram(std::span<const double> preds, int bins);

// sum p log(p/q) with additive smoothing eps = 1e-10 on both sides, then
// renormalized. Natural log.
double kl(const PredHistogram& p, const PredHistogram& q);

// sqrt of the Jensen-Shannon divergence in log base 2, so the result lies in
// [0, 1].
double js_distance(const PredHistogram& p, const PredHistogram& q);

// Exact 1-D form: sum |CDF_p - CDF_q| * bin_width.
double wasserstein1(const PredHistogram& p, const PredHistogram& q);

// Cosine of the normalized histogram vectors; in [0, 1].
double cosine_sim(const PredHistogram& p, const PredHistogram& q);

enum class DivMetric { kl, js, wasserstein, cosine };

std::string to_string(DivMetric m);
DivMetric div_metric_from_string(const std::string& s);

struct DivergenceReport {
  DivMetric metric = DivMetric::js;
  int bins = 64;
  std::vector<int> segments;                // ids included, ascending
  std::vector<std::vector<double>> matrix;  // pairwise metric over segments
  int head = -1;
  int tail = -1;
  std::map<std::string, double> pair_metrics;  // all four metrics on the pair
  std::vector<int> excluded;                   // under-populated segment ids
  std::map<int, double> mean_pred;
};

// Builds the full pairwise divergence matrix and picks the pair attaining the
// matrix maximum (minimum for cosine). Ties break toward the lexicographically
// lowest (i, j). Within the winning pair, head is the segment with the higher
// mean prediction. Segments with fewer than min_count predictions are
// excluded and recorded.
DivergenceReport discover(const std::map<int, std::vector<double>>& preds_by_segment,
                          DivMetric metric, int bins, int min_count = 100);

nlohmann::json divergence_report_to_json(const DivergenceReport& r);
DivergenceReport divergence_report_from_json(const nlohmann::json& j);

}  // namespace c2al
