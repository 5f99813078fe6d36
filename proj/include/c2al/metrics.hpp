#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2al/types.hpp"

namespace c2al {

// Cross-entropy of the predictions divided by the cross-entropy of the
// constant predictor that outputs the empirical positive rate. Natural log,
// predictions clamped to [1e-12, 1 - 1e-12]. Throws UndefinedNeError when the
// labels are single-class.
double normalized_entropy(std::span<const double> preds, std::span<const int> labels);

// (ne_treatment - ne_baseline) / ne_baseline. Negative means improvement.
double ne_diff(double ne_treatment, double ne_baseline);

struct SegmentNe {
  std::int64_t count = 0;
  std::int64_t positives = 0;
  double plr = 0.0;
  bool defined = false;  // false when the segment is single-class
  double ne = 0.0;
  std::optional<double> ne_diff;
};

struct NeReport {
  SegmentNe overall;
  std::map<int, SegmentNe> segments;
  std::string baseline_name;  // set when ne_diff columns are present
};

// Overall plus per-segment normalized entropy. When a baseline report is
// supplied, NE_diff is filled wherever both sides are defined.
NeReport segment_ne_report(std::span<const double> preds, std::span<const int> labels,
                           std::span<const int> cohort_ids,
                           const NeReport* baseline = nullptr);

nlohmann::json ne_report_to_json(const NeReport& r);
NeReport ne_report_from_json(const nlohmann::json& j);

struct AttentionStats {
  double tau = 0.01;
  int bins = 64;
  double near_zero_fraction = 0.0;           // share of |y| < tau
  std::map<double, double> near_zero_sweep;  // at tau/10, tau, 10*tau
  double entropy_bits = 0.0;                 // of the histogram, base 2
  double stddev = 0.0;
  double excess_kurtosis = 0.0;
  double range = 0.0;  // histogram spans [-range, +range] = +-max|y|
  Vector histogram;    // normalized
};

// Entry-wise distribution statistics of an attention matrix. The histogram
// is symmetric around zero, so entropy is invariant under sign flips.
AttentionStats attention_stats(const Matrix& Y, double tau = 0.01, int bins = 64);

struct SnapshotStats {
  long step = 0;
  AttentionStats stats;
};

struct StatsDelta {
  long step = 0;
  double entropy = 0.0;
  double near_zero_fraction = 0.0;
  double stddev = 0.0;
};

struct StatsComparison {
  std::vector<StatsDelta> deltas;  // b minus a, per aligned step
  bool entropy_higher = false;     // b's final entropy strictly above a's
  bool sparsity_lower = false;     // b's final near-zero fraction strictly below a's
};

StatsComparison compare_stats(const std::vector<SnapshotStats>& a,
                              const std::vector<SnapshotStats>& b);

}  // namespace c2al
