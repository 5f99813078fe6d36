#include "c2al/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "c2al/numerics.hpp"

namespace c2al {

using nlohmann::json;

double normalized_entropy(std::span<const double> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw ContractError("normalized_entropy: preds and labels differ in length");
  }
  if (preds.empty()) {
    throw ContractError("normalized_entropy: empty input");
  }
  std::int64_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw ContractError("normalized_entropy: labels must be 0/1");
    }
    positives += y;
  }
  const auto n = static_cast<std::int64_t>(labels.size());
  if (positives == 0 || positives == n) {
    throw UndefinedNeError("normalized_entropy: undefined on single-class labels");
  }
  const double mean = static_cast<double>(positives) / static_cast<double>(n);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    num += bce(preds[i], labels[i]);
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    den += bce(mean, labels[i]);
  }
  return num / den;
}

double ne_diff(double ne_treatment, double ne_baseline) {
  if (!(ne_baseline > 0.0)) {
    throw ContractError("ne_diff: baseline NE must be positive");
  }
  return (ne_treatment - ne_baseline) / ne_baseline;
}

namespace {

SegmentNe segment_entry(std::span<const double> preds, std::span<const int> labels,
                        const std::vector<std::size_t>& idx) {
  SegmentNe e;
  e.count = static_cast<std::int64_t>(idx.size());
  std::vector<double> p;
  std::vector<int> y;
  p.reserve(idx.size());
  y.reserve(idx.size());
  for (std::size_t i : idx) {
    p.push_back(preds[i]);
    y.push_back(labels[i]);
    e.positives += labels[i];
  }
  e.plr = e.count > 0 ? static_cast<double>(e.positives) / e.count : 0.0;
  try {
    e.ne = normalized_entropy(p, y);
    e.defined = true;
  } catch (const UndefinedNeError&) {
    e.defined = false;
    e.ne = 0.0;
  }
  return e;
}

}  // namespace

NeReport segment_ne_report(std::span<const double> preds, std::span<const int> labels,
                           std::span<const int> cohort_ids, const NeReport* baseline) {
  if (preds.size() != labels.size() || preds.size() != cohort_ids.size()) {
    throw ContractError("segment_ne_report: misaligned input lengths");
  }
  NeReport r;

  r.overall.count = static_cast<std::int64_t>(labels.size());
  for (int y : labels) {
    r.overall.positives += y;
  }
  r.overall.plr = r.overall.count > 0
                      ? static_cast<double>(r.overall.positives) / r.overall.count
                      : 0.0;
  try {
    r.overall.ne = normalized_entropy(preds, labels);
    r.overall.defined = true;
  } catch (const UndefinedNeError&) {
    r.overall.defined = false;
  }

  std::map<int, std::vector<std::size_t>> by_segment;
  for (std::size_t i = 0; i < cohort_ids.size(); ++i) {
    by_segment[cohort_ids[i]].push_back(i);
  }
  for (const auto& [seg, idx] : by_segment) {
    r.segments[seg] = segment_entry(preds, labels, idx);
  }

  if (baseline != nullptr) {
    if (r.overall.defined && baseline->overall.defined) {
      r.overall.ne_diff = ne_diff(r.overall.ne, baseline->overall.ne);
    }
    for (auto& [seg, entry] : r.segments) {
      const auto it = baseline->segments.find(seg);
      if (entry.defined && it != baseline->segments.end() && it->second.defined) {
        entry.ne_diff = ne_diff(entry.ne, it->second.ne);
      }
    }
  }
  return r;
}

namespace {

json segment_to_json(const SegmentNe& e) {
  json j;
  j["count"] = e.count;
  j["positives"] = e.positives;
  j["plr"] = e.plr;
  j["defined"] = e.defined;
  if (e.defined) {
    j["ne"] = e.ne;
  }
  if (e.ne_diff) {
    j["ne_diff"] = *e.ne_diff;
  }
  return j;
}

SegmentNe segment_from_json(const json& j) {
  SegmentNe e;
  j.at("count").get_to(e.count);
  j.at("positives").get_to(e.positives);
  j.at("plr").get_to(e.plr);
  j.at("defined").get_to(e.defined);
  if (e.defined) {
    j.at("ne").get_to(e.ne);
  }
  if (j.contains("ne_diff")) {
    e.ne_diff = j.at("ne_diff").get<double>();
  }
  return e;
}

}  // namespace

json ne_report_to_json(const NeReport& r) {
  json j;
  j["overall"] = segment_to_json(r.overall);
  json segs = json::object();
  for (const auto& [seg, entry] : r.segments) {
    segs[std::to_string(seg)] = segment_to_json(entry);
  }
  j["segments"] = segs;
  if (!r.baseline_name.empty()) {
    j["baseline"] = r.baseline_name;
  }
  return j;
}

NeReport ne_report_from_json(const json& j) {
  NeReport r;
  try {
    r.overall = segment_from_json(j.at("overall"));
    for (const auto& [key, v] : j.at("segments").items()) {
      r.segments[std::stoi(key)] = segment_from_json(v);
    }
    if (j.contains("baseline")) {
      r.baseline_name = j.at("baseline").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("ne report: ") + e.what());
  }
  return r;
}

AttentionStats attention_stats(const Matrix& Y, double tau, int bins) {
  if (Y.size() == 0) {
    throw ContractError("attention_stats: empty matrix");
  }
  if (!(tau > 0.0)) {
    throw ContractError("attention_stats: tau must be positive");
  }
  if (bins < 8) {
    throw ContractError("attention_stats: need at least 8 bins");
  }
  ensure_finite(Y, "attention_stats");

  AttentionStats s;
  s.tau = tau;
  s.bins = bins;
  const auto n = static_cast<double>(Y.size());

  const auto frac_below = [&](double t) {
    return static_cast<double>((Y.array().abs() < t).count()) / n;
  };
  s.near_zero_fraction = frac_below(tau);
  s.near_zero_sweep[tau / 10.0] = frac_below(tau / 10.0);
  s.near_zero_sweep[tau] = s.near_zero_fraction;
  s.near_zero_sweep[tau * 10.0] = frac_below(tau * 10.0);

  const double mean = Y.mean();
  const auto centered = (Y.array() - mean).eval();
  const double m2 = centered.square().mean();
  const double m4 = centered.square().square().mean();
  s.stddev = std::sqrt(m2);
  s.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

  s.range = Y.array().abs().maxCoeff();
  Vector counts = Vector::Zero(bins);
  if (s.range == 0.0) {
    counts[bins / 2] = n;
  } else {
    for (Index i = 0; i < Y.size(); ++i) {
      const double v = Y.data()[i];
      const int b = std::clamp(
          static_cast<int>((v + s.range) / (2.0 * s.range) * bins), 0, bins - 1);
      counts[b] += 1.0;
    }
  }
  s.histogram = counts / n;
  double entropy = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (s.histogram[b] > 0.0) {
      entropy -= s.histogram[b] * std::log2(s.histogram[b]);
    }
  }
  s.entropy_bits = entropy;
  return s;
}

StatsComparison compare_stats(const std::vector<SnapshotStats>& a,
                              const std::vector<SnapshotStats>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ContractError("compare_stats: snapshot series must align and be nonempty");
  }
  StatsComparison c;
  c.deltas.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step) {
      throw ContractError("compare_stats: snapshot schedules differ at index " +
                          std::to_string(i));
    }
    StatsDelta d;
    d.step = a[i].step;
    d.entropy = b[i].stats.entropy_bits - a[i].stats.entropy_bits;
    d.near_zero_fraction =
        b[i].stats.near_zero_fraction - a[i].stats.near_zero_fraction;
    d.stddev = b[i].stats.stddev - a[i].stats.stddev;
    c.deltas.push_back(d);
  }
  const AttentionStats& fa = a.back().stats;
  const AttentionStats& fb = b.back().stats;
  c.entropy_higher = fb.entropy_bits > fa.entropy_bits;
  c.sparsity_lower = fb.near_zero_fraction < fa.near_zero_fraction;
  return c;
}

}  // namespace c2al
