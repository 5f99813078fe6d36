#include "c2al/cohorts.hpp"

#include <algorithm>
#include <cmath>

namespace c2al {

using nlohmann::json;

namespace {

constexpr double kSmoothing = 1e-10;

void check_compatible(const PredHistogram& p, const PredHistogram& q) {
  if (p.bins != q.bins) {
    throw ContractError("divergence: histograms have different bin counts");
  }
  if (p.bins < 2) {
    throw ContractError("divergence: histograms must have >= 2 bins");
  }
}

Vector smoothed(const PredHistogram& h) {
  Vector v = h.normalized.array() + kSmoothing;
  return v / v.sum();
}

}  // namespace

PredHistogram histogram(std::span<const double> preds, int bins) {
  if (preds.empty()) {
    throw ContractError("histogram: empty prediction list");
  }
  if (bins < 2) {
    throw ContractError("histogram: need at least 2 bins");
  }
  PredHistogram h;
  h.bins = bins;
  h.counts.assign(bins, 0);
  for (double p : preds) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ContractError("histogram: predictions must lie in [0, 1]");
    }
    const int b = std::min(static_cast<int>(p * bins), bins - 1);
    h.counts[b] += 1;
  }
  h.total = static_cast<std::int64_t>(preds.size());
  h.normalized = Vector(bins);
  for (int b = 0; b < bins; ++b) {
    h.normalized[b] = static_cast<double>(h.counts[b]) / h.total;
  }
  return h;
}

double kl(const PredHistogram& p, const PredHistogram& q) {
  check_compatible(p, q);
  const Vector ps = smoothed(p);
  const Vector qs = smoothed(q);
  double sum = 0.0;
  for (int b = 0; b < p.bins; ++b) {
    sum += ps[b] * std::log(ps[b] / qs[b]);
  }
  return std::max(sum, 0.0);
}

double js_distance(const PredHistogram& p, const PredHistogram& q) {
  check_compatible(p, q);
  double div = 0.0;
  for (int b = 0; b < p.bins; ++b) {
    const double pb = p.normalized[b];
    const double qb = q.normalized[b];
    const double mb = 0.5 * (pb + qb);
    if (pb > 0.0) {
      div += 0.5 * pb * std::log2(pb / mb);
    }
    if (qb > 0.0) {
      div += 0.5 * qb * std::log2(qb / mb);
    }
  }
  return std::sqrt(std::max(div, 0.0));
}

double wasserstein1(const PredHistogram& p, const PredHistogram& q) {
  check_compatible(p, q);
  const double width = 1.0 / p.bins;
  double cdf_p = 0.0;
  double cdf_q = 0.0;
  double sum = 0.0;
  for (int b = 0; b < p.bins; ++b) {
    cdf_p += p.normalized[b];
    cdf_q += q.normalized[b];
    sum += std::abs(cdf_p - cdf_q);
  }
  return sum * width;
}

double cosine_sim(const PredHistogram& p, const PredHistogram& q) {
  check_compatible(p, q);
  const double np = p.normalized.norm();
  const double nq = q.normalized.norm();
  if (np == 0.0 || nq == 0.0) {
    throw ContractError("cosine_sim: zero histogram vector");
  }
  return p.normalized.dot(q.normalized) / (np * nq);
}

std::string to_string(DivMetric m) {
  switch (m) {
    case DivMetric::kl: return "kl";
    case DivMetric::js: return "js";
    case DivMetric::wasserstein: return "wasserstein";
    case DivMetric::cosine: return "cosine";
  }
  throw ContractError("unknown divergence metric");
}

DivMetric div_metric_from_string(const std::string& s) {
  if (s == "kl") return DivMetric::kl;
  if (s == "js") return DivMetric::js;
  if (s == "wasserstein") return DivMetric::wasserstein;
  if (s == "cosine") return DivMetric::cosine;
  throw ContractError("unknown divergence metric: " + s);
}

DivergenceReport discover(const std::map<int, std::vector<double>>& preds_by_segment,
                          DivMetric metric, int bins, int min_count) {
  DivergenceReport r;
  r.metric = metric;
  r.bins = bins;

  std::vector<int> ids;
  std::vector<PredHistogram> hists;
  for (const auto& [id, preds] : preds_by_segment) {
    if (static_cast<int>(preds.size()) < min_count) {
      r.excluded.push_back(id);
      continue;
    }
    ids.push_back(id);
    hists.push_back(histogram(preds, bins));
    double mean = 0.0;
    for (double p : preds) {
      mean += p;
    }
    r.mean_pred[id] = mean / static_cast<double>(preds.size());
  }
  if (ids.size() < 2) {
    throw ContractError("discover: need at least 2 populated segments");
  }
  r.segments = ids;

  const auto value = [&](int a, int b) -> double {
    switch (metric) {
      case DivMetric::kl: return kl(hists[a], hists[b]);
      case DivMetric::js: return js_distance(hists[a], hists[b]);
      case DivMetric::wasserstein: return wasserstein1(hists[a], hists[b]);
      case DivMetric::cosine: return cosine_sim(hists[a], hists[b]);
    }
    throw ContractError("unknown divergence metric");
  };

  const std::size_t n = ids.size();
  r.matrix.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) {
        r.matrix[i][j] = value(static_cast<int>(i), static_cast<int>(j));
      } else if (metric == DivMetric::cosine) {
        r.matrix[i][j] = 1.0;
      }
    }
  }

  const bool minimize = metric == DivMetric::cosine;
  std::size_t best_i = 0;
  std::size_t best_j = 1;
  double best = r.matrix[0][1];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        continue;
      }
      const double v = r.matrix[i][j];
      if (minimize ? v < best : v > best) {
        best = v;
        best_i = i;
        best_j = j;
      }
    }
  }

  const int a = ids[best_i];
  const int b = ids[best_j];
  // Higher mean prediction is the head. On a tie, the lower id.
  const bool a_is_head = r.mean_pred[a] > r.mean_pred[b] ||
                         (r.mean_pred[a] == r.mean_pred[b] && a < b);
  const std::size_t head_idx = a_is_head ? best_i : best_j;
  const std::size_t tail_idx = a_is_head ? best_j : best_i;
  r.head = ids[head_idx];
  r.tail = ids[tail_idx];

  r.pair_metrics["kl_head_tail"] = kl(hists[head_idx], hists[tail_idx]);
  r.pair_metrics["kl_tail_head"] = kl(hists[tail_idx], hists[head_idx]);
  r.pair_metrics["js"] = js_distance(hists[head_idx], hists[tail_idx]);
  r.pair_metrics["wasserstein"] = wasserstein1(hists[head_idx], hists[tail_idx]);
  r.pair_metrics["cosine"] = cosine_sim(hists[head_idx], hists[tail_idx]);
  return r;
}

json divergence_report_to_json(const DivergenceReport& r) {
  json j;
  j["metric"] = to_string(r.metric);
  j["bins"] = r.bins;
  j["segments"] = r.segments;
  j["matrix"] = r.matrix;
  j["head"] = r.head;
  j["tail"] = r.tail;
  j["pair_metrics"] = r.pair_metrics;
  j["excluded"] = r.excluded;
  json means = json::object();
  for (const auto& [id, m] : r.mean_pred) {
    means[std::to_string(id)] = m;
  }
  j["mean_pred"] = means;
  return j;
}

DivergenceReport divergence_report_from_json(const json& j) {
  DivergenceReport r;
  try {
    r.metric = div_metric_from_string(j.at("metric").get<std::string>());
    j.at("bins").get_to(r.bins);
    j.at("segments").get_to(r.segments);
    j.at("matrix").get_to(r.matrix);
    j.at("head").get_to(r.head);
    j.at("tail").get_to(r.tail);
    j.at("pair_metrics").get_to(r.pair_metrics);
    j.at("excluded").get_to(r.excluded);
    for (const auto& [key, v] : j.at("mean_pred").items()) {
      r.mean_pred[std::stoi(key)] = v.get<double>();
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("divergence report: ") + e.what());
  }
  return r;
}

}  // namespace c2al
