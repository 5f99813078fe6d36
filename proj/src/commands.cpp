#include "c2al/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

#include "c2al/checkpoint.hpp"
#include "c2al/svg.hpp"

namespace c2al {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  const fs::path path = fs::path(cfg.output_dir) / "dataset.jsonl";
  if (!fs::exists(path)) {
    throw ContractError("dataset not found at " + path.string() +
                        "; run the gen command first");
  }
  return read_dataset(path);
}

std::vector<Sample> train_slice(const Dataset& ds) {
  const std::size_t n = train_split_size(ds.samples.size());
  return {ds.samples.begin(), ds.samples.begin() + n};
}

std::vector<Sample> eval_slice(const Dataset& ds) {
  const std::size_t n = train_split_size(ds.samples.size());
  return {ds.samples.begin() + n, ds.samples.end()};
}

void write_train_log(const fs::path& path, const std::vector<StepDiag>& log) {
  std::string out =
      "step,loss_total,loss_primary,loss_head,loss_tail,grad_norm_primary,"
      "grad_norm_aux,cos_aux_primary,decomposition_flag\n";
  for (const StepDiag& d : log) {
    out += std::to_string(d.step) + "," + num(d.loss_total) + "," +
           num(d.loss_primary) + "," + num(d.loss_head) + "," + num(d.loss_tail) +
           "," + num(d.grad_norm_primary) + "," + num(d.grad_norm_aux) + "," +
           num(d.cos_aux_primary) + "," + to_string(d.decomposition_flag) + "\n";
  }
  write_text_file(path, out);
}

void write_stats_csv(const fs::path& path, const std::vector<Snapshot>& snapshots) {
  std::string out =
      "step,near_zero_tau_div10,near_zero_tau,near_zero_tau_x10,entropy_bits,"
      "stddev,excess_kurtosis,range\n";
  for (const Snapshot& s : snapshots) {
    const auto& sweep = s.stats.near_zero_sweep;
    auto it = sweep.begin();
    const double lo = it->second;
    ++it;
    const double mid = it->second;
    ++it;
    const double hi = it->second;
    out += std::to_string(s.step) + "," + num(lo) + "," + num(mid) + "," +
           num(hi) + "," + num(s.stats.entropy_bits) + "," + num(s.stats.stddev) +
           "," + num(s.stats.excess_kurtosis) + "," + num(s.stats.range) + "\n";
  }
  write_text_file(path, out);
}

CohortSpec resolve_cohorts(const ExperimentConfig& cfg,
                           const std::optional<fs::path>& report_path) {
  CohortSpec spec;
  spec.num_segments = cfg.gen.num_segments;
  if (cfg.cohorts.head && cfg.cohorts.tail) {
    spec.head_segments = *cfg.cohorts.head;
    spec.tail_segments = *cfg.cohorts.tail;
  } else if (report_path) {
    const DivergenceReport r = divergence_report_from_json(load_json_file(*report_path));
    spec.head_segments = {r.head};
    spec.tail_segments = {r.tail};
  } else {
    throw ContractError(
        "no cohort source: set cohorts.head/tail in the config or pass a "
        "discovery report");
  }
  spec.validate();
  return spec;
}

// Group NE over the union of the given segments.
SegmentNe group_ne(std::span<const double> preds, std::span<const int> labels,
                   std::span<const int> cohorts, const std::vector<int>& segments) {
  std::vector<double> p;
  std::vector<int> y;
  SegmentNe e;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (std::find(segments.begin(), segments.end(), cohorts[i]) != segments.end()) {
      p.push_back(preds[i]);
      y.push_back(labels[i]);
      e.positives += labels[i];
    }
  }
  e.count = static_cast<std::int64_t>(p.size());
  e.plr = e.count > 0 ? static_cast<double>(e.positives) / e.count : 0.0;
  try {
    e.ne = normalized_entropy(p, y);
    e.defined = true;
  } catch (const UndefinedNeError&) {
    e.defined = false;
  } catch (const ContractError&) {
    e.defined = false;
  }
  return e;
}

// Histogram of matrix entries over a fixed symmetric range, for chart overlays.
Vector hist_on_range(const Matrix& y, double range, int bins) {
  Vector counts = Vector::Zero(bins);
  if (range <= 0.0) {
    counts[bins / 2] = static_cast<double>(y.size());
  } else {
    for (Index i = 0; i < y.size(); ++i) {
      const int b = std::clamp(
          static_cast<int>((y.data()[i] + range) / (2.0 * range) * bins), 0,
          bins - 1);
      counts[b] += 1.0;
    }
  }
  return counts / static_cast<double>(y.size());
}

struct LoadedSeries {
  std::vector<long> steps;
  std::vector<Matrix> attention;
};

LoadedSeries load_snapshot_series(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ContractError("snapshot directory not found: " + dir.string());
  }
  std::vector<std::pair<long, fs::path>> entries;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("step_", 0) == 0 && name.size() > 10 &&
        name.substr(name.size() - 5) == ".c2al") {
      entries.emplace_back(std::stol(name.substr(5, name.size() - 10)), entry.path());
    }
  }
  if (entries.empty()) {
    throw ContractError("no step_<N>.c2al files in " + dir.string());
  }
  std::sort(entries.begin(), entries.end());
  LoadedSeries s;
  for (const auto& [step, path] : entries) {
    s.steps.push_back(step);
    s.attention.push_back(load_checkpoint(path).params.attention);
  }
  return s;
}

}  // namespace

std::size_t train_split_size(std::size_t total) {
  return total - total / 5;
}

std::filesystem::path cmd_gen(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  const Dataset ds = generate(cfg.gen);
  const fs::path path = out_dir / "dataset.jsonl";
  write_dataset(ds, path);

  json summary;
  summary["config_hash"] = cfg.hash();
  json plr = json::object();
  for (int c = 0; c < ds.config.num_segments; ++c) {
    plr[std::to_string(c)] = ds.plr[c];
  }
  summary["plr"] = plr;
  json counts = json::object();
  for (int c = 0; c < ds.config.num_segments; ++c) {
    counts[std::to_string(c)] = ds.segment_counts[c];
  }
  summary["segment_counts"] = counts;
  write_json_file(out_dir / "plr.json", summary);
  return path;
}

std::filesystem::path cmd_train(const ExperimentConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  Dataset ds = load_dataset(cfg);

  TrainConfig tcfg = cfg.train;
  tcfg.c2al_enabled = opts.c2al;

  CohortSpec spec;
  if (opts.c2al) {
    spec = resolve_cohorts(cfg, opts.cohort_report);
    apply_cohort_labels(ds, spec);
  }

  const fs::path run_dir = fs::path(cfg.output_dir) / (opts.c2al ? "c2al" : "baseline");
  const fs::path snap_dir = run_dir / "snapshots";
  fs::create_directories(snap_dir);

  const std::vector<Sample> train_samples = train_slice(ds);
  const SnapshotHook hook = [&](long step, const ModelParams& params) {
    save_checkpoint(params, cfg.model,
                    snap_dir / ("step_" + std::to_string(step) + ".c2al"));
  };
  const TrainResult result = train(train_samples, tcfg, cfg.model, hook);

  save_checkpoint(result.params, cfg.model, run_dir / "final.c2al");
  if (opts.c2al) {
    save_checkpoint(strip_aux(result.params), cfg.model,
                    run_dir / "final_stripped.c2al");
  }
  write_train_log(run_dir / "train_log.csv", result.log);
  write_stats_csv(snap_dir / "stats.csv", result.snapshots);

  json run;
  run["config_hash"] = cfg.hash();
  run["config"] = cfg.to_json();
  run["mode"] = opts.c2al ? "c2al" : "baseline";
  if (opts.c2al) {
    run["head_segments"] = spec.head_segments;
    run["tail_segments"] = spec.tail_segments;
  }
  write_json_file(run_dir / "run.json", run);
  return run_dir;
}

std::filesystem::path cmd_discover(const ExperimentConfig& cfg,
                                   const std::filesystem::path& checkpoint,
                                   std::optional<DivMetric> metric_override) {
  cfg.validate();
  if (!fs::exists(checkpoint)) {
    throw ContractError("checkpoint not found: " + checkpoint.string());
  }
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(cfg);
  const std::vector<Sample> samples = train_slice(ds);

  std::map<int, std::vector<double>> preds_by_segment;
  for (const Sample& s : samples) {
    preds_by_segment[s.cohort].push_back(
        forward_sample(s.slots, ckpt.params, Mode::inference).primary.prob);
  }

  const DivMetric metric = metric_override.value_or(cfg.cohorts.metric);
  const DivergenceReport report =
      discover(preds_by_segment, metric, cfg.cohorts.bins, cfg.cohorts.min_count);

  json j = divergence_report_to_json(report);
  j["config_hash"] = cfg.hash();
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  const fs::path path = out_dir / ("cohorts_" + to_string(metric) + ".json");
  write_json_file(path, j);
  return path;
}

std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const EvalOptions& opts) {
  cfg.validate();
  if (!fs::exists(opts.checkpoint)) {
    throw ContractError("checkpoint not found: " + opts.checkpoint.string());
  }
  const Dataset ds = load_dataset(cfg);
  const std::vector<Sample> samples = eval_slice(ds);
  if (samples.empty()) {
    throw ContractError("eval: empty held-out split");
  }

  std::vector<int> labels;
  std::vector<int> cohorts;
  labels.reserve(samples.size());
  cohorts.reserve(samples.size());
  for (const Sample& s : samples) {
    labels.push_back(s.y);
    cohorts.push_back(s.cohort);
  }

  const auto predict_with = [&](const fs::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    return predict(samples, ckpt.params);
  };
  const std::vector<double> preds = predict_with(opts.checkpoint);

  std::optional<NeReport> baseline;
  std::vector<double> preds_base;
  if (opts.against) {
    if (!fs::exists(*opts.against)) {
      throw ContractError("checkpoint not found: " + opts.against->string());
    }
    preds_base = predict_with(*opts.against);
    baseline = segment_ne_report(preds_base, labels, cohorts);
    baseline->baseline_name = opts.against->string();
  }

  NeReport report = segment_ne_report(preds, labels, cohorts,
                                      baseline ? &*baseline : nullptr);
  if (baseline) {
    report.baseline_name = opts.against->string();
  }

  // Head/tail rollups when a cohort choice is available.
  std::optional<CohortSpec> spec;
  if (cfg.cohorts.head && cfg.cohorts.tail) {
    spec = resolve_cohorts(cfg, {});
  } else if (opts.cohort_report) {
    spec = resolve_cohorts(cfg, opts.cohort_report);
  } else {
    const fs::path default_report = fs::path(cfg.output_dir) /
        ("cohorts_" + to_string(cfg.cohorts.metric) + ".json");
    if (fs::exists(default_report)) {
      spec = resolve_cohorts(cfg, default_report);
    }
  }

  json j = ne_report_to_json(report);
  j["config_hash"] = cfg.hash();
  j["checkpoint"] = opts.checkpoint.string();

  std::string csv = "scope,count,positives,plr,ne,ne_diff\n";
  const auto csv_row = [&](const std::string& scope, const SegmentNe& e) {
    csv += scope + "," + std::to_string(e.count) + "," +
           std::to_string(e.positives) + "," + num(e.plr) + "," +
           (e.defined ? num(e.ne) : "undefined") + "," +
           (e.ne_diff ? num(*e.ne_diff) : "") + "\n";
  };
  csv_row("overall", report.overall);

  if (spec) {
    SegmentNe head = group_ne(preds, labels, cohorts, spec->head_segments);
    SegmentNe tail = group_ne(preds, labels, cohorts, spec->tail_segments);
    if (baseline) {
      const SegmentNe head_base =
          group_ne(preds_base, labels, cohorts, spec->head_segments);
      const SegmentNe tail_base =
          group_ne(preds_base, labels, cohorts, spec->tail_segments);
      if (head.defined && head_base.defined) {
        head.ne_diff = ne_diff(head.ne, head_base.ne);
      }
      if (tail.defined && tail_base.defined) {
        tail.ne_diff = ne_diff(tail.ne, tail_base.ne);
      }
    }
    json grp;
    grp["head_segments"] = spec->head_segments;
    grp["tail_segments"] = spec->tail_segments;
    json h;
    h["count"] = head.count;
    h["defined"] = head.defined;
    if (head.defined) h["ne"] = head.ne;
    if (head.ne_diff) h["ne_diff"] = *head.ne_diff;
    grp["head"] = h;
    json t;
    t["count"] = tail.count;
    t["defined"] = tail.defined;
    if (tail.defined) t["ne"] = tail.ne;
    if (tail.ne_diff) t["ne_diff"] = *tail.ne_diff;
    grp["tail"] = t;
    j["cohort_rollup"] = grp;
    csv_row("head", head);
    csv_row("tail", tail);
  }

  for (const auto& [seg, entry] : report.segments) {
    csv_row("segment_" + std::to_string(seg), entry);
  }

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  const fs::path json_path = out_dir / (opts.out_stem + ".json");
  write_json_file(json_path, j);
  write_text_file(out_dir / (opts.out_stem + ".csv"), csv);
  return json_path;
}

std::filesystem::path cmd_analyze(const ExperimentConfig& cfg,
                                  const std::filesystem::path& snapshots_a,
                                  const std::filesystem::path& snapshots_b) {
  cfg.validate();
  const LoadedSeries a = load_snapshot_series(snapshots_a);
  const LoadedSeries b = load_snapshot_series(snapshots_b);
  if (a.steps != b.steps) {
    throw ContractError("analyze: snapshot schedules are not aligned");
  }

  std::vector<SnapshotStats> stats_a;
  std::vector<SnapshotStats> stats_b;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    stats_a.push_back(
        {a.steps[i], attention_stats(a.attention[i], cfg.eval.tau, cfg.eval.bins)});
    stats_b.push_back(
        {b.steps[i], attention_stats(b.attention[i], cfg.eval.tau, cfg.eval.bins)});
  }
  const StatsComparison cmp = compare_stats(stats_a, stats_b);

  const fs::path out_dir = fs::path(cfg.output_dir) / "analysis";
  fs::create_directories(out_dir);

  std::string csv =
      "step,entropy_a,entropy_b,entropy_delta,near_zero_a,near_zero_b,"
      "near_zero_delta,stddev_a,stddev_b,stddev_delta\n";
  for (std::size_t i = 0; i < cmp.deltas.size(); ++i) {
    const auto& d = cmp.deltas[i];
    csv += std::to_string(d.step) + "," + num(stats_a[i].stats.entropy_bits) + "," +
           num(stats_b[i].stats.entropy_bits) + "," + num(d.entropy) + "," +
           num(stats_a[i].stats.near_zero_fraction) + "," +
           num(stats_b[i].stats.near_zero_fraction) + "," +
           num(d.near_zero_fraction) + "," + num(stats_a[i].stats.stddev) + "," +
           num(stats_b[i].stats.stddev) + "," + num(d.stddev) + "\n";
  }
  write_text_file(out_dir / "comparison.csv", csv);

  json j;
  j["config_hash"] = cfg.hash();
  j["series_a"] = snapshots_a.string();
  j["series_b"] = snapshots_b.string();
  j["entropy_higher"] = cmp.entropy_higher;
  j["sparsity_lower"] = cmp.sparsity_lower;
  j["final_entropy_a"] = stats_a.back().stats.entropy_bits;
  j["final_entropy_b"] = stats_b.back().stats.entropy_bits;
  j["final_near_zero_a"] = stats_a.back().stats.near_zero_fraction;
  j["final_near_zero_b"] = stats_b.back().stats.near_zero_fraction;
  write_json_file(out_dir / "comparison.json", j);

  const auto overlay = [&](std::size_t i) {
    const double range =
        std::max(stats_a[i].stats.range, stats_b[i].stats.range);
    std::vector<SvgSeries> series;
    series.push_back({"run_a", "#1f77b4",
                      hist_on_range(a.attention[i], range, cfg.eval.bins)});
    series.push_back({"run_b", "#d62728",
                      hist_on_range(b.attention[i], range, cfg.eval.bins)});
    return svg_line_chart("attention weights, step " + std::to_string(a.steps[i]),
                          "weight value", -range, range, series);
  };
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    write_text_file(out_dir / ("snapshot_" + std::to_string(a.steps[i]) + ".svg"),
                    overlay(i));
  }
  write_text_file(out_dir / "final_overlay.svg", overlay(a.steps.size() - 1));
  return out_dir;
}

}  // namespace c2al
