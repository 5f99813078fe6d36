#include "c2al/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "c2al/numerics.hpp"
#include "c2al/rng.hpp"

namespace c2al {

using nlohmann::json;

void CohortSpec::validate() const {
  if (num_segments < 1) {
    throw ContractError("CohortSpec: num_segments must be >= 1");
  }
  std::set<int> head(head_segments.begin(), head_segments.end());
  for (int t : tail_segments) {
    if (head.count(t) != 0) {
      throw ContractError("CohortSpec: head and tail segments must be disjoint");
    }
  }
  for (int s : head_segments) {
    if (s < 0 || s >= num_segments) {
      throw ContractError("CohortSpec: head segment id out of range");
    }
  }
  for (int s : tail_segments) {
    if (s < 0 || s >= num_segments) {
      throw ContractError("CohortSpec: tail segment id out of range");
    }
  }
}

bool CohortSpec::in_head(int segment) const {
  return std::find(head_segments.begin(), head_segments.end(), segment) !=
         head_segments.end();
}

bool CohortSpec::in_tail(int segment) const {
  return std::find(tail_segments.begin(), tail_segments.end(), segment) !=
         tail_segments.end();
}

void GenConfig::validate() const {
  if (num_samples < 1) {
    throw ContractError("GenConfig: num_samples must be >= 1");
  }
  if (num_segments < 1) {
    throw ContractError("GenConfig: num_segments must be >= 1");
  }
  if (static_cast<int>(base_rates.size()) != num_segments) {
    throw ContractError("GenConfig: base_rates must have one entry per segment");
  }
  for (double b : base_rates) {
    if (!(b > 0.0 && b < 1.0)) {
      throw ContractError("GenConfig: base rates must lie strictly inside (0, 1)");
    }
  }
  if (static_cast<int>(priors.size()) != num_segments) {
    throw ContractError("GenConfig: priors must have one entry per segment");
  }
  double total = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0)) {
      throw ContractError("GenConfig: priors must be nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ContractError("GenConfig: priors must sum to 1");
  }
  if (latent_dim < 1) {
    throw ContractError("GenConfig: latent_dim must be >= 1");
  }
  if (!(w_strength >= 0.0) || !(w_dispersion >= 0.0)) {
    throw ContractError("GenConfig: w_strength and w_dispersion must be >= 0");
  }
  if (weights) {
    if (static_cast<int>(weights->size()) != num_segments) {
      throw ContractError("GenConfig: explicit weights need one vector per segment");
    }
    for (const auto& w : *weights) {
      if (static_cast<int>(w.size()) != latent_dim) {
        throw ContractError("GenConfig: explicit weight vectors must match latent_dim");
      }
    }
  }
  if (num_slots < 2 || static_cast<int>(vocab_sizes.size()) != num_slots) {
    throw ContractError("GenConfig: need >= 2 slots and one vocab size per slot");
  }
  if (cohort_slot < 0 || cohort_slot >= num_slots) {
    throw ContractError("GenConfig: cohort_slot out of range");
  }
  if (vocab_sizes[cohort_slot] < num_segments) {
    throw ContractError("GenConfig: cohort slot vocab must cover all segments");
  }
  planted_spec().validate();
}

CohortSpec GenConfig::planted_spec() const {
  CohortSpec spec;
  spec.num_segments = num_segments;
  spec.head_segments = head_segments;
  spec.tail_segments = tail_segments;
  return spec;
}

json gen_config_to_json(const GenConfig& cfg) {
  json j;
  j["num_samples"] = cfg.num_samples;
  j["num_segments"] = cfg.num_segments;
  j["base_rates"] = cfg.base_rates;
  j["priors"] = cfg.priors;
  j["latent_dim"] = cfg.latent_dim;
  j["w_strength"] = cfg.w_strength;
  j["w_dispersion"] = cfg.w_dispersion;
  if (cfg.weights) {
    j["weights"] = *cfg.weights;
  }
  j["cohort_slot"] = cfg.cohort_slot;
  j["head_segments"] = cfg.head_segments;
  j["tail_segments"] = cfg.tail_segments;
  j["num_slots"] = cfg.num_slots;
  j["vocab_sizes"] = cfg.vocab_sizes;
  j["seed"] = cfg.seed;
  return j;
}

GenConfig gen_config_from_json(const json& j) {
  GenConfig cfg;
  try {
    j.at("num_samples").get_to(cfg.num_samples);
    j.at("num_segments").get_to(cfg.num_segments);
    j.at("base_rates").get_to(cfg.base_rates);
    j.at("priors").get_to(cfg.priors);
    j.at("latent_dim").get_to(cfg.latent_dim);
    j.at("w_strength").get_to(cfg.w_strength);
    j.at("w_dispersion").get_to(cfg.w_dispersion);
    if (j.contains("weights")) {
      cfg.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    }
    j.at("cohort_slot").get_to(cfg.cohort_slot);
    j.at("head_segments").get_to(cfg.head_segments);
    j.at("tail_segments").get_to(cfg.tail_segments);
    j.at("num_slots").get_to(cfg.num_slots);
    j.at("vocab_sizes").get_to(cfg.vocab_sizes);
    j.at("seed").get_to(cfg.seed);
  } catch (const json::exception& e) {
    throw IoError(std::string("gen config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double logit(double p) { return std::log(p / (1.0 - p)); }

Vector random_unit(int dim, Rng& rng) {
  Vector v(dim);
  double norm2 = 0.0;
  do {
    for (int i = 0; i < dim; ++i) {
      v[i] = rng.normal();
    }
    norm2 = v.squaredNorm();
  } while (norm2 == 0.0);
  return v / std::sqrt(norm2);
}

// Per-segment conditional weights, drawn once per config seed. The direction
// rotates smoothly along the segment axis inside a seeded plane:
//   w_c = strength * (cos(phi_c) u0 + sin(phi_c) u1),
//   phi_c = dispersion * (c / (N-1) - 1/2) * pi/2
// so dispersion 1 puts the two extreme segments 90 degrees apart while the
// central mass shares a common direction, and dispersion 0 collapses all
// segments onto u0.
std::vector<Vector> draw_segment_weights(const GenConfig& cfg, const Rng& root) {
  std::vector<Vector> w(cfg.num_segments);
  if (cfg.weights) {
    for (int c = 0; c < cfg.num_segments; ++c) {
      w[c] = Eigen::Map<const Vector>((*cfg.weights)[c].data(), cfg.latent_dim);
    }
    return w;
  }
  Rng rng = root.split("weights");
  const Vector u0 = random_unit(cfg.latent_dim, rng);
  Vector u1 = Vector::Zero(cfg.latent_dim);
  if (cfg.latent_dim > 1) {
    do {
      const Vector raw = random_unit(cfg.latent_dim, rng);
      u1 = raw - raw.dot(u0) * u0;
    } while (u1.norm() < 1e-6);
    u1.normalize();
  }
  for (int c = 0; c < cfg.num_segments; ++c) {
    const double frac =
        cfg.num_segments > 1
            ? static_cast<double>(c) / (cfg.num_segments - 1) - 0.5
            : 0.0;
    const double phi = cfg.w_dispersion * frac * std::numbers::pi / 2.0;
    w[c] = cfg.w_strength * (std::cos(phi) * u0 + std::sin(phi) * u1);
  }
  return w;
}

}  // namespace

Dataset generate(const GenConfig& cfg) {
  cfg.validate();
  const Rng root{cfg.seed};

  const std::vector<Vector> seg_weights = draw_segment_weights(cfg, root);

  // One fixed unit projection per non-cohort slot; its image of z is an
  // N(0,1) scalar that quantile-maps onto the slot vocabulary.
  std::vector<Vector> projections(cfg.num_slots);
  {
    Rng rng = root.split("projections");
    for (int j = 0; j < cfg.num_slots; ++j) {
      if (j != cfg.cohort_slot) {
        projections[j] = random_unit(cfg.latent_dim, rng);
      }
    }
  }

  std::vector<double> cum_priors(cfg.num_segments);
  std::partial_sum(cfg.priors.begin(), cfg.priors.end(), cum_priors.begin());
  cum_priors.back() = 1.0;

  const CohortSpec planted = cfg.planted_spec();

  Dataset ds;
  ds.config = cfg;
  ds.samples.resize(cfg.num_samples);
  ds.segment_counts.assign(cfg.num_segments, 0);
  std::vector<std::int64_t> positives(cfg.num_segments, 0);

  Rng rng = root.split("samples");
  Vector z(cfg.latent_dim);
  for (std::int64_t i = 0; i < cfg.num_samples; ++i) {
    Sample& s = ds.samples[i];
    const double u = rng.uniform();
    int c = 0;
    while (u >= cum_priors[c]) {
      ++c;
    }
    for (int l = 0; l < cfg.latent_dim; ++l) {
      z[l] = rng.normal();
    }
    s.slots.resize(cfg.num_slots);
    for (int j = 0; j < cfg.num_slots; ++j) {
      if (j == cfg.cohort_slot) {
        s.slots[j] = c;
      } else {
        const double q = std_normal_cdf(projections[j].dot(z));
        s.slots[j] = std::min(static_cast<int>(q * cfg.vocab_sizes[j]),
                              cfg.vocab_sizes[j] - 1);
      }
    }
    s.cohort = c;
    const double p = sigmoid(logit(cfg.base_rates[c]) + seg_weights[c].dot(z));
    s.y = rng.uniform() < p ? 1 : 0;
    std::tie(s.y_head, s.y_tail) = derive_aux_labels(s.y, c, planted);
    ds.segment_counts[c] += 1;
    positives[c] += s.y;
  }

  ds.plr.resize(cfg.num_segments);
  for (int c = 0; c < cfg.num_segments; ++c) {
    ds.plr[c] = ds.segment_counts[c] > 0
                    ? static_cast<double>(positives[c]) / ds.segment_counts[c]
                    : 0.0;
  }
  return ds;
}

std::pair<int, int> derive_aux_labels(int y, int cohort_id, const CohortSpec& spec) {
  if (cohort_id < 0 || cohort_id >= spec.num_segments) {
    throw ContractError("derive_aux_labels: cohort id out of range");
  }
  const int yh = y * (spec.in_head(cohort_id) ? 1 : 0);
  const int yt = y * (spec.in_tail(cohort_id) ? 1 : 0);
  return {yh, yt};
}

void apply_cohort_labels(Dataset& ds, const CohortSpec& spec) {
  spec.validate();
  for (Sample& s : ds.samples) {
    std::tie(s.y_head, s.y_tail) = derive_aux_labels(s.y, s.cohort, spec);
  }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("dataset: cannot open " + path.string() + " for writing");
  }
  json header;
  header["config"] = gen_config_to_json(ds.config);
  json plr = json::object();
  for (int c = 0; c < ds.config.num_segments; ++c) {
    plr[std::to_string(c)] = ds.plr[c];
  }
  header["plr"] = plr;
  out << header.dump() << '\n';

  std::string line;
  for (const Sample& s : ds.samples) {
    line.clear();
    line += "{\"f\":[";
    for (std::size_t j = 0; j < s.slots.size(); ++j) {
      if (j > 0) {
        line += ',';
      }
      line += std::to_string(s.slots[j]);
    }
    line += "],\"c\":";
    line += std::to_string(s.cohort);
    line += ",\"y\":";
    line += std::to_string(s.y);
    line += ",\"yh\":";
    line += std::to_string(s.y_head);
    line += ",\"yt\":";
    line += std::to_string(s.y_tail);
    line += "}";
    out << line << '\n';
  }
  if (!out) {
    throw IoError("dataset: write failed for " + path.string());
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("dataset: cannot open " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;

  const auto parse_line = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw IoError("dataset: parse error at line " + std::to_string(line_no) +
                    ": " + e.what());
    }
  };

  if (!std::getline(in, line)) {
    throw IoError("dataset: missing header line");
  }
  ++line_no;
  const json header = parse_line(line);
  Dataset ds;
  if (!header.contains("config")) {
    throw IoError("dataset: header has no config");
  }
  ds.config = gen_config_from_json(header.at("config"));

  ds.samples.reserve(ds.config.num_samples);
  ds.segment_counts.assign(ds.config.num_segments, 0);
  std::vector<std::int64_t> positives(ds.config.num_segments, 0);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const json j = parse_line(line);
    Sample s;
    try {
      j.at("f").get_to(s.slots);
      j.at("c").get_to(s.cohort);
      j.at("y").get_to(s.y);
      j.at("yh").get_to(s.y_head);
      j.at("yt").get_to(s.y_tail);
    } catch (const json::exception& e) {
      throw IoError("dataset: bad record at line " + std::to_string(line_no) +
                    ": " + e.what());
    }
    if (static_cast<int>(s.slots.size()) != ds.config.num_slots) {
      throw IoError("dataset: wrong slot count at line " + std::to_string(line_no));
    }
    for (int j2 = 0; j2 < ds.config.num_slots; ++j2) {
      if (s.slots[j2] < 0 || s.slots[j2] >= ds.config.vocab_sizes[j2]) {
        throw IoError("dataset: feature index out of range at line " +
                      std::to_string(line_no));
      }
    }
    if (s.cohort < 0 || s.cohort >= ds.config.num_segments) {
      throw IoError("dataset: cohort id out of range at line " + std::to_string(line_no));
    }
    if ((s.y != 0 && s.y != 1) || (s.y_head != 0 && s.y_head != 1) ||
        (s.y_tail != 0 && s.y_tail != 1)) {
      throw IoError("dataset: labels must be 0/1 at line " + std::to_string(line_no));
    }
    ds.segment_counts[s.cohort] += 1;
    positives[s.cohort] += s.y;
    ds.samples.push_back(std::move(s));
  }

  ds.plr.resize(ds.config.num_segments);
  for (int c = 0; c < ds.config.num_segments; ++c) {
    ds.plr[c] = ds.segment_counts[c] > 0
                    ? static_cast<double>(positives[c]) / ds.segment_counts[c]
                    : 0.0;
  }
  return ds;
}

}  // namespace c2al
