#include "c2al/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "c2al/rng.hpp"

namespace c2al {

using nlohmann::json;

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return mix64(mix64(seed) ^ mix64(fnv1a64(label)));
}

}  // namespace

std::vector<double> geometric_base_rates(int num_segments, double head_rate,
                                         double tail_rate) {
  if (num_segments < 1 || !(head_rate > 0.0 && head_rate < 1.0) ||
      !(tail_rate > 0.0 && tail_rate < 1.0)) {
    throw ContractError("geometric_base_rates: rates must lie in (0, 1)");
  }
  std::vector<double> rates(num_segments);
  if (num_segments == 1) {
    rates[0] = head_rate;
    return rates;
  }
  const double ratio = tail_rate / head_rate;
  for (int c = 0; c < num_segments; ++c) {
    rates[c] = head_rate * std::pow(ratio, static_cast<double>(c) / (num_segments - 1));
  }
  return rates;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.gen.num_samples = 200000;
  c.gen.num_segments = 10;
  c.gen.base_rates = geometric_base_rates(10, 0.10, 0.02);
  c.gen.priors.assign(10, 0.1);
  c.gen.head_segments = {0};
  c.gen.tail_segments = {9};
  c.gen.num_slots = c.model.num_slots;
  c.gen.vocab_sizes = c.model.vocab_sizes;

  c.train.lambda_head = 0.1;
  c.train.lambda_tail = 0.1;
  c.train.optimizer = OptKind::adam;
  c.train.lr = 2e-3;
  c.train.batch_size = 128;
  c.train.num_steps = 2500;
  c.train.snapshot_every = 125;

  c.gen.seed = derive_seed(c.seed, "gen");
  c.train.init_seed = derive_seed(c.seed, "init");
  c.train.shuffle_seed = derive_seed(c.seed, "shuffle");
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c = defaults();
  try {
    if (j.contains("seed")) {
      j.at("seed").get_to(c.seed);
    }
    if (j.contains("output_dir")) {
      j.at("output_dir").get_to(c.output_dir);
    }

    if (j.contains("model")) {
      const json& m = j.at("model");
      if (m.contains("num_slots")) m.at("num_slots").get_to(c.model.num_slots);
      if (m.contains("vocab_sizes")) m.at("vocab_sizes").get_to(c.model.vocab_sizes);
      if (m.contains("embed_dim")) m.at("embed_dim").get_to(c.model.embed_dim);
      if (m.contains("compress_dim")) m.at("compress_dim").get_to(c.model.compress_dim);
      if (m.contains("head_hidden")) m.at("head_hidden").get_to(c.model.head_hidden);
      if (m.contains("init_scale")) {
        m.at("init_scale").get_to(c.model.init_scale);
        c.model.attention_init_scale = c.model.init_scale;
      }
      if (m.contains("attention_init_scale")) {
        m.at("attention_init_scale").get_to(c.model.attention_init_scale);
      }
    }

    if (j.contains("gen")) {
      const json& g = j.at("gen");
      if (g.contains("num_samples")) g.at("num_samples").get_to(c.gen.num_samples);
      if (g.contains("num_segments")) g.at("num_segments").get_to(c.gen.num_segments);
      if (g.contains("base_rates")) {
        g.at("base_rates").get_to(c.gen.base_rates);
      } else if (g.contains("head_rate") && g.contains("tail_rate")) {
        c.gen.base_rates = geometric_base_rates(c.gen.num_segments,
                                                g.at("head_rate").get<double>(),
                                                g.at("tail_rate").get<double>());
      } else if (c.gen.num_segments != static_cast<int>(c.gen.base_rates.size())) {
        c.gen.base_rates = geometric_base_rates(c.gen.num_segments, 0.10, 0.02);
      }
      if (g.contains("priors")) {
        g.at("priors").get_to(c.gen.priors);
      } else if (c.gen.num_segments != static_cast<int>(c.gen.priors.size())) {
        c.gen.priors.assign(c.gen.num_segments, 1.0 / c.gen.num_segments);
      }
      if (g.contains("latent_dim")) g.at("latent_dim").get_to(c.gen.latent_dim);
      if (g.contains("w_strength")) g.at("w_strength").get_to(c.gen.w_strength);
      if (g.contains("w_dispersion")) g.at("w_dispersion").get_to(c.gen.w_dispersion);
      if (g.contains("weights")) {
        c.gen.weights = g.at("weights").get<std::vector<std::vector<double>>>();
      }
      if (g.contains("cohort_slot")) g.at("cohort_slot").get_to(c.gen.cohort_slot);
      if (g.contains("head_segments")) g.at("head_segments").get_to(c.gen.head_segments);
      if (g.contains("tail_segments")) g.at("tail_segments").get_to(c.gen.tail_segments);
      if (g.contains("seed")) {
        g.at("seed").get_to(c.gen.seed);
      } else {
        c.gen.seed = derive_seed(c.seed, "gen");
      }
    } else {
      c.gen.seed = derive_seed(c.seed, "gen");
    }

    if (j.contains("train")) {
      const json& t = j.at("train");
      if (t.contains("lambda_head")) t.at("lambda_head").get_to(c.train.lambda_head);
      if (t.contains("lambda_tail")) t.at("lambda_tail").get_to(c.train.lambda_tail);
      if (t.contains("optimizer")) {
        c.train.optimizer = opt_kind_from_string(t.at("optimizer").get<std::string>());
      }
      if (t.contains("lr")) t.at("lr").get_to(c.train.lr);
      if (t.contains("beta1")) t.at("beta1").get_to(c.train.beta1);
      if (t.contains("beta2")) t.at("beta2").get_to(c.train.beta2);
      if (t.contains("eps")) t.at("eps").get_to(c.train.eps);
      if (t.contains("batch_size")) t.at("batch_size").get_to(c.train.batch_size);
      if (t.contains("num_steps")) t.at("num_steps").get_to(c.train.num_steps);
      if (t.contains("snapshot_every")) t.at("snapshot_every").get_to(c.train.snapshot_every);
      if (t.contains("c2al_enabled")) t.at("c2al_enabled").get_to(c.train.c2al_enabled);
      if (t.contains("init_seed")) {
        t.at("init_seed").get_to(c.train.init_seed);
      } else {
        c.train.init_seed = derive_seed(c.seed, "init");
      }
      if (t.contains("shuffle_seed")) {
        t.at("shuffle_seed").get_to(c.train.shuffle_seed);
      } else {
        c.train.shuffle_seed = derive_seed(c.seed, "shuffle");
      }
    } else {
      c.train.init_seed = derive_seed(c.seed, "init");
      c.train.shuffle_seed = derive_seed(c.seed, "shuffle");
    }

    if (j.contains("cohorts")) {
      const json& h = j.at("cohorts");
      if (h.contains("metric")) {
        c.cohorts.metric = div_metric_from_string(h.at("metric").get<std::string>());
      }
      if (h.contains("bins")) h.at("bins").get_to(c.cohorts.bins);
      if (h.contains("min_count")) h.at("min_count").get_to(c.cohorts.min_count);
      if (h.contains("head") && !h.at("head").is_null()) {
        c.cohorts.head = h.at("head").get<std::vector<int>>();
      }
      if (h.contains("tail") && !h.at("tail").is_null()) {
        c.cohorts.tail = h.at("tail").get<std::vector<int>>();
      }
    }

    if (j.contains("eval")) {
      const json& e = j.at("eval");
      if (e.contains("tau")) e.at("tau").get_to(c.eval.tau);
      if (e.contains("bins")) e.at("bins").get_to(c.eval.bins);
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("experiment config: ") + e.what());
  }

  // The generator always mirrors the model's slot layout.
  c.gen.num_slots = c.model.num_slots;
  c.gen.vocab_sizes = c.model.vocab_sizes;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ContractError("config: cannot open " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ContractError("config: " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["gen"] = gen_config_to_json(gen);
  json m;
  m["num_slots"] = model.num_slots;
  m["vocab_sizes"] = model.vocab_sizes;
  m["embed_dim"] = model.embed_dim;
  m["compress_dim"] = model.compress_dim;
  m["head_hidden"] = model.head_hidden;
  m["init_scale"] = model.init_scale;
  m["attention_init_scale"] = model.attention_init_scale;
  j["model"] = m;
  json t;
  t["lambda_head"] = train.lambda_head;
  t["lambda_tail"] = train.lambda_tail;
  t["optimizer"] = to_string(train.optimizer);
  t["lr"] = train.lr;
  t["beta1"] = train.beta1;
  t["beta2"] = train.beta2;
  t["eps"] = train.eps;
  t["batch_size"] = train.batch_size;
  t["num_steps"] = train.num_steps;
  t["snapshot_every"] = train.snapshot_every;
  t["c2al_enabled"] = train.c2al_enabled;
  t["init_seed"] = train.init_seed;
  t["shuffle_seed"] = train.shuffle_seed;
  j["train"] = t;
  json h;
  h["metric"] = to_string(cohorts.metric);
  h["bins"] = cohorts.bins;
  h["min_count"] = cohorts.min_count;
  if (cohorts.head) {
    h["head"] = *cohorts.head;
  }
  if (cohorts.tail) {
    h["tail"] = *cohorts.tail;
  }
  j["cohorts"] = h;
  json e;
  e["tau"] = eval.tau;
  e["bins"] = eval.bins;
  j["eval"] = e;
  return j;
}

std::string ExperimentConfig::hash() const {
  const std::uint64_t h = fnv1a64(to_json().dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ExperimentConfig::validate() const {
  model.validate();
  gen.validate();
  train.validate();
  if (cohorts.bins < 2 || cohorts.min_count < 1) {
    throw ContractError("experiment config: bad cohort discovery settings");
  }
  if (cohorts.head.has_value() != cohorts.tail.has_value()) {
    throw ContractError("experiment config: head and tail must be set together");
  }
  if (!(eval.tau > 0.0) || eval.bins < 8) {
    throw ContractError("experiment config: bad eval settings");
  }
  if (output_dir.empty()) {
    throw ContractError("experiment config: output_dir must be set");
  }
}

}  // namespace c2al
