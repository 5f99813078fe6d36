#include "c2al/model.hpp"

#include <json.hpp>

#include <cmath>
#include <string>

#include "c2al/numerics.hpp"
#include "c2al/rng.hpp"

namespace c2al {

using nlohmann::json;

void ModelConfig::validate() const {
  if (num_slots < 2) {
    throw ContractError("ModelConfig: num_slots must be >= 2");
  }
  if (embed_dim < 2) {
    throw ContractError("ModelConfig: embed_dim must be >= 2");
  }
  if (compress_dim < 1) {
    throw ContractError("ModelConfig: compress_dim must be >= 1");
  }
  if (static_cast<int>(vocab_sizes.size()) != num_slots) {
    throw ContractError("ModelConfig: vocab_sizes must have one entry per slot");
  }
  for (int v : vocab_sizes) {
    if (v < 1) {
      throw ContractError("ModelConfig: vocab sizes must be >= 1");
    }
  }
  for (int h : head_hidden) {
    if (h < 1) {
      throw ContractError("ModelConfig: hidden widths must be >= 1");
    }
  }
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
    throw ContractError("ModelConfig: init_scale must be positive and finite");
  }
  if (!(attention_init_scale > 0.0) || !std::isfinite(attention_init_scale)) {
    throw ContractError("ModelConfig: attention_init_scale must be positive and finite");
  }
}

std::string ModelConfig::to_json_string() const {
  json j;
  j["num_slots"] = num_slots;
  j["vocab_sizes"] = vocab_sizes;
  j["embed_dim"] = embed_dim;
  j["compress_dim"] = compress_dim;
  j["head_hidden"] = head_hidden;
  j["init_scale"] = init_scale;
  j["attention_init_scale"] = attention_init_scale;
  return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& s) {
  json j;
  try {
    j = json::parse(s);
  } catch (const json::exception& e) {
    throw IoError(std::string("model config: ") + e.what());
  }
  ModelConfig cfg;
  try {
    j.at("num_slots").get_to(cfg.num_slots);
    j.at("vocab_sizes").get_to(cfg.vocab_sizes);
    j.at("embed_dim").get_to(cfg.embed_dim);
    j.at("compress_dim").get_to(cfg.compress_dim);
    j.at("head_hidden").get_to(cfg.head_hidden);
    j.at("init_scale").get_to(cfg.init_scale);
    cfg.attention_init_scale = j.value("attention_init_scale", cfg.init_scale);
  } catch (const json::exception& e) {
    throw IoError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Mlp zeros_like(const Mlp& m) {
  Mlp z;
  z.weights.reserve(m.weights.size());
  z.biases.reserve(m.biases.size());
  for (const auto& w : m.weights) {
    z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : m.biases) {
    z.biases.push_back(Vector::Zero(b.size()));
  }
  return z;
}

namespace {

Matrix random_matrix(Index rows, Index cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = scale * rng.normal();
    }
  }
  return m;
}

// Kaiming-style scaled normal weights, zero biases.
Mlp init_head(const ModelConfig& cfg, Rng rng) {
  Mlp head;
  int in_dim = cfg.embed_dim * cfg.compress_dim;
  for (int width : cfg.head_hidden) {
    head.weights.push_back(
        random_matrix(width, in_dim, std::sqrt(2.0 / in_dim), rng));
    head.biases.push_back(Vector::Zero(width));
    in_dim = width;
  }
  head.weights.push_back(random_matrix(1, in_dim, std::sqrt(2.0 / in_dim), rng));
  head.biases.push_back(Vector::Zero(1));
  return head;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed, bool with_aux) {
  cfg.validate();
  const Rng root(seed);
  ModelParams p;
  p.embeddings.reserve(cfg.num_slots);
  for (int slot = 0; slot < cfg.num_slots; ++slot) {
    Rng slot_rng = root.split("embed/" + std::to_string(slot));
    p.embeddings.push_back(
        random_matrix(cfg.vocab_sizes[slot], cfg.embed_dim, cfg.init_scale, slot_rng));
  }
  {
    Rng att_rng = root.split("attention");
    p.attention = random_matrix(cfg.embed_dim, cfg.compress_dim,
                                cfg.attention_init_scale, att_rng);
  }
  p.primary_head = init_head(cfg, root.split("head/primary"));
  if (with_aux) {
    p.head_aux = init_head(cfg, root.split("head/aux_head"));
    p.tail_aux = init_head(cfg, root.split("head/aux_tail"));
  }
  return p;
}

Matrix embed(const std::vector<int>& slots, const ModelParams& params) {
  const auto m = static_cast<Index>(params.embeddings.size());
  if (static_cast<Index>(slots.size()) != m) {
    throw ContractError("embed: sample has " + std::to_string(slots.size()) +
                        " indices for " + std::to_string(m) + " slots");
  }
  const Index d = params.embeddings.empty() ? 0 : params.embeddings[0].cols();
  Matrix X(d, m);
  for (Index j = 0; j < m; ++j) {
    const Matrix& table = params.embeddings[j];
    if (slots[j] < 0 || slots[j] >= table.rows()) {
      throw ContractError("embed: index " + std::to_string(slots[j]) +
                          " out of range for slot " + std::to_string(j));
    }
    X.col(j) = table.row(slots[j]).transpose();
  }
  return X;
}

Matrix fm_attention_forward(const Matrix& X, const Matrix& Y) {
  if (X.rows() != Y.rows()) {
    throw ContractError("fm_attention_forward: X and Y row counts differ");
  }
  return matmul(gram(X), Y);
}

std::pair<Matrix, Matrix> fm_attention_backward(const Matrix& X, const Matrix& Y,
                                                const Matrix& dG) {
  if (X.rows() != Y.rows() || dG.rows() != Y.rows() || dG.cols() != Y.cols()) {
    throw ContractError("fm_attention_backward: inconsistent shapes");
  }
  Matrix dY = matmul(gram(X), dG);
  Matrix dX = matmul(dG * Y.transpose() + Y * dG.transpose(), X);
  return {std::move(dX), std::move(dY)};
}

namespace {

HeadTrace head_forward(const Mlp& head, const Vector& input) {
  HeadTrace t;
  Vector h = input;
  const std::size_t layers = head.weights.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    Vector z = head.weights[l] * h + head.biases[l];
    h = z.cwiseMax(0.0);
    t.pre_acts.push_back(std::move(z));
    t.acts.push_back(h);
  }
  t.logit = (head.weights[layers - 1] * h + head.biases[layers - 1])(0);
  t.prob = sigmoid(t.logit);
  return t;
}

// Accumulates parameter gradients into grad, returns the gradient with
// respect to the head input. ReLU subgradient at 0 is taken as 0.
Vector head_backward(const Mlp& head, const HeadTrace& t, const Vector& input,
                     double dlogit, Mlp& grad) {
  const std::size_t layers = head.weights.size();
  Vector delta = Vector::Constant(1, dlogit);
  Vector din;
  for (std::size_t l = layers; l-- > 0;) {
    const Vector& in = (l == 0) ? input : t.acts[l - 1];
    grad.weights[l].noalias() += delta * in.transpose();
    grad.biases[l] += delta;
    din.noalias() = head.weights[l].transpose() * delta;
    if (l > 0) {
      delta = din.cwiseProduct(
          (t.pre_acts[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return din;
}

}  // namespace

ForwardTrace forward_sample(const std::vector<int>& slots, const ModelParams& params,
                            Mode mode) {
  ForwardTrace t;
  t.X = embed(slots, params);
  t.gramX = gram(t.X);
  t.G = matmul(t.gramX, params.attention);
  const Vector g = flatten(t.G);
  t.primary = head_forward(params.primary_head, g);
  if (mode == Mode::train) {
    if (!params.has_aux()) {
      throw ContractError("forward: train mode requires auxiliary heads");
    }
    t.head_aux = head_forward(*params.head_aux, g);
    t.tail_aux = head_forward(*params.tail_aux, g);
  }
  return t;
}

std::vector<ForwardTrace> forward(const SparseBatch& batch, const ModelParams& params,
                                  Mode mode) {
  std::vector<ForwardTrace> traces;
  traces.reserve(batch.size());
  for (const Sample& s : batch) {
    traces.push_back(forward_sample(s.slots, params, mode));
  }
  return traces;
}

std::vector<double> predict(const SparseBatch& batch, const ModelParams& params) {
  std::vector<double> probs;
  probs.reserve(batch.size());
  for (const Sample& s : batch) {
    probs.push_back(forward_sample(s.slots, params, Mode::inference).primary.prob);
  }
  return probs;
}

SharedGrads SharedGrads::zeros_like(const ModelParams& params) {
  SharedGrads g;
  g.embeddings.reserve(params.embeddings.size());
  for (const Matrix& e : params.embeddings) {
    g.embeddings.push_back(Matrix::Zero(e.rows(), e.cols()));
  }
  g.attention = Matrix::Zero(params.attention.rows(), params.attention.cols());
  return g;
}

void SharedGrads::scale(double f) {
  for (Matrix& e : embeddings) {
    e *= f;
  }
  attention *= f;
}

Vector SharedGrads::flat() const {
  Index total = attention.size();
  for (const Matrix& e : embeddings) {
    total += e.size();
  }
  Vector v(total);
  Index off = 0;
  for (const Matrix& e : embeddings) {
    v.segment(off, e.size()) = Eigen::Map<const Vector>(e.data(), e.size());
    off += e.size();
  }
  v.segment(off, attention.size()) =
      Eigen::Map<const Vector>(attention.data(), attention.size());
  return v;
}

void backward_sample(const std::vector<int>& slots, const ModelParams& params,
                     const ForwardTrace& trace, double dlogit_primary,
                     double dlogit_head, double dlogit_tail,
                     SharedGrads& shared_primary, SharedGrads& shared_aux,
                     Mlp& grad_primary, Mlp* grad_head, Mlp* grad_tail) {
  const Vector g = flatten(trace.G);
  const Index d = trace.G.rows();
  const Index k = trace.G.cols();

  const auto apply_shared = [&](const Matrix& dG, SharedGrads& out) {
    // dY through the bilinear form, reusing the cached gram matrix.
    out.attention.noalias() += trace.gramX * dG;
    const Matrix dX =
        (dG * params.attention.transpose() + params.attention * dG.transpose()) *
        trace.X;
    for (std::size_t j = 0; j < slots.size(); ++j) {
      out.embeddings[j].row(slots[j]) += dX.col(static_cast<Index>(j)).transpose();
    }
  };

  {
    const Vector dg = head_backward(params.primary_head, trace.primary, g,
                                    dlogit_primary, grad_primary);
    const Matrix dG = Eigen::Map<const Matrix>(dg.data(), d, k);
    apply_shared(dG, shared_primary);
  }

  if (trace.head_aux && trace.tail_aux) {
    if (grad_head == nullptr || grad_tail == nullptr) {
      throw ContractError("backward_sample: aux gradients missing accumulators");
    }
    Vector dg = head_backward(*params.head_aux, *trace.head_aux, g, dlogit_head,
                              *grad_head);
    dg += head_backward(*params.tail_aux, *trace.tail_aux, g, dlogit_tail,
                        *grad_tail);
    const Matrix dG = Eigen::Map<const Matrix>(dg.data(), d, k);
    apply_shared(dG, shared_aux);
  }
}

ModelParams strip_aux(ModelParams params) {
  params.head_aux.reset();
  params.tail_aux.reset();
  return params;
}

}  // namespace c2al
