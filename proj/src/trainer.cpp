#include "c2al/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2al/numerics.hpp"
#include "c2al/rng.hpp"

namespace c2al {

std::string to_string(OptKind k) {
  return k == OptKind::sgd ? "sgd" : "adam";
}

OptKind opt_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptKind::sgd;
  if (s == "adam") return OptKind::adam;
  throw ContractError("unknown optimizer: " + s);
}

void TrainConfig::validate() const {
  if (lambda_head < 0.0 || lambda_tail < 0.0) {
    throw ContractError("TrainConfig: lambda weights must be nonnegative");
  }
  if (!(lr > 0.0)) {
    throw ContractError("TrainConfig: learning rate must be positive");
  }
  if (batch_size < 1) {
    throw ContractError("TrainConfig: batch_size must be >= 1");
  }
  if (num_steps < 0) {
    throw ContractError("TrainConfig: num_steps must be >= 0");
  }
  if (snapshot_every < 0) {
    throw ContractError("TrainConfig: snapshot_every must be >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
    throw ContractError("TrainConfig: bad Adam hyperparameters");
  }
}

long TrainConfig::snapshot_stride() const {
  if (snapshot_every > 0) {
    return snapshot_every;
  }
  return std::max<long>(1, num_steps / 20);
}

Optimizer::Optimizer(OptKind kind, double lr, double beta1, double beta2, double eps)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

Optimizer::Optimizer(const TrainConfig& cfg)
    : Optimizer(cfg.optimizer, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps) {}

void Optimizer::begin_step() { ++t_; }

void Optimizer::update(int slot, double* param, const double* grad, Index n) {
  Eigen::Map<Vector> p(param, n);
  Eigen::Map<const Vector> g(grad, n);
  if (kind_ == OptKind::sgd) {
    p -= lr_ * g;
    return;
  }
  if (slot >= static_cast<int>(m_.size())) {
    m_.resize(slot + 1);
    v_.resize(slot + 1);
  }
  if (m_[slot].size() != n) {
    m_[slot] = Vector::Zero(n);
    v_[slot] = Vector::Zero(n);
  }
  Vector& m = m_[slot];
  Vector& v = v_[slot];
  m = beta1_ * m + (1.0 - beta1_) * g;
  v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  p -= (lr_ / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps_).matrix());
}

LossTerms c2al_loss(const ForwardTrace& trace, int y, int y_head, int y_tail,
                    double lambda_head, double lambda_tail) {
  if (lambda_head < 0.0 || lambda_tail < 0.0) {
    throw ContractError("c2al_loss: lambda weights must be nonnegative");
  }
  LossTerms t;
  t.primary = bce(trace.primary.prob, y);
  t.dlogit_primary = bce_grad(trace.primary.prob, y);
  double aux_sum = 0.0;
  if (trace.head_aux && trace.tail_aux) {
    t.head = bce(trace.head_aux->prob, y_head);
    t.tail = bce(trace.tail_aux->prob, y_tail);
    t.dlogit_head = lambda_head * bce_grad(trace.head_aux->prob, y_head);
    t.dlogit_tail = lambda_tail * bce_grad(trace.tail_aux->prob, y_tail);
    aux_sum = lambda_head * t.head + lambda_tail * t.tail;
  }
  t.total = t.primary + aux_sum;
  return t;
}

namespace {

struct BatchGrads {
  SharedGrads shared_primary;
  SharedGrads shared_aux;
  Mlp primary_head;
  Mlp head_aux;
  Mlp tail_aux;
  bool has_aux = false;
  double loss_total = 0.0;
  double loss_primary = 0.0;
  double loss_head = 0.0;
  double loss_tail = 0.0;
};

// Forward + backward over a batch with mean reduction, accumulating in
// sample-index order.
BatchGrads batch_grads(const SparseBatch& batch, const ModelParams& params,
                       double lambda_head, double lambda_tail) {
  if (batch.empty()) {
    throw ContractError("batch_grads: empty batch");
  }
  BatchGrads g;
  g.has_aux = params.has_aux();
  g.shared_primary = SharedGrads::zeros_like(params);
  g.shared_aux = SharedGrads::zeros_like(params);
  g.primary_head = zeros_like(params.primary_head);
  if (g.has_aux) {
    g.head_aux = zeros_like(*params.head_aux);
    g.tail_aux = zeros_like(*params.tail_aux);
  }

  const Mode mode = g.has_aux ? Mode::train : Mode::inference;
  for (const Sample& s : batch) {
    const ForwardTrace trace = forward_sample(s.slots, params, mode);
    const LossTerms lt =
        c2al_loss(trace, s.y, s.y_head, s.y_tail, lambda_head, lambda_tail);
    g.loss_total += lt.total;
    g.loss_primary += lt.primary;
    g.loss_head += lt.head;
    g.loss_tail += lt.tail;
    backward_sample(s.slots, params, trace, lt.dlogit_primary, lt.dlogit_head,
                    lt.dlogit_tail, g.shared_primary, g.shared_aux, g.primary_head,
                    g.has_aux ? &g.head_aux : nullptr,
                    g.has_aux ? &g.tail_aux : nullptr);
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  g.shared_primary.scale(inv);
  g.shared_aux.scale(inv);
  for (auto& w : g.primary_head.weights) w *= inv;
  for (auto& b : g.primary_head.biases) b *= inv;
  if (g.has_aux) {
    for (auto& w : g.head_aux.weights) w *= inv;
    for (auto& b : g.head_aux.biases) b *= inv;
    for (auto& w : g.tail_aux.weights) w *= inv;
    for (auto& b : g.tail_aux.biases) b *= inv;
  }
  g.loss_total *= inv;
  g.loss_primary *= inv;
  g.loss_head *= inv;
  g.loss_tail *= inv;
  return g;
}

bool finite(const SharedGrads& g) {
  for (const Matrix& e : g.embeddings) {
    if (!e.allFinite()) return false;
  }
  return g.attention.allFinite();
}

bool finite(const Mlp& m) {
  for (const Matrix& w : m.weights) {
    if (!w.allFinite()) return false;
  }
  for (const Vector& b : m.biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

}  // namespace

GradBundle shared_grads(const SparseBatch& batch, const ModelParams& params,
                        double lambda_head, double lambda_tail) {
  const BatchGrads g = batch_grads(batch, params, lambda_head, lambda_tail);
  GradBundle b;
  b.primary = g.shared_primary.flat();
  b.aux = g.shared_aux.flat();
  b.norm_primary = b.primary.norm();
  b.norm_aux = b.aux.norm();
  return b;
}

std::string to_string(DecompFlag f) {
  switch (f) {
    case DecompFlag::ok: return "ok";
    case DecompFlag::degenerate_primary: return "degenerate_primary";
    case DecompFlag::degenerate_aux: return "degenerate_aux";
  }
  throw ContractError("unknown decomposition flag");
}

Decomposition decompose(const GradBundle& bundle) {
  if (bundle.primary.size() != bundle.aux.size()) {
    throw ContractError("decompose: gradient vectors differ in length");
  }
  Decomposition d;
  const double norm_primary = bundle.primary.norm();
  const double norm_aux = bundle.aux.norm();
  if (norm_primary <= 1e-12) {
    d.parallel = Vector::Zero(bundle.aux.size());
    d.orthogonal = bundle.aux;
    d.flag = DecompFlag::degenerate_primary;
  } else {
    const double coef =
        bundle.aux.dot(bundle.primary) / bundle.primary.squaredNorm();
    d.parallel = coef * bundle.primary;
    d.orthogonal = bundle.aux - d.parallel;
    if (norm_aux <= 1e-12) {
      d.flag = DecompFlag::degenerate_aux;
    } else {
      d.cosine = bundle.aux.dot(bundle.primary) / (norm_aux * norm_primary);
    }
  }
  d.norm_parallel = d.parallel.norm();
  d.norm_orthogonal = d.orthogonal.norm();
  return d;
}

namespace {

// Stable slot numbering: shared block first, then heads. Aux head slots come
// last so the baseline path sees identical numbering for everything else.
struct SlotIds {
  static constexpr int attention(int num_slots) { return num_slots; }
  static constexpr int primary(int num_slots) { return num_slots + 1; }
  // Each head occupies a contiguous range of 2 * num_layers slots.
};

void update_head(Optimizer& opt, int first_slot, Mlp& head, const Mlp& grad) {
  int slot = first_slot;
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    opt.update(slot++, head.weights[l].data(), grad.weights[l].data(),
               head.weights[l].size());
    opt.update(slot++, head.biases[l].data(), grad.biases[l].data(),
               head.biases[l].size());
  }
}

}  // namespace

StepDiag train_step(ModelParams& params, Optimizer& opt, const SparseBatch& batch,
                    const TrainConfig& cfg, long step_index) {
  cfg.validate();
  const BatchGrads g = [&] {
    try {
      return batch_grads(batch, params, cfg.lambda_head, cfg.lambda_tail);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step_index) + ": " + e.what());
    }
  }();

  if (!std::isfinite(g.loss_total) || !finite(g.shared_primary) ||
      !finite(g.shared_aux) || !finite(g.primary_head) ||
      (g.has_aux && (!finite(g.head_aux) || !finite(g.tail_aux)))) {
    throw NumericError("step " + std::to_string(step_index) +
                       ": non-finite gradient");
  }

  StepDiag diag;
  diag.step = step_index;
  diag.loss_total = g.loss_total;
  diag.loss_primary = g.loss_primary;
  diag.loss_head = g.loss_head;
  diag.loss_tail = g.loss_tail;

  GradBundle bundle;
  bundle.primary = g.shared_primary.flat();
  bundle.aux = g.shared_aux.flat();
  diag.grad_norm_primary = bundle.primary.norm();
  diag.grad_norm_aux = bundle.aux.norm();
  const Decomposition dec = decompose(bundle);
  diag.cos_aux_primary = dec.cosine;
  diag.decomposition_flag = dec.flag;
  {
    const Vector recomposed = dec.parallel + dec.orthogonal;
    const double aux_norm = bundle.aux.norm();
    diag.recomposition_rel_err =
        aux_norm > 0.0 ? (recomposed - bundle.aux).norm() / aux_norm : 0.0;
    const double denom = dec.norm_orthogonal * diag.grad_norm_primary;
    diag.orth_dot_normalized =
        denom > 0.0 ? std::abs(dec.orthogonal.dot(bundle.primary)) / denom : 0.0;
  }

  opt.begin_step();
  const int num_slots = static_cast<int>(params.embeddings.size());
  for (int j = 0; j < num_slots; ++j) {
    Matrix combined = g.shared_primary.embeddings[j];
    if (g.has_aux) {
      combined += g.shared_aux.embeddings[j];
    }
    opt.update(j, params.embeddings[j].data(), combined.data(), combined.size());
  }
  {
    Matrix combined = g.shared_primary.attention;
    if (g.has_aux) {
      combined += g.shared_aux.attention;
    }
    opt.update(SlotIds::attention(num_slots), params.attention.data(),
               combined.data(), combined.size());
  }
  const int head_slot0 = SlotIds::primary(num_slots);
  const int slots_per_head = 2 * static_cast<int>(params.primary_head.weights.size());
  update_head(opt, head_slot0, params.primary_head, g.primary_head);
  if (g.has_aux) {
    update_head(opt, head_slot0 + slots_per_head, *params.head_aux, g.head_aux);
    update_head(opt, head_slot0 + 2 * slots_per_head, *params.tail_aux, g.tail_aux);
  }
  return diag;
}

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const ModelConfig& model_cfg, const SnapshotHook& on_snapshot) {
  cfg.validate();
  model_cfg.validate();
  if (samples.empty()) {
    throw ContractError("train: no samples");
  }
  if (cfg.batch_size > static_cast<int>(samples.size())) {
    throw ContractError("train: batch_size exceeds the sample count");
  }

  TrainResult result;
  result.params = init_params(model_cfg, cfg.init_seed, cfg.c2al_enabled);

  const auto take_snapshot = [&](long step) {
    Snapshot snap;
    snap.step = step;
    snap.attention = result.params.attention;
    snap.stats = attention_stats(snap.attention);
    result.snapshots.push_back(std::move(snap));
    if (on_snapshot) {
      on_snapshot(step, result.params);
    }
  };
  take_snapshot(0);

  Optimizer opt(cfg);
  Rng shuffle_rng = Rng(cfg.shuffle_seed).split("shuffle");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  const long stride = cfg.snapshot_stride();
  SparseBatch batch(cfg.batch_size);
  for (long step = 1; step <= cfg.num_steps; ++step) {
    if (cursor + cfg.batch_size > order.size()) {
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    for (int i = 0; i < cfg.batch_size; ++i) {
      batch[i] = samples[order[cursor + i]];
    }
    cursor += cfg.batch_size;

    result.log.push_back(train_step(result.params, opt, batch, cfg, step));

    if (step % stride == 0 || step == cfg.num_steps) {
      take_snapshot(step);
    }
  }
  return result;
}

}  // namespace c2al
