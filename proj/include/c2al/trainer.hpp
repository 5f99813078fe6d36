#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "c2al/metrics.hpp"
#include "c2al/model.hpp"

namespace c2al {

enum class OptKind { sgd, adam };

std::string to_string(OptKind k);
OptKind opt_kind_from_string(const std::string& s);

struct TrainConfig {
  double lambda_head = 0.1;
  double lambda_tail = 0.1;
  OptKind optimizer = OptKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 128;
  long num_steps = 2000;
  long snapshot_every = 0;  // 0 picks num_steps / 20
  std::uint64_t shuffle_seed = 2;
  std::uint64_t init_seed = 3;
  // Off reproduces the plain single-task objective: no aux heads are created
  // and no aux term ever enters a gradient. Equivalent to lambdas of zero.
  bool c2al_enabled = true;

  void validate() const;
  long snapshot_stride() const;
};

// Elementwise SGD / Adam over an indexed set of tensors. State is addressed
// by a stable slot id so the same tensor keeps its moments across steps.
class Optimizer {
 public:
  Optimizer(OptKind kind, double lr, double beta1, double beta2, double eps);
  explicit Optimizer(const TrainConfig& cfg);

  void begin_step();  // advances Adam's bias-correction clock
  void update(int slot, double* param, const double* grad, Index n);
  long step_count() const { return t_; }

 private:
  OptKind kind_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Vector> m_, v_;
};

// Loss terms of one sample. total = primary + (lambda_head * head +
// lambda_tail * tail); the stored dlogits carry the lambda scaling.
struct LossTerms {
  double total = 0.0;
  double primary = 0.0;
  double head = 0.0;  // unweighted aux BCE terms
  double tail = 0.0;
  double dlogit_primary = 0.0;
  double dlogit_head = 0.0;
  double dlogit_tail = 0.0;
};

LossTerms c2al_loss(const ForwardTrace& trace, int y, int y_head, int y_tail,
                    double lambda_head, double lambda_tail);

// Flattened shared-block gradients (embedding tables then attention), split
// by loss source and batch-mean reduced.
struct GradBundle {
  Vector primary;
  Vector aux;
  double norm_primary = 0.0;
  double norm_aux = 0.0;
};

GradBundle shared_grads(const SparseBatch& batch, const ModelParams& params,
                        double lambda_head, double lambda_tail);

enum class DecompFlag { ok, degenerate_primary, degenerate_aux };

std::string to_string(DecompFlag f);

// aux split into its projection onto primary and the remainder.
struct Decomposition {
  Vector parallel;
  Vector orthogonal;
  double cosine = 0.0;
  double norm_parallel = 0.0;
  double norm_orthogonal = 0.0;
  DecompFlag flag = DecompFlag::ok;
};

Decomposition decompose(const GradBundle& bundle);

struct StepDiag {
  long step = 0;
  double loss_total = 0.0;
  double loss_primary = 0.0;
  double loss_head = 0.0;
  double loss_tail = 0.0;
  double grad_norm_primary = 0.0;
  double grad_norm_aux = 0.0;
  double cos_aux_primary = 0.0;
  DecompFlag decomposition_flag = DecompFlag::ok;
  // Residuals of the decomposition identities, kept for verification and not
  // serialized into the training log.
  double recomposition_rel_err = 0.0;   // |(parallel+orthogonal) - aux| / |aux|
  double orth_dot_normalized = 0.0;     // <orthogonal, primary> / (|orth||primary|)
};

struct Snapshot {
  long step = 0;
  Matrix attention;
  AttentionStats stats;
};

struct TrainResult {
  ModelParams params;
  std::vector<Snapshot> snapshots;
  std::vector<StepDiag> log;
};

// One optimizer step on a batch: shared parameters move along the combined
// primary + aux gradient, each head along its own loss term. Raises
// NumericError (with the step index) if any gradient goes non-finite.
StepDiag train_step(ModelParams& params, Optimizer& opt, const SparseBatch& batch,
                    const TrainConfig& cfg, long step_index);

using SnapshotHook = std::function<void(long step, const ModelParams& params)>;

// Full deterministic loop over the given samples. Batches come from a seeded
// reshuffle; a trailing partial batch is never used. Snapshots are taken at
// step 0 (initialization), every snapshot_stride() steps, and at the final
// step.
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const ModelConfig& model_cfg, const SnapshotHook& on_snapshot = {});

}  // namespace c2al
