#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "c2al/types.hpp"

namespace c2al {

struct ModelConfig {
  int num_slots = 6;                        // m
  std::vector<int> vocab_sizes = {10, 32, 32, 32, 32, 32};
  int embed_dim = 16;                       // d
  int compress_dim = 8;                     // k
  std::vector<int> head_hidden = {16};      // hidden widths per prediction head
  double init_scale = 0.1;
  // The attention matrix can start sparser than the embeddings.
  double attention_init_scale = 0.1;

  void validate() const;
  std::string to_json_string() const;
  static ModelConfig from_json_string(const std::string& s);
};

// Prediction head: flat interaction embedding -> hidden layers (ReLU) -> logit.
// weights[l] maps layer input to output; the last layer has a single row.
struct Mlp {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

Mlp zeros_like(const Mlp& m);

struct ModelParams {
  std::vector<Matrix> embeddings;  // per slot, vocab_size x d
  Matrix attention;                // d x k
  Mlp primary_head;
  std::optional<Mlp> head_aux;
  std::optional<Mlp> tail_aux;

  bool has_aux() const { return head_aux.has_value() && tail_aux.has_value(); }
};

// Deterministic initialization. Each component draws from its own substream,
// so creating the auxiliary heads does not perturb any other draw.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed, bool with_aux);

struct Sample {
  std::vector<int> slots;  // one active index per slot
  int cohort = 0;
  int y = 0;
  int y_head = 0;
  int y_tail = 0;
};

using SparseBatch = std::vector<Sample>;

struct HeadTrace {
  std::vector<Vector> pre_acts;  // per hidden layer, before ReLU
  std::vector<Vector> acts;      // per hidden layer, after ReLU
  double logit = 0.0;
  double prob = 0.5;
};

struct ForwardTrace {
  Matrix X;      // d x m, active embeddings as columns
  Matrix gramX;  // d x d
  Matrix G;      // d x k, gramX * attention
  HeadTrace primary;
  std::optional<HeadTrace> head_aux;
  std::optional<HeadTrace> tail_aux;
};

enum class Mode { train, inference };

// Column j of the result is row slots[j] of embedding table j.
Matrix embed(const std::vector<int>& slots, const ModelParams& params);

// G = (X X^T) Y.
Matrix fm_attention_forward(const Matrix& X, const Matrix& Y);

// Gradients of a scalar loss through G = (X X^T) Y given upstream dG:
//   dY = (X X^T) dG
//   dX = (dG Y^T + Y dG^T) X
std::pair<Matrix, Matrix> fm_attention_backward(const Matrix& X, const Matrix& Y,
                                                const Matrix& dG);

ForwardTrace forward_sample(const std::vector<int>& slots, const ModelParams& params,
                            Mode mode);
std::vector<ForwardTrace> forward(const SparseBatch& batch, const ModelParams& params,
                                  Mode mode);

// Primary-head probabilities only.
std::vector<double> predict(const SparseBatch& batch, const ModelParams& params);

// Gradient accumulator for the shared block (embedding tables + attention).
struct SharedGrads {
  std::vector<Matrix> embeddings;
  Matrix attention;

  static SharedGrads zeros_like(const ModelParams& params);
  void scale(double f);
  // Row-major flat order: embedding tables by slot, then attention.
  Vector flat() const;
};

// Backpropagates one sample given upstream per-head logit gradients.
// Shared-block gradients are accumulated separately by source: the primary
// loss term feeds shared_primary, the auxiliary terms feed shared_aux.
// grad_head / grad_tail may be null when the trace has no aux heads.
void backward_sample(const std::vector<int>& slots, const ModelParams& params,
                     const ForwardTrace& trace, double dlogit_primary,
                     double dlogit_head, double dlogit_tail,
                     SharedGrads& shared_primary, SharedGrads& shared_aux,
                     Mlp& grad_primary, Mlp* grad_head, Mlp* grad_tail);

// Removes the auxiliary heads. Everything else is left bit-identical, so
// primary predictions do not change. Idempotent.
ModelParams strip_aux(ModelParams params);

}  // namespace c2al
