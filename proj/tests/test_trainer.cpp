#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "c2al/experiment.hpp"
#include "c2al/numerics.hpp"
#include "c2al/rng.hpp"
#include "c2al/synthdata.hpp"
#include "c2al/trainer.hpp"
#include "oracles.hpp"

using namespace c2al;

namespace {

ModelConfig tiny_model(int slots = 3, int d = 4, int k = 2) {
  ModelConfig cfg;
  cfg.num_slots = slots;
  cfg.vocab_sizes.assign(slots, 6);
  cfg.embed_dim = d;
  cfg.compress_dim = k;
  cfg.head_hidden = {5};
  cfg.init_scale = 0.3;
  return cfg;
}

GenConfig tiny_gen(const ModelConfig& m, std::uint64_t seed = 3) {
  GenConfig g;
  g.num_samples = 4000;
  g.num_segments = 4;
  g.base_rates = {0.30, 0.15, 0.15, 0.06};
  g.priors = {0.25, 0.25, 0.25, 0.25};
  g.latent_dim = 3;
  g.w_strength = 0.6;
  g.w_dispersion = 1.0;
  g.cohort_slot = 0;
  g.head_segments = {0};
  g.tail_segments = {3};
  g.num_slots = m.num_slots;
  g.vocab_sizes = m.vocab_sizes;
  g.seed = seed;
  return g;
}

SparseBatch random_batch(const ModelConfig& cfg, int n, std::uint64_t seed) {
  Rng rng(seed);
  SparseBatch batch;
  for (int i = 0; i < n; ++i) {
    Sample s;
    for (int j = 0; j < cfg.num_slots; ++j) {
      s.slots.push_back(static_cast<int>(rng.below(cfg.vocab_sizes[j])));
    }
    s.y = static_cast<int>(rng.below(2));
    s.y_head = s.y * static_cast<int>(rng.below(2));
    s.y_tail = s.y_head == 1 ? 0 : s.y * static_cast<int>(rng.below(2));
    batch.push_back(s);
  }
  return batch;
}

// Input-gradient-only MLP backward, independent of the library's
// parameter-gradient path.
Vector mlp_input_grad(const Mlp& head, const HeadTrace& t, double dlogit) {
  const std::size_t layers = head.weights.size();
  Vector delta = Vector::Constant(1, dlogit);
  Vector din;
  for (std::size_t l = layers; l-- > 0;) {
    din = head.weights[l].transpose() * delta;
    if (l > 0) {
      for (Index i = 0; i < din.size(); ++i) {
        if (t.pre_acts[l - 1][i] <= 0.0) {
          din[i] = 0.0;
        }
      }
      delta = din;
    }
  }
  return din;
}

bool matrices_bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("c2al_loss closed forms") {
  const ModelConfig cfg = tiny_model();
  ModelParams p = init_params(cfg, 1, true);
  for (auto& e : p.embeddings) e.setZero();  // zero logits everywhere
  p.attention.setZero();

  const ForwardTrace t = forward_sample({0, 0, 0}, p, Mode::train);
  REQUIRE(t.primary.prob == 0.5);

  // lambdas of zero reduce to the primary loss exactly
  const LossTerms base = c2al_loss(t, 1, 1, 0, 0.0, 0.0);
  CHECK(base.total == bce(0.5, 1.0));
  CHECK(base.dlogit_head == 0.0);
  CHECK(base.dlogit_tail == 0.0);

  // uniform predictions, unit lambdas: three times ln 2
  const LossTerms full = c2al_loss(t, 1, 1, 0, 1.0, 1.0);
  CHECK(full.total == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-15));

  CHECK_THROWS_AS(c2al_loss(t, 1, 1, 0, -0.1, 0.0), ContractError);
}

TEST_CASE("c2al_loss is symmetric under head/tail exchange") {
  const ModelConfig cfg = tiny_model();
  const ModelParams p = init_params(cfg, 5, true);
  const ForwardTrace t = forward_sample({1, 2, 3}, p, Mode::train);

  ModelParams swapped = p;
  std::swap(*swapped.head_aux, *swapped.tail_aux);
  const ForwardTrace ts = forward_sample({1, 2, 3}, swapped, Mode::train);

  const LossTerms a = c2al_loss(t, 1, 1, 0, 0.7, 0.3);
  const LossTerms b = c2al_loss(ts, 1, 0, 1, 0.3, 0.7);
  CHECK(a.total == b.total);
}

TEST_CASE("shared_grads: zero lambdas give a zero aux bundle") {
  const ModelConfig cfg = tiny_model();
  const ModelParams p = init_params(cfg, 7, true);
  const SparseBatch batch = random_batch(cfg, 8, 2);
  const GradBundle b = shared_grads(batch, p, 0.0, 0.0);
  CHECK(b.aux.cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.norm_aux == 0.0);
  CHECK(b.norm_primary > 0.0);
}

TEST_CASE("shared_grads bundle length covers exactly the shared block") {
  const ModelConfig cfg = tiny_model();
  const ModelParams p = init_params(cfg, 7, true);
  const GradBundle b = shared_grads(random_batch(cfg, 4, 3), p, 0.1, 0.1);
  Index expected = p.attention.size();
  for (const auto& e : p.embeddings) {
    expected += e.size();
  }
  CHECK(b.primary.size() == expected);
  CHECK(b.aux.size() == expected);
}

TEST_CASE("primary plus aux equals the total-loss gradient (dual route)") {
  const ModelConfig cfg = tiny_model();
  const ModelParams p = init_params(cfg, 11, true);
  const SparseBatch batch = random_batch(cfg, 6, 4);
  const double lh = 0.8;
  const double lt = 0.3;

  const GradBundle bundle = shared_grads(batch, p, lh, lt);
  const Vector combined = bundle.primary + bundle.aux;

  // independent route: fuse the three upstream signals into one dG per sample
  SharedGrads total = SharedGrads::zeros_like(p);
  for (const Sample& s : batch) {
    const ForwardTrace t = forward_sample(s.slots, p, Mode::train);
    const LossTerms lt_terms = c2al_loss(t, s.y, s.y_head, s.y_tail, lh, lt);
    Vector dg = mlp_input_grad(p.primary_head, t.primary, lt_terms.dlogit_primary);
    dg += mlp_input_grad(*p.head_aux, *t.head_aux, lt_terms.dlogit_head);
    dg += mlp_input_grad(*p.tail_aux, *t.tail_aux, lt_terms.dlogit_tail);
    const Matrix dG =
        Eigen::Map<const Matrix>(dg.data(), t.G.rows(), t.G.cols());
    const auto [dX, dY] = fm_attention_backward(t.X, p.attention, dG);
    total.attention += dY;
    for (std::size_t j = 0; j < s.slots.size(); ++j) {
      total.embeddings[j].row(s.slots[j]) +=
          dX.col(static_cast<Index>(j)).transpose();
    }
  }
  total.scale(1.0 / static_cast<double>(batch.size()));
  const Vector fused = total.flat();
  CHECK((combined - fused).norm() / fused.norm() <= 1e-12);
}

TEST_CASE("shared gradients match finite differences") {
  const ModelConfig cfg = tiny_model(3, 3, 2);
  ModelParams params = init_params(cfg, 13, true);
  const SparseBatch batch = random_batch(cfg, 3, 5);
  const double lh = 0.5;
  const double lt = 0.25;

  const GradBundle bundle = shared_grads(batch, params, lh, lt);

  const auto shared_flat = [&](const ModelParams& q) {
    Vector v(bundle.primary.size());
    Index off = 0;
    for (const auto& e : q.embeddings) {
      v.segment(off, e.size()) = Eigen::Map<const Vector>(e.data(), e.size());
      off += e.size();
    }
    v.segment(off, q.attention.size()) =
        Eigen::Map<const Vector>(q.attention.data(), q.attention.size());
    return v;
  };
  const auto set_shared = [&](ModelParams& q, const Vector& v) {
    Index off = 0;
    for (auto& e : q.embeddings) {
      for (Index i = 0; i < e.size(); ++i) {
        e.data()[i] = v[off++];
      }
    }
    for (Index i = 0; i < q.attention.size(); ++i) {
      q.attention.data()[i] = v[off++];
    }
  };

  const auto loss_with = [&](double wh, double wt) {
    return [&, wh, wt](const Vector& v) {
      ModelParams q = params;
      set_shared(q, v);
      double sum = 0.0;
      for (const Sample& s : batch) {
        const ForwardTrace t = forward_sample(s.slots, q, Mode::train);
        sum += c2al_loss(t, s.y, s.y_head, s.y_tail, wh, wt).total;
      }
      return sum / static_cast<double>(batch.size());
    };
  };

  const Vector at = shared_flat(params);
  const Vector fd_total = finite_diff_grad(loss_with(lh, lt), at);
  const Vector fd_primary = finite_diff_grad(loss_with(0.0, 0.0), at);
  CHECK(oracle::grads_match(bundle.primary, fd_primary));
  CHECK(oracle::grads_match(bundle.primary + bundle.aux, fd_total));
  CHECK(oracle::grads_match(bundle.aux, fd_total - fd_primary, 1e-4, 1e-6));
}

TEST_CASE("decompose: collinear, orthogonal, random, degenerate") {
  GradBundle b;
  b.primary = Vector::Zero(5);
  b.primary << 1, 2, 3, 4, 5;
  b.aux = 2.0 * b.primary;  // power of two keeps the arithmetic exact
  Decomposition d = decompose(b);
  CHECK((d.parallel - b.aux).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.orthogonal.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.cosine == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.flag == DecompFlag::ok);

  // constructed orthogonal pair
  b.primary = Vector::Zero(4);
  b.primary[0] = 3.0;
  b.aux = Vector::Zero(4);
  b.aux[1] = 2.0;
  d = decompose(b);
  CHECK(d.parallel.cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.orthogonal - b.aux).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.cosine == 0.0);

  // random vectors against the least-squares oracle
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    GradBundle r;
    r.primary = Vector(5);
    r.aux = Vector(5);
    for (int i = 0; i < 5; ++i) {
      r.primary[i] = rng.normal();
      r.aux[i] = rng.normal();
    }
    const Decomposition dr = decompose(r);
    const Vector expect = oracle::project(r.aux, r.primary);
    CHECK((dr.parallel - expect).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((dr.parallel + dr.orthogonal - r.aux).norm() / r.aux.norm() <= 1e-10);
    CHECK(std::abs(dr.orthogonal.dot(r.primary)) <=
          1e-8 * dr.orthogonal.norm() * r.primary.norm());
  }

  // near-zero primary gradient flags the degenerate split
  GradBundle z;
  z.primary = Vector::Zero(3);
  z.aux = Vector::Ones(3);
  d = decompose(z);
  CHECK(d.flag == DecompFlag::degenerate_primary);
  CHECK(d.parallel.cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.orthogonal - z.aux).cwiseAbs().maxCoeff() == 0.0);

  GradBundle mismatched;
  mismatched.primary = Vector::Zero(3);
  mismatched.aux = Vector::Zero(4);
  CHECK_THROWS_AS(decompose(mismatched), ContractError);
}

TEST_CASE("optimizer: analytic sgd step and adam first step") {
  // loss theta^2 / 2, gradient theta
  Optimizer sgd(OptKind::sgd, 0.1, 0.9, 0.999, 1e-8);
  double theta = 1.0;
  double grad = theta;
  sgd.begin_step();
  sgd.update(0, &theta, &grad, 1);
  CHECK(theta == doctest::Approx(0.9).epsilon(1e-15));

  Optimizer adam(OptKind::adam, 0.1, 0.9, 0.999, 1e-8);
  theta = 1.0;
  grad = 1.0;
  adam.begin_step();
  adam.update(0, &theta, &grad, 1);
  // first Adam step moves by lr * g / (|g| + eps)
  CHECK(theta == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("training is deterministic given seeds") {
  const ModelConfig mcfg = tiny_model();
  const Dataset ds = generate(tiny_gen(mcfg));
  TrainConfig tcfg;
  tcfg.num_steps = 40;
  tcfg.batch_size = 32;
  tcfg.snapshot_every = 10;
  tcfg.lambda_head = 0.2;
  tcfg.lambda_tail = 0.2;
  tcfg.c2al_enabled = true;

  const TrainResult a = train(ds.samples, tcfg, mcfg);
  const TrainResult b = train(ds.samples, tcfg, mcfg);
  CHECK(matrices_bitwise_equal(a.params.attention, b.params.attention));
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    CHECK(a.snapshots[i].step == b.snapshots[i].step);
    CHECK(matrices_bitwise_equal(a.snapshots[i].attention, b.snapshots[i].attention));
  }
  CHECK(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss_total == b.log[i].loss_total);
  }
}

TEST_CASE("zero lambdas and the disabled path produce identical trajectories") {
  const ModelConfig mcfg = tiny_model();
  const Dataset ds = generate(tiny_gen(mcfg));

  TrainConfig off;
  off.num_steps = 100;
  off.batch_size = 32;
  off.snapshot_every = 25;
  off.c2al_enabled = false;

  TrainConfig zero = off;
  zero.c2al_enabled = true;
  zero.lambda_head = 0.0;
  zero.lambda_tail = 0.0;

  const TrainResult r_off = train(ds.samples, off, mcfg);
  const TrainResult r_zero = train(ds.samples, zero, mcfg);

  CHECK_FALSE(r_off.params.has_aux());
  CHECK(r_zero.params.has_aux());

  const ModelParams s_zero = strip_aux(r_zero.params);
  CHECK(matrices_bitwise_equal(r_off.params.attention, s_zero.attention));
  for (std::size_t j = 0; j < r_off.params.embeddings.size(); ++j) {
    CHECK(matrices_bitwise_equal(r_off.params.embeddings[j], s_zero.embeddings[j]));
  }
  for (std::size_t l = 0; l < r_off.params.primary_head.weights.size(); ++l) {
    CHECK(matrices_bitwise_equal(r_off.params.primary_head.weights[l],
                                 s_zero.primary_head.weights[l]));
  }
  for (std::size_t i = 0; i < r_off.log.size(); ++i) {
    CHECK(r_off.log[i].loss_total == r_zero.log[i].loss_total);
  }
}

TEST_CASE("zero steps return the initialization with one snapshot") {
  const ModelConfig mcfg = tiny_model();
  const Dataset ds = generate(tiny_gen(mcfg));
  TrainConfig tcfg;
  tcfg.num_steps = 0;
  tcfg.batch_size = 16;
  const TrainResult r = train(ds.samples, tcfg, mcfg);
  const ModelParams fresh = init_params(mcfg, tcfg.init_seed, true);
  CHECK(matrices_bitwise_equal(r.params.attention, fresh.attention));
  REQUIRE(r.snapshots.size() == 1);
  CHECK(r.snapshots[0].step == 0);
  CHECK(r.log.empty());
}

TEST_CASE("held-out loss decreases on the synthetic task") {
  const ModelConfig mcfg = tiny_model();
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    GenConfig g = tiny_gen(mcfg, seed);
    g.num_samples = 6000;
    const Dataset ds = generate(g);
    const std::vector<Sample> train_half(ds.samples.begin(),
                                         ds.samples.begin() + 5000);
    const SparseBatch held(ds.samples.begin() + 5000, ds.samples.end());

    TrainConfig tcfg;
    tcfg.num_steps = 300;
    tcfg.batch_size = 64;
    tcfg.lr = 5e-3;
    tcfg.init_seed = seed * 11 + 1;
    tcfg.shuffle_seed = seed * 13 + 2;
    tcfg.c2al_enabled = true;

    const ModelParams at_init = init_params(mcfg, tcfg.init_seed, true);
    const TrainResult r = train(train_half, tcfg, mcfg);

    const auto mean_loss = [&](const ModelParams& p) {
      double sum = 0.0;
      for (const Sample& s : held) {
        const ForwardTrace t = forward_sample(s.slots, p, Mode::inference);
        sum += bce(t.primary.prob, s.y);
      }
      return sum / static_cast<double>(held.size());
    };
    CHECK(mean_loss(r.params) < mean_loss(at_init));
  }
}

TEST_CASE("decomposition diagnostics stay within bounds at every logged step") {
  const ModelConfig mcfg = tiny_model();
  const Dataset ds = generate(tiny_gen(mcfg));
  TrainConfig tcfg;
  tcfg.num_steps = 60;
  tcfg.batch_size = 32;
  tcfg.lambda_head = 0.3;
  tcfg.lambda_tail = 0.3;
  const TrainResult r = train(ds.samples, tcfg, mcfg);
  for (const StepDiag& d : r.log) {
    CHECK(d.cos_aux_primary >= -1.0 - 1e-12);
    CHECK(d.cos_aux_primary <= 1.0 + 1e-12);
    CHECK(d.recomposition_rel_err <= 1e-10);
    CHECK(d.orth_dot_normalized <= 1e-8);
  }
}

TEST_CASE("aux losses never touch the primary head and vice versa") {
  const ModelConfig cfg = tiny_model();
  const ModelParams p = init_params(cfg, 23, true);
  const ForwardTrace t = forward_sample({0, 1, 2}, p, Mode::train);

  SharedGrads sp = SharedGrads::zeros_like(p);
  SharedGrads sa = SharedGrads::zeros_like(p);
  Mlp gp = zeros_like(p.primary_head);
  Mlp gh = zeros_like(*p.head_aux);
  Mlp gt = zeros_like(*p.tail_aux);

  // only the aux upstream signals are active
  backward_sample({0, 1, 2}, p, t, 0.0, 1.0, 1.0, sp, sa, gp, &gh, &gt);
  for (const auto& w : gp.weights) {
    CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(gh.weights[0].cwiseAbs().maxCoeff() > 0.0);
  for (const auto& e : sp.embeddings) {
    CHECK(e.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(sa.attention.cwiseAbs().maxCoeff() > 0.0);

  // only the primary signal is active
  Mlp gh2 = zeros_like(*p.head_aux);
  Mlp gt2 = zeros_like(*p.tail_aux);
  Mlp gp2 = zeros_like(p.primary_head);
  SharedGrads sp2 = SharedGrads::zeros_like(p);
  SharedGrads sa2 = SharedGrads::zeros_like(p);
  backward_sample({0, 1, 2}, p, t, 1.0, 0.0, 0.0, sp2, sa2, gp2, &gh2, &gt2);
  for (const auto& w : gh2.weights) {
    CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  }
  for (const auto& w : gt2.weights) {
    CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(gp2.weights[0].cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("cloned aux head aligns exactly with the primary gradient field") {
  const ModelConfig cfg = tiny_model();
  ModelParams p = init_params(cfg, 29, true);
  *p.head_aux = p.primary_head;  // identical parameterization

  SparseBatch batch;
  Rng rng(31);
  for (int i = 0; i < 16; ++i) {
    Sample s;
    s.slots = {0, static_cast<int>(rng.below(6)), static_cast<int>(rng.below(6))};
    s.cohort = 0;
    s.y = 1;
    s.y_head = 1;  // same label as the primary task
    s.y_tail = 0;
    batch.push_back(s);
  }
  const GradBundle b = shared_grads(batch, p, 1.0, 0.0);
  CHECK((b.aux - b.primary).cwiseAbs().maxCoeff() == 0.0);
  const Decomposition d = decompose(b);
  CHECK(d.cosine == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.norm_orthogonal <= 1e-12 * d.norm_parallel);
}

TEST_CASE("after training, head-cohort positives align primary and head gradients") {
  const ModelConfig mcfg = tiny_model();
  GenConfig g = tiny_gen(mcfg, 7);
  g.num_samples = 6000;
  const Dataset ds = generate(g);

  TrainConfig tcfg;
  tcfg.num_steps = 400;
  tcfg.batch_size = 64;
  tcfg.lr = 5e-3;
  tcfg.lambda_head = 0.2;
  tcfg.lambda_tail = 0.2;
  const TrainResult r = train(ds.samples, tcfg, mcfg);

  SparseBatch head_batch;
  for (const Sample& s : ds.samples) {
    if (s.cohort == 0 && s.y == 1) {
      head_batch.push_back(s);
      if (head_batch.size() == 64) {
        break;
      }
    }
  }
  REQUIRE(head_batch.size() == 64);
  // isolate the head task: lambda_tail = 0 makes G_aux the head-task field
  const GradBundle b = shared_grads(head_batch, r.params, 1.0, 0.0);
  const Decomposition d = decompose(b);
  CHECK(d.flag == DecompFlag::ok);
  CHECK(d.cosine > 0.0);
}

TEST_CASE("non-finite parameters abort training with the step index") {
  const ModelConfig mcfg = tiny_model();
  const Dataset ds = generate(tiny_gen(mcfg));
  ModelParams p = init_params(mcfg, 3, true);
  p.attention(0, 0) = std::numeric_limits<double>::infinity();
  Optimizer opt(OptKind::sgd, 0.1, 0.9, 0.999, 1e-8);
  TrainConfig tcfg;
  SparseBatch batch(ds.samples.begin(), ds.samples.begin() + 4);
  try {
    train_step(p, opt, batch, tcfg, 17);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 17") != std::string::npos);
  }
}

TEST_CASE("snapshot schedule: first at zero, strictly increasing, final included") {
  const ModelConfig mcfg = tiny_model();
  const Dataset ds = generate(tiny_gen(mcfg));
  TrainConfig tcfg;
  tcfg.num_steps = 47;
  tcfg.snapshot_every = 10;
  tcfg.batch_size = 16;
  const TrainResult r = train(ds.samples, tcfg, mcfg);
  REQUIRE(r.snapshots.size() >= 2);
  CHECK(r.snapshots.front().step == 0);
  CHECK(r.snapshots.back().step == 47);
  for (std::size_t i = 1; i < r.snapshots.size(); ++i) {
    CHECK(r.snapshots[i].step > r.snapshots[i - 1].step);
  }
}
