#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <memory>

#include "sideinfo/model.hpp"
#include "sideinfo/patterns.hpp"
#include "sideinfo/rng.hpp"
#include "sideinfo/train.hpp"

using namespace sideinfo;

namespace {

// phi + psi stack with deterministic init; beta optional.
ModelStack make_stack(std::uint64_t seed, std::size_t in, std::size_t rep,
                      std::size_t beta_out = 0) {
  ModelStack s;
  s.phi = std::make_unique<LinearMap>(rep, in, false);
  s.psi = std::make_unique<LogisticHead>(rep, true);
  if (beta_out > 0) s.beta = std::make_unique<LinearMap>(beta_out, rep, false);
  Rng rng(seed);
  s.init(InitScheme::scaled_uniform, rng);
  return s;
}

Vec stack_params(const ModelStack& s) {
  Vec out = s.phi->params();
  const Vec p = s.psi->params();
  out.insert(out.end(), p.begin(), p.end());
  if (s.beta) {
    const Vec b = s.beta->params();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

SideData make_direct_data(std::uint64_t seed, std::size_t n, std::size_t in,
                          std::size_t rep) {
  Rng rng(seed);
  SideData d;
  d.x = Matrix(n, in);
  d.z = Matrix(n, rep);
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < in; ++j) {
      d.x(i, j) = rng.normal();
      sum += d.x(i, j);
    }
    for (std::size_t j = 0; j < rep; ++j) d.z(i, j) = rng.normal();
    d.y[i] = sum > 0.0 ? 1 : 0;
  }
  return d;
}

}  // namespace

TEST_CASE("lookahead momentum: ten steps match the scalar recurrence exactly") {
  // L(t) = (t - 5)^2 / 2, so grad(t) = t - 5 evaluated at the lookahead point.
  LinearMap theta(1, 1, false);
  ParamBundle bundle;
  bundle.add(&theta);
  OptimizerState st;
  const double lr = 0.1, mu = 0.9;

  double t_ref = 0.0, v_ref = 0.0;
  for (int step = 0; step < 10; ++step) {
    const double value = nesterov_step(
        bundle, st,
        [&](Vec& g) {
          const double look = theta.params()[0];
          g[0] = look - 5.0;
          return 0.5 * (look - 5.0) * (look - 5.0);
        },
        lr, mu);
    const double look_ref = t_ref + mu * v_ref;
    CHECK(value == 0.5 * (look_ref - 5.0) * (look_ref - 5.0));
    v_ref = mu * v_ref - lr * (look_ref - 5.0);
    t_ref += v_ref;
    CHECK(theta.params()[0] == t_ref);
    CHECK(st.velocity[0] == v_ref);
  }
  CHECK(std::abs(t_ref - 5.0) < 2.0);  // heading toward the minimum
}

TEST_CASE("lookahead momentum: zero momentum is plain gradient descent") {
  LinearMap theta(1, 1, false);
  double w0 = 3.0;
  theta.set_params(&w0);
  ParamBundle bundle;
  bundle.add(&theta);
  OptimizerState st;
  double t_ref = 3.0;
  for (int step = 0; step < 5; ++step) {
    nesterov_step(
        bundle, st,
        [&](Vec& g) {
          g[0] = 2.0 * theta.params()[0];
          return theta.params()[0] * theta.params()[0];
        },
        0.25, 0.0);
    t_ref -= 0.25 * 2.0 * t_ref;
    CHECK(theta.params()[0] == t_ref);
  }
}

TEST_CASE("lookahead momentum: aborts on non-finite loss or gradient") {
  LinearMap theta(1, 1, false);
  ParamBundle bundle;
  bundle.add(&theta);
  OptimizerState st;
  CHECK_THROWS_AS(nesterov_step(
                      bundle, st,
                      [&](Vec& g) {
                        g[0] = 0.0;
                        return std::numeric_limits<double>::quiet_NaN();
                      },
                      0.1, 0.9),
                  TrainAbort);
  CHECK_THROWS_AS(nesterov_step(
                      bundle, st,
                      [&](Vec& g) {
                        g[0] = std::numeric_limits<double>::infinity();
                        return 1.0;
                      },
                      0.1, 0.9),
                  TrainAbort);
  OptimizerState bad;
  bad.velocity.assign(3, 0.0);
  CHECK_THROWS_AS(nesterov_step(
                      bundle, bad, [&](Vec& g) { g[0] = 0.0; return 0.0; }, 0.1, 0.9),
                  std::invalid_argument);
}

TEST_CASE("parameter bundle: flat layout and lookup") {
  LinearMap a(2, 3, false);  // 6 params
  LogisticHead b(2, true);   // 3 params
  ParamBundle bundle;
  bundle.add(&a);
  bundle.add(&b);
  bundle.add(nullptr);  // ignored
  CHECK(bundle.size() == 9);
  CHECK(bundle.offset_of(&a) == 0);
  CHECK(bundle.offset_of(&b) == 6);
  CHECK(bundle.contains(&a));
  LinearMap c(1, 1, false);
  CHECK_FALSE(bundle.contains(&c));
  CHECK_THROWS_AS(bundle.offset_of(&c), std::invalid_argument);
  Vec v(9);
  for (std::size_t i = 0; i < 9; ++i) v[i] = static_cast<double>(i);
  bundle.set(v);
  CHECK(bundle.get() == v);
  CHECK(a.params()[5] == 5.0);
  CHECK(b.params()[2] == 8.0);
  CHECK_THROWS_AS(bundle.set(Vec(4, 0.0)), std::invalid_argument);
}

TEST_CASE("training config validation") {
  ModelStack s = make_stack(7, 2, 1);
  SideData d = make_direct_data(8, 6, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 3;

  TrainConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train_supervised(s, d, bad), std::invalid_argument);
  bad = cfg;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(train_supervised(s, d, bad), std::invalid_argument);
  bad = cfg;
  bad.momentum = -0.1;
  CHECK_THROWS_AS(train_supervised(s, d, bad), std::invalid_argument);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train_supervised(s, d, bad), std::invalid_argument);

  PatternSpec spec;
  spec.kind = PatternKind::direct;
  spec.weight_main = 0.7;
  spec.weight_side = 0.7;
  CHECK_THROWS_AS(train_simultaneous(s, d, spec, cfg), std::invalid_argument);
  spec.weight_main = -0.2;
  spec.weight_side = 1.2;
  CHECK_THROWS_AS(train_simultaneous(s, d, spec, cfg), std::invalid_argument);

  SideData no_labels = d;
  no_labels.y.clear();
  CHECK_THROWS_AS(train_supervised(s, no_labels, cfg), std::invalid_argument);
}

TEST_CASE("simultaneous with zero side weight reproduces supervised exactly") {
  SideData d = make_direct_data(10, 24, 3, 2);
  // Poison the side channel: a skipped branch must never look at it.
  for (std::size_t i = 0; i < d.z.rows(); ++i)
    for (std::size_t j = 0; j < d.z.cols(); ++j)
      d.z(i, j) = std::numeric_limits<double>::quiet_NaN();

  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 7;
  cfg.batch_size = 5;
  cfg.seed = 99;

  ModelStack a = make_stack(11, 3, 2);
  ModelStack b = make_stack(11, 3, 2);
  const TrainReport ra = train_supervised(a, d, cfg);
  PatternSpec spec;
  spec.kind = PatternKind::direct;
  spec.weight_main = 1.0;
  spec.weight_side = 0.0;
  const TrainReport rb = train_simultaneous(b, d, spec, cfg);

  CHECK(stack_params(a) == stack_params(b));  // bitwise
  CHECK(ra.final_main == rb.final_main);
  CHECK(std::isnan(rb.final_side));  // evaluated on the poisoned channel
}

TEST_CASE("simultaneous descends a pure side objective to the exact target") {
  // Noiseless direct pattern: z = x * w, recoverable by a linear phi.
  Rng rng(12);
  SideData d;
  d.x = Matrix(40, 2);
  d.z = Matrix(40, 1);
  const double w0 = 1.0, w1 = -1.0;
  for (std::size_t i = 0; i < 40; ++i) {
    d.x(i, 0) = rng.normal();
    d.x(i, 1) = rng.normal();
    d.z(i, 0) = w0 * d.x(i, 0) + w1 * d.x(i, 1);
  }

  ModelStack s = make_stack(13, 2, 1);
  PatternSpec spec;
  spec.kind = PatternKind::direct;
  spec.weight_main = 0.0;
  spec.weight_side = 1.0;
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 200;
  cfg.batch_size = 10;
  cfg.seed = 14;
  const TrainReport rep = train_simultaneous(s, d, spec, cfg);
  CHECK(std::isnan(rep.final_main));  // no labels supplied
  CHECK(rep.final_side < 1e-8);
  const Vec w = s.phi->params();
  CHECK(w[0] == Catch::Approx(w0).margin(1e-4));
  CHECK(w[1] == Catch::Approx(w1).margin(1e-4));
}

TEST_CASE("simultaneous aborts when the iterates blow up") {
  SideData d = make_direct_data(15, 12, 2, 1);
  ModelStack s = make_stack(16, 2, 1);
  PatternSpec spec;
  spec.kind = PatternKind::direct;
  spec.weight_main = 0.0;
  spec.weight_side = 1.0;
  TrainConfig cfg;
  cfg.learning_rate = 1e30;
  cfg.epochs = 10;
  cfg.batch_size = 4;
  CHECK_THROWS_AS(train_simultaneous(s, d, spec, cfg), TrainAbort);
}

TEST_CASE("decoupled: phase one is exactly side-only descent of (phi, beta)") {
  SideData d = make_direct_data(17, 20, 3, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.03;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.seed = 18;
  PatternSpec spec;
  spec.kind = PatternKind::multi_task;

  ModelStack trained = make_stack(19, 3, 2, /*beta_out=*/2);
  ModelStack replica = make_stack(19, 3, 2, /*beta_out=*/2);
  train_decoupled(trained, d, spec, cfg);

  // Hand-rolled phase 1 on the replica: same stream label, phi and beta only.
  {
    ParamBundle bundle;
    bundle.add(replica.phi.get());
    bundle.add(replica.beta.get());
    Rng shuffle = Rng(cfg.seed).substream("shuffle-side");
    OptimizerState st;
    detail::epoch_loop(
        d.x.rows(), cfg.epochs, cfg.batch_size, shuffle,
        [&](std::span<const std::size_t> batch) {
          nesterov_step(
              bundle, st,
              [&](Vec& g) {
                LossResult res = side_objective(replica, d, spec, batch);
                detail::scatter(replica, bundle, res, 1.0, g);
                return res.value;
              },
              cfg.learning_rate, cfg.momentum);
        },
        [](std::size_t) {});
  }
  CHECK(trained.phi->params() == replica.phi->params());    // frozen in phase 2
  CHECK(trained.beta->params() == replica.beta->params());  // untouched in phase 2
  CHECK_FALSE(trained.psi->params() == replica.psi->params());
}

TEST_CASE("decoupled: the representation never depends on the predictor init") {
  SideData d = make_direct_data(20, 18, 3, 2);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 6;
  cfg.seed = 21;
  PatternSpec spec;
  spec.kind = PatternKind::direct;

  ModelStack a = make_stack(22, 3, 2);
  ModelStack b = make_stack(22, 3, 2);
  Rng other(23);
  b.psi->init(InitScheme::scaled_uniform, other);  // different psi start
  train_decoupled(a, d, spec, cfg);
  train_decoupled(b, d, spec, cfg);
  CHECK(a.phi->params() == b.phi->params());
}

TEST_CASE("decoupled rejects the shared-predictor pattern") {
  SideData d = make_direct_data(24, 10, 2, 1);
  ModelStack s = make_stack(25, 2, 1, /*beta_out=*/0);
  s.beta = std::make_unique<LinearMap>(1, 1, false);
  PatternSpec spec;
  spec.kind = PatternKind::multi_view_pred;
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_decoupled(s, d, spec, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train_pretrain_finetune(s, d, spec, cfg), std::invalid_argument);
}

TEST_CASE("pretrain-finetune: zero finetune epochs reproduces decoupled exactly") {
  SideData d = make_direct_data(26, 16, 3, 2);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 5;
  cfg.seed = 27;
  cfg.finetune_epochs = 0;
  PatternSpec spec;
  spec.kind = PatternKind::direct;

  ModelStack a = make_stack(28, 3, 2);
  ModelStack b = make_stack(28, 3, 2);
  const TrainReport ra = train_decoupled(a, d, spec, cfg);
  const TrainReport rb = train_pretrain_finetune(b, d, spec, cfg);
  CHECK(stack_params(a) == stack_params(b));
  CHECK(ra.final_main == rb.final_main);
  CHECK(ra.final_side == rb.final_side);
}

TEST_CASE("pretrain-finetune: finetuning moves phi and psi but not beta") {
  SideData d = make_direct_data(29, 16, 3, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 30;
  cfg.finetune_epochs = 5;
  cfg.finetune_lr = 0.05;
  PatternSpec spec;
  spec.kind = PatternKind::multi_task;

  ModelStack joint = make_stack(31, 3, 2, /*beta_out=*/2);
  ModelStack base = make_stack(31, 3, 2, /*beta_out=*/2);
  train_pretrain_finetune(joint, d, spec, cfg);
  train_decoupled(base, d, spec, cfg);
  CHECK_FALSE(joint.phi->params() == base.phi->params());
  CHECK_FALSE(joint.psi->params() == base.psi->params());
  CHECK(joint.beta->params() == base.beta->params());
}

TEST_CASE("pretrain-finetune warns on a linear representation only") {
  SideData d = make_direct_data(32, 14, 3, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 7;
  cfg.finetune_epochs = 1;
  PatternSpec spec;
  spec.kind = PatternKind::direct;

  ModelStack lin = make_stack(33, 3, 2);
  const TrainReport rl = train_pretrain_finetune(lin, d, spec, cfg);
  REQUIRE_FALSE(rl.warnings.empty());

  ModelStack deep;
  deep.phi = std::make_unique<MlpStack>(std::vector<std::size_t>{3, 4, 2});
  deep.psi = std::make_unique<LogisticHead>(2, true);
  Rng rng(34);
  deep.init(InitScheme::scaled_uniform, rng);
  const TrainReport rd = train_pretrain_finetune(deep, d, spec, cfg);
  CHECK(rd.warnings.empty());

  TrainConfig bad = cfg;
  bad.finetune_lr = 0.0;
  CHECK_THROWS_AS(train_pretrain_finetune(lin, d, spec, bad), std::invalid_argument);
}

TEST_CASE("trace epochs run contiguously across phases") {
  SideData d = make_direct_data(35, 12, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.finetune_epochs = 3;
  PatternSpec spec;
  spec.kind = PatternKind::direct;

  std::vector<std::size_t> seen;
  cfg.trace = [&](std::size_t e, double main, double side) {
    seen.push_back(e);
    CHECK(std::isfinite(main));
    CHECK(std::isfinite(side));
  };
  ModelStack s = make_stack(36, 2, 1);
  train_pretrain_finetune(s, d, spec, cfg);
  REQUIRE(seen.size() == 7);  // 2 side + 2 main + 3 finetune
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i + 1);

  // Supervised training has no side objective to report.
  seen.clear();
  cfg.trace = [&](std::size_t e, double main, double side) {
    seen.push_back(e);
    CHECK(std::isfinite(main));
    CHECK(std::isnan(side));
  };
  ModelStack s2 = make_stack(36, 2, 1);
  train_supervised(s2, d, cfg);
  REQUIRE(seen.size() == 2);
  CHECK(seen[0] == 1);
  CHECK(seen[1] == 2);
}

TEST_CASE("pair and transition objectives batch over their own units") {
  // Pairwise: units are pairs; the ride-along main loss reads pair.i rows.
  Rng rng(37);
  SideData d;
  d.x = Matrix(10, 2);
  d.y.resize(10);
  for (std::size_t i = 0; i < 10; ++i) {
    d.x(i, 0) = rng.normal();
    d.x(i, 1) = rng.normal();
    d.y[i] = d.x(i, 0) > 0 ? 1 : 0;
  }
  d.pairs = derive_pairs_from_labels(d.y, 9);
  PatternSpec spec;
  spec.kind = PatternKind::pairwise_sim;
  CHECK(unit_count(spec, d) == d.pairs.size());
  const std::vector<std::size_t> idx{0, 3};
  const auto rows = main_rows_for_units(spec, d, idx);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == d.pairs[0].i);
  CHECK(rows[1] == d.pairs[3].i);

  ModelStack s = make_stack(38, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  const TrainReport rep = train_simultaneous(s, d, spec, cfg);
  CHECK(std::isfinite(rep.final_main));
  CHECK(std::isfinite(rep.final_side));

  // Transitions: z has one row per step.
  SideData t;
  t.x = d.x;
  t.y = d.y;
  t.z = Matrix(9, 1);
  for (std::size_t i = 0; i < 9; ++i) t.z(i, 0) = rng.normal();
  PatternSpec tspec;
  tspec.kind = PatternKind::pairwise_transform;
  CHECK(unit_count(tspec, t) == 9);
  ModelStack s2 = make_stack(39, 2, 1);
  const TrainReport rep2 = train_simultaneous(s2, t, tspec, cfg);
  CHECK(std::isfinite(rep2.final_main));
  CHECK(std::isfinite(rep2.final_side));

  // No units at all is a configuration error, not a silent no-op.
  SideData empty;
  empty.x = d.x;
  empty.y = d.y;
  PatternSpec pspec;
  pspec.kind = PatternKind::pairwise_sim;
  ModelStack s3 = make_stack(40, 2, 1);
  CHECK_THROWS_AS(train_simultaneous(s3, empty, pspec, cfg), std::invalid_argument);
}
