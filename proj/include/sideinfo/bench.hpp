#pragma once
// Benchmark harness: cell execution (one side-info channel x method x
// procedure x training-set size x seed), sweeps over grids of cells, and
// aggregation. A cell is the unit of determinism: its raw CSV row is a pure
// function of (config, cell key) except for wall_ms.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sideinfo/baselines.hpp"
#include "sideinfo/csv.hpp"
#include "sideinfo/matrix.hpp"
#include "sideinfo/model.hpp"
#include "sideinfo/patterns.hpp"
#include "sideinfo/rng.hpp"
#include "sideinfo/synth.hpp"
#include "sideinfo/train.hpp"

namespace sideinfo {

enum class SideKind { direct, embedded, relative, none };
enum class Method {
  direct,
  multi_task,
  multi_view_corr,
  multi_view_pred,
  pairwise_transform,
  logreg,
  pca,
  sfa,
};
enum class Procedure { simultaneous, decoupled, pretrain_finetune, none };

inline const char* side_name(SideKind s) {
  switch (s) {
    case SideKind::direct: return "direct";
    case SideKind::embedded: return "embedded";
    case SideKind::relative: return "relative";
    case SideKind::none: return "none";
  }
  throw std::logic_error("unknown side kind");
}

inline const char* method_name(Method m) {
  switch (m) {
    case Method::direct: return "direct";
    case Method::multi_task: return "multi-task";
    case Method::multi_view_corr: return "multi-view-corr";
    case Method::multi_view_pred: return "multi-view-pred";
    case Method::pairwise_transform: return "pairwise-transform";
    case Method::logreg: return "logreg";
    case Method::pca: return "pca";
    case Method::sfa: return "sfa";
  }
  throw std::logic_error("unknown method");
}

inline const char* procedure_name(Procedure p) {
  switch (p) {
    case Procedure::simultaneous: return "simultaneous";
    case Procedure::decoupled: return "decoupled";
    case Procedure::pretrain_finetune: return "pretrain-finetune";
    case Procedure::none: return "none";
  }
  throw std::logic_error("unknown procedure");
}

inline SideKind side_from_name(const std::string& s) {
  if (s == "direct") return SideKind::direct;
  if (s == "embedded") return SideKind::embedded;
  if (s == "relative") return SideKind::relative;
  if (s == "none") return SideKind::none;
  throw std::invalid_argument("unknown side-info kind: '" + s + "'");
}

inline Method method_from_name(const std::string& s) {
  if (s == "direct") return Method::direct;
  if (s == "multi-task") return Method::multi_task;
  if (s == "multi-view-corr") return Method::multi_view_corr;
  if (s == "multi-view-pred") return Method::multi_view_pred;
  if (s == "pairwise-transform") return Method::pairwise_transform;
  if (s == "logreg") return Method::logreg;
  if (s == "pca") return Method::pca;
  if (s == "sfa") return Method::sfa;
  throw std::invalid_argument("unknown method: '" + s + "'");
}

inline Procedure procedure_from_name(const std::string& s) {
  if (s == "simultaneous") return Procedure::simultaneous;
  if (s == "decoupled") return Procedure::decoupled;
  if (s == "pretrain-finetune") return Procedure::pretrain_finetune;
  if (s == "none") return Procedure::none;
  throw std::invalid_argument("unknown procedure: '" + s + "'");
}

inline bool is_baseline(Method m) {
  return m == Method::logreg || m == Method::pca || m == Method::sfa;
}

// Which methods accept which side-info channel. Baselines ignore side
// information entirely and run under the "none" channel.
inline bool method_applicable(SideKind side, Method m) {
  if (is_baseline(m)) return side == SideKind::none;
  switch (side) {
    case SideKind::direct:
      return m == Method::direct || m == Method::multi_task ||
             m == Method::multi_view_corr || m == Method::pairwise_transform;
    case SideKind::embedded:
      return m == Method::direct || m == Method::multi_task ||
             m == Method::multi_view_corr || m == Method::multi_view_pred;
    case SideKind::relative:
      return m == Method::pairwise_transform;
    case SideKind::none:
      return false;
  }
  return false;
}

struct CellSpec {
  SideKind side = SideKind::direct;
  Method method = Method::direct;
  Procedure procedure = Procedure::simultaneous;
  std::size_t n_train = 100;
  std::size_t seed_index = 0;
};

inline void validate_cell(const CellSpec& c) {
  const std::string key = std::string("(") + side_name(c.side) + ", " +
                          method_name(c.method) + ", " + procedure_name(c.procedure) + ")";
  if (!method_applicable(c.side, c.method))
    throw std::invalid_argument("inapplicable combination " + key);
  if (is_baseline(c.method)) {
    if (c.procedure != Procedure::none)
      throw std::invalid_argument("baselines take procedure 'none', got " + key);
  } else {
    if (c.procedure == Procedure::none)
      throw std::invalid_argument("patterns need a training procedure, got " + key);
    if (c.method == Method::multi_view_pred && c.procedure != Procedure::simultaneous)
      throw std::invalid_argument(
          "multi-view-pred shares psi with the main objective and only trains "
          "simultaneously, got " + key);
  }
  if (c.n_train < 2) throw std::invalid_argument("n_train must be >= 2");
}

struct BenchConfig {
  std::uint64_t base_seed = 1;
  std::size_t obs_dim = 50;
  double noise_std = 0.05;
  std::size_t test_size = 50000;
  std::size_t rep_dim = 0;  // 0: channel dimension for the direct method, else 1
  TrainConfig train;
  std::size_t workers = 1;
};

// Per-cell derived seeds. Data streams depend only on (base, seed index, n)
// so every method sees the same data at the same point of the sweep; the
// test stream ignores n so one test set serves a whole seed column. The task
// stream also ignores n: it draws the sensor rotations, which train and test
// trajectories of one seed column must share for evaluation to make sense.
struct CellSeeds {
  std::uint64_t task = 0;
  std::uint64_t train_gen = 0;
  std::uint64_t test_gen = 0;
  std::uint64_t init = 0;
  std::uint64_t trainer = 0;
};

inline CellSeeds derive_seeds(std::uint64_t base, std::size_t seed_index,
                              std::size_t n_train) {
  Rng root(base);
  CellSeeds s;
  s.task = root.substream("task", seed_index).seed();
  s.train_gen = root.substream("train-data", seed_index).substream("n", n_train).seed();
  s.test_gen = root.substream("test-data", seed_index).seed();
  s.init = root.substream("init", seed_index).seed();
  s.trainer = root.substream("trainer", seed_index).seed();
  return s;
}

// Column-wise affine normalization fit on training data. Sample standard
// deviation (N-1); a single sample or a constant column falls back to unit
// scale so the transform stays invertible.
struct Standardizer {
  Vec mean;
  Vec scale;

  void fit(const Matrix& x) {
    if (x.rows() == 0) throw std::invalid_argument("Standardizer: empty data");
    mean.assign(x.cols(), 0.0);
    scale.assign(x.cols(), 1.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += x(i, j);
    for (double& m : mean) m /= static_cast<double>(x.rows());
    if (x.rows() < 2) return;
    Vec ss(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) {
        const double dv = x(i, j) - mean[j];
        ss[j] += dv * dv;
      }
    for (std::size_t j = 0; j < x.cols(); ++j)
      scale[j] = std::max(std::sqrt(ss[j] / static_cast<double>(x.rows() - 1)), 1e-12);
  }

  void apply_row(const double* in, double* out) const {
    for (std::size_t j = 0; j < mean.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size())
      throw std::invalid_argument("Standardizer: dimension mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) apply_row(x.row(i), out.row(i));
    return out;
  }
};

// PCA whitening with rank truncation, fit on training data. Directions whose
// variance clears kEigFloor relative to the top eigenvalue come out with unit
// variance; the rest map to zero. The matrix stays square so downstream model
// shapes do not depend on the training-set size. Whitening matters here
// because the latent walks make position data ill-conditioned at any column
// scaling, which stalls gradient descent along the weak directions.
struct Whitener {
  Vec mean;
  Matrix w;  // d x d, rows beyond the retained rank are zero

  void fit(const Matrix& x) {
    if (x.rows() < 2) throw std::invalid_argument("Whitener: need at least 2 rows");
    mean = detail::column_means(x);
    const Matrix c = detail::centered(x, mean);
    const SymEig eig = sym_eig(detail::cross_cov(c, c));
    const std::size_t d = x.cols();
    w = Matrix(d, d);
    const double top = eig.values.front();
    if (!(top > 0.0)) return;  // constant data maps to zero
    for (std::size_t k = 0; k < d; ++k) {
      if (eig.values[k] < detail::kEigFloor * top) break;  // spectrum descends
      const double s = 1.0 / std::sqrt(eig.values[k]);
      for (std::size_t j = 0; j < d; ++j) w(k, j) = s * eig.vectors(j, k);
    }
  }

  void apply_row(const double* in, double* out) const {
    const std::size_t d = mean.size();
    Vec buf(d);
    for (std::size_t j = 0; j < d; ++j) buf[j] = in[j] - mean[j];
    for (std::size_t k = 0; k < d; ++k) {
      const double* row = w.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += row[j] * buf[j];
      out[k] = acc;
    }
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size())
      throw std::invalid_argument("Whitener: dimension mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) apply_row(x.row(i), out.row(i));
    return out;
  }
};

// Reduced test set kept per seed index: observations, labels, and the hidden
// state (the latter feeds the optimal-rate oracle).
struct TestSet {
  Matrix x;
  std::vector<int> y;
  Vec s;
};

inline TestSet make_test_set(const BenchConfig& cfg, std::size_t seed_index) {
  const CellSeeds seeds = derive_seeds(cfg.base_seed, seed_index, 2);
  GeneratorConfig g;
  g.obs_dim = cfg.obs_dim;
  g.side_noise_std = cfg.noise_std;
  g.length = cfg.test_size;
  g.seed = seeds.test_gen;
  g.task_seed = seeds.task;
  g.keep_latents = false;
  Trajectory tr = generate(g);
  TestSet ts;
  ts.x = std::move(tr.x);
  ts.y = std::move(tr.y);
  ts.s = std::move(tr.s);
  return ts;
}

// Default loss composition per (method, procedure). All runs weight the two
// objectives equally; losses are per-sample means on whitened inputs, so the
// terms are commensurate from the start. Decoupled multi-view-corr needs the
// batch-variance penalty to rule out the collapsed solution; simultaneous
// runs leave it off because the main objective already anchors the scale.
inline PatternSpec default_pattern_spec(Method m, Procedure p) {
  PatternSpec spec;
  switch (m) {
    case Method::direct: spec.kind = PatternKind::direct; break;
    case Method::multi_task: spec.kind = PatternKind::multi_task; break;
    case Method::multi_view_corr: spec.kind = PatternKind::multi_view_corr; break;
    case Method::multi_view_pred: spec.kind = PatternKind::multi_view_pred; break;
    case Method::pairwise_transform: spec.kind = PatternKind::pairwise_transform; break;
    default: throw std::invalid_argument("default_pattern_spec: not a pattern");
  }
  spec.weight_main = 0.5;
  spec.weight_side = 0.5;
  if (m == Method::multi_view_corr)
    spec.gamma = p == Procedure::simultaneous ? 0.0 : 1.0;
  return spec;
}

// The direct method pins the representation to the side channel, so its
// width; every other method learns a 1-dimensional representation.
inline std::size_t default_rep_dim(Method m, std::size_t side_dim) {
  return m == Method::direct ? side_dim : 1;
}

struct CellOptions {
  const PatternSpec* spec = nullptr;  // overrides default_pattern_spec
  ModelStack* trained = nullptr;      // receives the trained stack (patterns only)
};

namespace detail {

inline Matrix as_column(const Vec& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

inline double accuracy_with(const ModelStack& stack, const Matrix& x,
                            const std::vector<int>& y, const Whitener* std_x) {
  if (x.rows() == 0 || x.rows() != y.size())
    throw std::invalid_argument("accuracy_with: bad evaluation set");
  Vec buf(x.cols());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* row = x.row(i);
    if (std_x) {
      std_x->apply_row(row, buf.data());
      row = buf.data();
    }
    hits += ((stack.predict(row) >= 0.5 ? 1 : 0) == y[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

inline double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  const auto dt = std::chrono::steady_clock::now() - t0;
  return std::chrono::duration<double, std::milli>(dt).count();
}

inline RawRow base_row(const CellSpec& c) {
  RawRow r;
  r.side_info = side_name(c.side);
  r.pattern = method_name(c.method);
  r.procedure = procedure_name(c.procedure);
  r.n_train = c.n_train;
  r.seed = c.seed_index;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.test_accuracy = nan;
  r.main_loss = nan;
  r.side_loss = nan;
  return r;
}

inline RawRow run_baseline_cell(const CellSpec& c, const BenchConfig& cfg,
                                const Trajectory& train, const TestSet& test) {
  RawRow row = base_row(c);
  Standardizer sx;
  sx.fit(train.x);
  const Matrix xtr = sx.apply(train.x);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seeds(cfg.base_seed, c.seed_index, c.n_train).trainer;

  if (c.method == Method::logreg) {
    const Matrix xte = sx.apply(test.x);
    row.test_accuracy = fit_logreg_grid(xtr, train.y, xte, test.y, tc).best_accuracy;
    return row;
  }

  // PCA/SFA reduce the standardized observations to one component, then a
  // regularized logistic regression maps that component to the label.
  const LinearProjector proj =
      c.method == Method::pca ? fit_pca(xtr, 1) : fit_sfa(xtr, 1);
  const Matrix ftr = proj.project(xtr);
  Matrix fte(test.x.rows(), 1);
  Vec buf(test.x.cols());
  for (std::size_t i = 0; i < test.x.rows(); ++i) {
    sx.apply_row(test.x.row(i), buf.data());
    fte(i, 0) = proj.project_row(buf.data())[0];
  }
  row.test_accuracy = fit_logreg_grid(ftr, train.y, fte, test.y, tc).best_accuracy;
  return row;
}

inline RawRow run_pattern_cell(const CellSpec& c, const BenchConfig& cfg,
                               const Trajectory& train, const TestSet& test,
                               const CellOptions& opts) {
  RawRow row = base_row(c);
  const CellSeeds seeds = derive_seeds(cfg.base_seed, c.seed_index, c.n_train);
  const bool transform = c.method == Method::pairwise_transform;

  // Level methods compare representations with the side channel on a common
  // scale, so observations and side values are whitened with training
  // statistics; without this the walk-position inputs leave gradient descent
  // far from the least-squares solution. Transformation methods consume
  // steps, whose distribution is unit-scale by construction, and run on raw
  // data.
  SideData data;
  Whitener wx;
  if (transform) {
    data.x = train.x;
    Vec steps;
    if (c.side == SideKind::relative) {
      steps = train.z_relative;
    } else {
      steps.resize(train.z_direct.size() - 1);
      for (std::size_t t = 0; t + 1 < train.z_direct.size(); ++t)
        steps[t] = train.z_direct[t + 1] - train.z_direct[t];
    }
    data.z = as_column(steps);
  } else {
    wx.fit(train.x);
    data.x = wx.apply(train.x);
    Matrix zmat = c.side == SideKind::embedded ? train.z_embedded
                                               : as_column(train.z_direct);
    Whitener wz;
    wz.fit(zmat);
    data.z = wz.apply(zmat);
  }
  data.y = train.y;

  const std::size_t rep =
      cfg.rep_dim != 0 ? cfg.rep_dim : default_rep_dim(c.method, data.z.cols());
  ModelStack stack;
  stack.phi = std::make_unique<LinearMap>(rep, cfg.obs_dim, /*with_bias=*/false);
  stack.psi = std::make_unique<LogisticHead>(rep, /*with_bias=*/true);
  switch (c.method) {
    case Method::multi_task:  // beta: representation -> side values
      stack.beta = std::make_unique<LinearMap>(data.z.cols(), rep, false);
      break;
    case Method::multi_view_corr:  // beta: side values -> representation
    case Method::multi_view_pred:
      stack.beta = std::make_unique<LinearMap>(rep, data.z.cols(), false);
      break;
    default:
      break;
  }
  Rng init_rng(seeds.init);
  stack.init(InitScheme::scaled_uniform, init_rng);

  const PatternSpec spec =
      opts.spec ? *opts.spec : default_pattern_spec(c.method, c.procedure);
  if (spec.kind != default_pattern_spec(c.method, c.procedure).kind)
    throw std::invalid_argument("run_cell: pattern spec kind does not match the method");

  // The batch-variance penalty is quartic in the parameters: a full-scale
  // start overshoots unit variance and momentum turns the overshoot into
  // divergence. Runs that carry the penalty start well inside its stable
  // basin.
  if (spec.gamma > 0.0) {
    ParamBundle shrink;
    shrink.add(stack.phi.get());
    shrink.add(stack.beta.get());
    Vec p = shrink.get();
    for (double& v : p) v *= 0.2;
    shrink.set(p);
  }
  TrainConfig tc = cfg.train;
  tc.seed = seeds.trainer;

  // Joint correlation training is a two-timescale problem: the head must
  // learn its readout without its cross-entropy gradient bending the
  // representation away from the inter-view agreement the side objective is
  // building. Both rates scale the same way with the loss weights, so no
  // weighting separates them; representation scale does. Starting the
  // side-view map large makes the matched representation large, which speeds
  // up head learning while the head weights settle near zero where their
  // pull on the representation is negligible. The head starts at zero so its
  // first steps already point along the matched direction, and the run gets
  // a longer budget because the agreement direction emerges slowly from
  // short, noisy sequences.
  if (c.method == Method::multi_view_corr && c.procedure == Procedure::simultaneous) {
    ParamBundle grow;
    grow.add(stack.beta.get());
    Vec p = grow.get();
    for (double& v : p) v *= 50.0;
    grow.set(p);
    ParamBundle head;
    head.add(stack.psi.get());
    head.set(Vec(head.size(), 0.0));
    tc.epochs *= 3;
  }

  TrainReport rep_out;
  switch (c.procedure) {
    case Procedure::simultaneous:
      rep_out = train_simultaneous(stack, data, spec, tc);
      break;
    case Procedure::decoupled:
      rep_out = train_decoupled(stack, data, spec, tc);
      break;
    case Procedure::pretrain_finetune:
      rep_out = train_pretrain_finetune(stack, data, spec, tc);
      break;
    case Procedure::none:
      throw std::logic_error("run_pattern_cell: procedure none");
  }

  row.main_loss = rep_out.final_main;
  row.side_loss = rep_out.final_side;
  row.test_accuracy = accuracy_with(stack, test.x, test.y, transform ? nullptr : &wx);
  if (opts.trained) *opts.trained = std::move(stack);
  return row;
}

}  // namespace detail

// Executes one cell against a prebuilt test set. Numeric failures
// (diverging optimization, rank-deficient whitening) are recorded on the row
// rather than thrown; configuration errors still throw.
inline RawRow run_cell(const CellSpec& c, const BenchConfig& cfg, const TestSet& test,
                       const CellOptions& opts = {}) {
  validate_cell(c);
  if (opts.spec && is_baseline(c.method))
    throw std::invalid_argument("run_cell: baselines take no pattern spec");
  const auto t0 = std::chrono::steady_clock::now();

  const CellSeeds seeds = derive_seeds(cfg.base_seed, c.seed_index, c.n_train);
  GeneratorConfig g;
  g.obs_dim = cfg.obs_dim;
  g.side_noise_std = cfg.noise_std;
  g.length = c.n_train;
  g.seed = seeds.train_gen;
  g.task_seed = seeds.task;
  g.keep_latents = false;
  const Trajectory train = generate(g);

  RawRow row;
  try {
    row = is_baseline(c.method)
              ? detail::run_baseline_cell(c, cfg, train, test)
              : detail::run_pattern_cell(c, cfg, train, test, opts);
  } catch (const std::runtime_error&) {
    row = detail::base_row(c);
    row.failed = true;
  }
  row.wall_ms = detail::wall_ms_since(t0);
  return row;
}

inline RawRow run_cell(const CellSpec& c, const BenchConfig& cfg,
                       const CellOptions& opts = {}) {
  validate_cell(c);
  const TestSet test = make_test_set(cfg, c.seed_index);
  return run_cell(c, cfg, test, opts);
}

// Mean and standard error of test accuracy per cell, failed seeds excluded.
// Output order follows first appearance in the raw rows.
inline std::vector<AggRow> aggregate(const std::vector<RawRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::string, std::size_t>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  for (const RawRow& r : rows) {
    const Key k{r.side_info, r.pattern, r.procedure, r.n_train};
    auto [it, fresh] = groups.try_emplace(k);
    if (fresh) order.push_back(k);
    if (!r.failed) it->second.push_back(r.test_accuracy);
  }
  std::vector<AggRow> out;
  out.reserve(order.size());
  for (const Key& k : order) {
    const std::vector<double>& acc = groups[k];
    AggRow a;
    a.side_info = std::get<0>(k);
    a.pattern = std::get<1>(k);
    a.procedure = std::get<2>(k);
    a.n_train = std::get<3>(k);
    a.n_seeds = acc.size();
    if (acc.empty()) {
      a.mean_accuracy = std::numeric_limits<double>::quiet_NaN();
      a.std_error = std::numeric_limits<double>::quiet_NaN();
    } else {
      double sum = 0.0;
      for (double v : acc) sum += v;
      a.mean_accuracy = sum / static_cast<double>(acc.size());
      if (acc.size() < 2) {
        a.std_error = 0.0;
      } else {
        double ss = 0.0;
        for (double v : acc) ss += (v - a.mean_accuracy) * (v - a.mean_accuracy);
        const double sd = std::sqrt(ss / static_cast<double>(acc.size() - 1));
        a.std_error = sd / std::sqrt(static_cast<double>(acc.size()));
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

// One (side, method, procedure) column of a sweep.
struct CellTriple {
  SideKind side;
  Method method;
  Procedure procedure;
};

struct SweepPlan {
  std::vector<CellTriple> cells;
  std::vector<std::size_t> n_train{25, 50, 100, 200, 400, 800};
  std::size_t seeds = 10;
};

struct SweepResult {
  std::vector<RawRow> raw;
  std::vector<AggRow> agg;
};

// Runs the Cartesian product cells x n_train x seeds. Jobs are partitioned
// by seed so each worker materializes one 50000-sample test set at a time;
// row order in the output is (cell, n, seed) regardless of worker count.
inline SweepResult run_sweep(const SweepPlan& plan, const BenchConfig& cfg,
                             const std::function<void(const RawRow&)>& on_row = {}) {
  if (plan.cells.empty() || plan.n_train.empty() || plan.seeds == 0)
    throw std::invalid_argument("run_sweep: empty plan");
  for (const CellTriple& t : plan.cells)
    for (std::size_t n : plan.n_train) {
      CellSpec c{t.side, t.method, t.procedure, n, 0};
      validate_cell(c);
    }

  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  const std::size_t n_count = plan.n_train.size();
  std::vector<RawRow> raw(plan.cells.size() * n_count * plan.seeds);
  std::mutex row_mutex;

  auto run_seed_column = [&](std::size_t si) {
    const TestSet test = make_test_set(cfg, si);
    for (std::size_t ci = 0; ci < plan.cells.size(); ++ci)
      for (std::size_t ni = 0; ni < n_count; ++ni) {
        CellSpec c{plan.cells[ci].side, plan.cells[ci].method,
                   plan.cells[ci].procedure, plan.n_train[ni], si};
        RawRow row = run_cell(c, cfg, test);
        const std::size_t idx = (ci * n_count + ni) * plan.seeds + si;
        if (on_row) {
          std::lock_guard<std::mutex> lock(row_mutex);
          on_row(row);
        }
        raw[idx] = std::move(row);
      }
  };

  if (workers == 1) {
    for (std::size_t si = 0; si < plan.seeds; ++si) run_seed_column(si);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t si = w; si < plan.seeds; si += workers) run_seed_column(si);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  SweepResult out;
  out.raw = std::move(raw);
  out.agg = aggregate(out.raw);
  return out;
}

// Monte-Carlo estimate of the best achievable accuracy: classify each state
// by thresholding one noisy read s + N(0, noise_std^2) at zero, against the
// label rule y = (s > 0 ? 0 : 1).
inline double bayes_rate_mc(const Vec& s, double noise_std, Rng& rng,
                            std::size_t reads_per_state = 10) {
  if (s.empty()) throw std::invalid_argument("bayes_rate_mc: empty states");
  if (reads_per_state == 0) throw std::invalid_argument("bayes_rate_mc: zero reads");
  std::size_t hits = 0;
  for (double state : s) {
    const int label = state > 0.0 ? 0 : 1;
    for (std::size_t k = 0; k < reads_per_state; ++k) {
      const double read = state + noise_std * rng.normal();
      hits += ((read > 0.0 ? 0 : 1) == label);
    }
  }
  return static_cast<double>(hits) /
         static_cast<double>(s.size() * reads_per_state);
}

}  // namespace sideinfo
