#pragma once

// Optimizer and training procedures.
//
// The update is Nesterov momentum in lookahead form, pinned exactly as:
//     g = grad(theta + mu * v);  v <- mu * v - lr * g;  theta <- theta + v
// momentum = 0 reduces it to plain SGD.
//
// Three procedures over a ModelStack:
//   simultaneous       one loop descending wm * L_f + ws * L_z
//   decoupled          phase 1: (phi, beta) on L_z; phase 2: psi on L_f, phi frozen
//   pretrain_finetune  decoupled, then finetune_epochs of joint (phi, psi) on L_f
//
// Batch units are samples, except: pair losses batch over pairs and
// transformation losses batch over transitions. When the main objective rides
// along (simultaneous), its per-batch labels come from the first member of
// each pair or transition.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideinfo/matrix.hpp"
#include "sideinfo/model.hpp"
#include "sideinfo/patterns.hpp"
#include "sideinfo/rng.hpp"

namespace sideinfo {

// Raised when a loss or gradient stops being finite; callers record the cell
// as failed instead of crashing a sweep.
struct TrainAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 100;
  std::size_t batch_size = 20;
  std::size_t finetune_epochs = 10;
  double finetune_lr = 0.001;
  std::uint64_t seed = 0;
  // Called at each epoch end with (epoch, main loss, side loss) over the full
  // training set; epoch numbering continues across phases.
  std::function<void(std::size_t, double, double)> trace;
};

struct TrainReport {
  double final_main = std::numeric_limits<double>::quiet_NaN();
  double final_side = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

// Training payload. x rows are samples; z rows pair with samples, or with
// transitions (row t describes the step t -> t+1) for transformation losses.
struct SideData {
  Matrix x;
  std::vector<int> y;
  Matrix z;
  std::vector<PairIndex> pairs;
};

inline std::size_t unit_count(const PatternSpec& spec, const SideData& data) {
  switch (spec.kind) {
    case PatternKind::pairwise_sim: return data.pairs.size();
    case PatternKind::pairwise_transform: return data.z.rows();
    default: return data.x.rows();
  }
}

// Dispatches to the loss the pattern calls for. For irrelevance the side
// objective is the auxiliary prediction (multi-task) loss plus the
// orthogonality penalty; the penalty alone has no data term to descend.
inline LossResult side_objective(const ModelStack& stack, const SideData& data,
                                 const PatternSpec& spec,
                                 std::span<const std::size_t> idx) {
  auto need_beta = [&]() {
    if (!stack.beta) throw std::invalid_argument("side_objective: pattern needs a beta map");
  };
  switch (spec.kind) {
    case PatternKind::direct:
      return loss_direct(*stack.phi, data.x, data.z, idx);
    case PatternKind::multi_task:
      need_beta();
      return loss_multi_task(*stack.beta, *stack.phi, data.x, data.z, idx);
    case PatternKind::multi_view_corr:
      need_beta();
      return loss_multi_view_corr(*stack.beta, *stack.phi, data.x, data.z, idx, spec.gamma);
    case PatternKind::multi_view_pred:
      need_beta();
      return loss_multi_view_pred(*stack.psi, *stack.beta, data.z, data.y, idx);
    case PatternKind::pairwise_sim:
      return loss_pairwise(*stack.phi, data.x, data.pairs, idx, spec.sigma, spec.margin);
    case PatternKind::pairwise_transform:
      if (spec.transform_pair_compare)
        return loss_transform_pairs(*stack.phi, data.x, data.z, idx,
                                    spec.transform_continuous, spec.sigma, spec.margin);
      return loss_transform_fixed(*stack.phi, data.x, data.z, idx);
    case PatternKind::irrelevance: {
      need_beta();
      LossResult mt = loss_multi_task(*stack.beta, *stack.phi, data.x, data.z, idx);
      LossResult pen = irrelevance_penalty(*stack.psi, *stack.beta);
      mt.value += pen.value;
      mt.psi_grad = std::move(pen.psi_grad);
      for (std::size_t i = 0; i < mt.beta_grad.size(); ++i)
        mt.beta_grad[i] += pen.beta_grad[i];
      return mt;
    }
  }
  throw std::logic_error("side_objective: unknown pattern kind");
}

// Maps batch units to the rows the supervised loss reads: samples map to
// themselves, pairs and transitions to their first member.
inline std::vector<std::size_t> main_rows_for_units(const PatternSpec& spec,
                                                    const SideData& data,
                                                    std::span<const std::size_t> idx) {
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  if (spec.kind == PatternKind::pairwise_sim)
    for (std::size_t k = 0; k < rows.size(); ++k) rows[k] = data.pairs[idx[k]].i;
  return rows;
}

class ParamBundle {
 public:
  void add(Map* m) {
    if (!m) return;
    maps_.push_back(m);
    total_ += m->param_count();
  }

  std::size_t size() const { return total_; }
  const std::vector<Map*>& maps() const { return maps_; }

  Vec get() const {
    Vec out(total_);
    std::size_t off = 0;
    for (const Map* m : maps_) {
      m->get_params(out.data() + off);
      off += m->param_count();
    }
    return out;
  }

  void set(const Vec& v) {
    if (v.size() != total_) throw std::invalid_argument("ParamBundle::set: size mismatch");
    std::size_t off = 0;
    for (Map* m : maps_) {
      m->set_params(v.data() + off);
      off += m->param_count();
    }
  }

  std::size_t offset_of(const Map* m) const {
    std::size_t off = 0;
    for (const Map* cur : maps_) {
      if (cur == m) return off;
      off += cur->param_count();
    }
    throw std::invalid_argument("ParamBundle::offset_of: map not in bundle");
  }

  bool contains(const Map* m) const {
    for (const Map* cur : maps_)
      if (cur == m) return true;
    return false;
  }

 private:
  std::vector<Map*> maps_;
  std::size_t total_ = 0;
};

struct OptimizerState {
  Vec velocity;  // sized on first step
};

// One lookahead-momentum step. grad_at is called after the bundle has been
// set to theta + mu * v; it must fill its argument (already zeroed) with the
// flat gradient and return the loss value. Non-finite values abort.
template <class GradFn>
double nesterov_step(ParamBundle& params, OptimizerState& state, GradFn&& grad_at,
                     double lr, double momentum) {
  Vec theta = params.get();
  if (state.velocity.empty()) state.velocity.assign(theta.size(), 0.0);
  if (state.velocity.size() != theta.size())
    throw std::invalid_argument("nesterov_step: velocity size mismatch");

  Vec look = theta;
  axpy(momentum, state.velocity, look);
  params.set(look);

  Vec g(theta.size(), 0.0);
  const double value = grad_at(g);
  if (!std::isfinite(value)) throw TrainAbort("non-finite loss value");
  for (double gi : g)
    if (!std::isfinite(gi)) throw TrainAbort("non-finite gradient");

  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.velocity[i] = momentum * state.velocity[i] - lr * g[i];
    theta[i] += state.velocity[i];
  }
  params.set(theta);
  return value;
}

namespace detail {

inline void check_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw std::invalid_argument("momentum must lie in [0, 1)");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
}

inline void check_weights(const PatternSpec& spec) {
  if (spec.weight_main < 0.0 || spec.weight_side < 0.0 ||
      std::abs(spec.weight_main + spec.weight_side - 1.0) > 1e-12)
    throw std::invalid_argument("objective weights must be non-negative and sum to 1");
}

inline void check_labels(const SideData& data, const char* who) {
  if (data.y.size() != data.x.rows())
    throw std::invalid_argument(std::string(who) + ": needs one label per sample");
}

inline void accumulate(Vec& dst, std::size_t offset, const Vec& src, double w) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[offset + i] += w * src[i];
}

// Scatters a LossResult into the flat bundle gradient, weighted.
inline void scatter(const ModelStack& stack, const ParamBundle& bundle, const LossResult& res,
                    double w, Vec& g) {
  if (!res.phi_grad.empty() && bundle.contains(stack.phi.get()))
    accumulate(g, bundle.offset_of(stack.phi.get()), res.phi_grad, w);
  if (!res.psi_grad.empty() && bundle.contains(stack.psi.get()))
    accumulate(g, bundle.offset_of(stack.psi.get()), res.psi_grad, w);
  if (stack.beta && !res.beta_grad.empty() && bundle.contains(stack.beta.get()))
    accumulate(g, bundle.offset_of(stack.beta.get()), res.beta_grad, w);
}

template <class StepFn, class EpochEndFn>
void epoch_loop(std::size_t units, std::size_t epochs, std::size_t batch_size,
                Rng& shuffle_rng, StepFn&& step, EpochEndFn&& at_epoch_end) {
  if (units == 0) throw std::invalid_argument("training needs at least one batch unit");
  std::vector<std::size_t> order(units);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t e = 0; e < epochs; ++e) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < units; start += batch_size) {
      const std::size_t len = std::min(batch_size, units - start);
      step(std::span<const std::size_t>(order.data() + start, len));
    }
    at_epoch_end(e);
  }
}

inline std::vector<std::size_t> all_units(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace detail

// Plain supervised descent of mean BCE over (phi, psi). The yardstick run the
// simultaneous procedure must reproduce bit-exactly at weight_side = 0.
inline TrainReport train_supervised(ModelStack& stack, const SideData& data,
                                    const TrainConfig& cfg) {
  detail::check_config(cfg);
  detail::check_labels(data, "train_supervised");
  ParamBundle bundle;
  bundle.add(stack.phi.get());
  bundle.add(stack.psi.get());

  Rng shuffle = Rng(cfg.seed).substream("shuffle");
  OptimizerState st;
  const auto trace_all = detail::all_units(data.x.rows());

  detail::epoch_loop(
      data.x.rows(), cfg.epochs, cfg.batch_size, shuffle,
      [&](std::span<const std::size_t> batch) {
        nesterov_step(
            bundle, st,
            [&](Vec& g) {
              LossResult res = loss_supervised(*stack.psi, *stack.phi, data.x, data.y, batch);
              detail::scatter(stack, bundle, res, 1.0, g);
              return res.value;
            },
            cfg.learning_rate, cfg.momentum);
      },
      [&](std::size_t e) {
        if (cfg.trace) {
          LossResult res = loss_supervised(*stack.psi, *stack.phi, data.x, data.y, trace_all);
          cfg.trace(e + 1, res.value, std::numeric_limits<double>::quiet_NaN());
        }
      });

  TrainReport rep;
  rep.final_main =
      loss_supervised(*stack.psi, *stack.phi, data.x, data.y, trace_all).value;
  return rep;
}

// One loop descending weight_main * L_f + weight_side * L_z. A zero weight
// skips that objective entirely, so weight_side = 0 consumes the same random
// stream and arithmetic as train_supervised.
inline TrainReport train_simultaneous(ModelStack& stack, const SideData& data,
                                      const PatternSpec& spec, const TrainConfig& cfg) {
  detail::check_config(cfg);
  detail::check_weights(spec);
  if (spec.weight_main > 0.0) detail::check_labels(data, "train_simultaneous");
  if (spec.kind == PatternKind::multi_view_pred)
    detail::check_labels(data, "train_simultaneous (multi_view_pred side objective)");

  ParamBundle bundle;
  bundle.add(stack.phi.get());
  bundle.add(stack.psi.get());
  bundle.add(stack.beta.get());

  Rng shuffle = Rng(cfg.seed).substream("shuffle");
  OptimizerState st;
  const std::size_t units = unit_count(spec, data);
  const auto side_all = detail::all_units(units);
  const auto main_all = detail::all_units(data.x.rows());

  auto full_losses = [&](double& main, double& side) {
    main = data.y.size() == data.x.rows() && !data.y.empty()
               ? loss_supervised(*stack.psi, *stack.phi, data.x, data.y, main_all).value
               : std::numeric_limits<double>::quiet_NaN();
    side = side_objective(stack, data, spec, side_all).value;
  };

  detail::epoch_loop(
      units, cfg.epochs, cfg.batch_size, shuffle,
      [&](std::span<const std::size_t> batch) {
        nesterov_step(
            bundle, st,
            [&](Vec& g) {
              double value = 0.0;
              if (spec.weight_main > 0.0) {
                const auto rows = main_rows_for_units(spec, data, batch);
                LossResult res =
                    loss_supervised(*stack.psi, *stack.phi, data.x, data.y, rows);
                detail::scatter(stack, bundle, res, spec.weight_main, g);
                value += spec.weight_main * res.value;
              }
              if (spec.weight_side > 0.0) {
                LossResult res = side_objective(stack, data, spec, batch);
                detail::scatter(stack, bundle, res, spec.weight_side, g);
                value += spec.weight_side * res.value;
              }
              return value;
            },
            cfg.learning_rate, cfg.momentum);
      },
      [&](std::size_t e) {
        if (cfg.trace) {
          double m, s;
          full_losses(m, s);
          cfg.trace(e + 1, m, s);
        }
      });

  TrainReport rep;
  full_losses(rep.final_main, rep.final_side);
  return rep;
}

// Phase 1 fits (phi, beta) to the side objective alone; phase 2 fits psi to
// the labels with phi frozen. The side objective must not need psi, which
// rules out multi_view_pred.
inline TrainReport train_decoupled(ModelStack& stack, const SideData& data,
                                   const PatternSpec& spec, const TrainConfig& cfg) {
  detail::check_config(cfg);
  if (spec.kind == PatternKind::multi_view_pred)
    throw std::invalid_argument(
        "train_decoupled: multi_view_pred trains psi inside the side objective; "
        "phase 1 has no psi to hold fixed");
  detail::check_labels(data, "train_decoupled (phase 2)");

  TrainReport rep;

  {  // phase 1: representation from side information only
    ParamBundle bundle;
    bundle.add(stack.phi.get());
    bundle.add(stack.beta.get());
    Rng shuffle = Rng(cfg.seed).substream("shuffle-side");
    OptimizerState st;
    const std::size_t units = unit_count(spec, data);
    const auto side_all = detail::all_units(units);
    const auto main_all = detail::all_units(data.x.rows());
    detail::epoch_loop(
        units, cfg.epochs, cfg.batch_size, shuffle,
        [&](std::span<const std::size_t> batch) {
          nesterov_step(
              bundle, st,
              [&](Vec& g) {
                LossResult res = side_objective(stack, data, spec, batch);
                detail::scatter(stack, bundle, res, 1.0, g);
                return res.value;
              },
              cfg.learning_rate, cfg.momentum);
        },
        [&](std::size_t e) {
          if (cfg.trace) {
            const double m =
                loss_supervised(*stack.psi, *stack.phi, data.x, data.y, main_all).value;
            cfg.trace(e + 1, m, side_objective(stack, data, spec, side_all).value);
          }
        });
  }

  {  // phase 2: predictor on frozen representation
    ParamBundle bundle;
    bundle.add(stack.psi.get());
    Rng shuffle = Rng(cfg.seed).substream("shuffle-main");
    OptimizerState st;
    const auto main_all = detail::all_units(data.x.rows());
    const auto side_all = detail::all_units(unit_count(spec, data));
    detail::epoch_loop(
        data.x.rows(), cfg.epochs, cfg.batch_size, shuffle,
        [&](std::span<const std::size_t> batch) {
          nesterov_step(
              bundle, st,
              [&](Vec& g) {
                LossResult res =
                    loss_supervised(*stack.psi, *stack.phi, data.x, data.y, batch);
                detail::scatter(stack, bundle, res, 1.0, g);
                return res.value;
              },
              cfg.learning_rate, cfg.momentum);
        },
        [&](std::size_t e) {
          if (cfg.trace) {
            const double m =
                loss_supervised(*stack.psi, *stack.phi, data.x, data.y, main_all).value;
            cfg.trace(cfg.epochs + e + 1, m,
                      side_objective(stack, data, spec, side_all).value);
          }
        });
  }

  rep.final_main = loss_supervised(*stack.psi, *stack.phi, data.x, data.y,
                                   detail::all_units(data.x.rows()))
                       .value;
  rep.final_side =
      side_objective(stack, data, spec, detail::all_units(unit_count(spec, data))).value;
  return rep;
}

// Decoupled phases, then finetune_epochs of joint (phi, psi) descent on the
// main objective at finetune_lr. finetune_epochs = 0 reproduces decoupled
// exactly. With a linear phi the extra phase changes little; flagged, because
// the point of finetuning is a non-convex main objective.
inline TrainReport train_pretrain_finetune(ModelStack& stack, const SideData& data,
                                           const PatternSpec& spec, const TrainConfig& cfg) {
  if (!(cfg.finetune_lr > 0.0))
    throw std::invalid_argument("finetune_lr must be > 0");
  TrainReport rep = train_decoupled(stack, data, spec, cfg);
  if (stack.phi->kind() != MapKind::mlp)
    rep.warnings.push_back(
        "pretrain_finetune on a linear representation: joint finetuning adds little "
        "beyond decoupled");
  if (cfg.finetune_epochs == 0) return rep;

  ParamBundle bundle;
  bundle.add(stack.phi.get());
  bundle.add(stack.psi.get());
  Rng shuffle = Rng(cfg.seed).substream("shuffle-finetune");
  OptimizerState st;
  const auto main_all = detail::all_units(data.x.rows());
  const auto side_all = detail::all_units(unit_count(spec, data));
  detail::epoch_loop(
      data.x.rows(), cfg.finetune_epochs, cfg.batch_size, shuffle,
      [&](std::span<const std::size_t> batch) {
        nesterov_step(
            bundle, st,
            [&](Vec& g) {
              LossResult res =
                  loss_supervised(*stack.psi, *stack.phi, data.x, data.y, batch);
              detail::scatter(stack, bundle, res, 1.0, g);
              return res.value;
            },
            cfg.finetune_lr, cfg.momentum);
      },
      [&](std::size_t e) {
        if (cfg.trace) {
          const double m =
              loss_supervised(*stack.psi, *stack.phi, data.x, data.y, main_all).value;
          cfg.trace(2 * cfg.epochs + e + 1, m,
                    side_objective(stack, data, spec, side_all).value);
        }
      });

  rep.final_main =
      loss_supervised(*stack.psi, *stack.phi, data.x, data.y, main_all).value;
  rep.final_side = side_objective(stack, data, spec, side_all).value;
  return rep;
}

}  // namespace sideinfo
