#pragma once

// Side-objective catalog. Each loss returns its value together with flat
// gradients for the maps that participate; every sum is normalized to a mean
// (per sample, per pair, or per transition) so batch size does not rescale
// gradients. Probabilities are clamped to [1e-12, 1-1e-12] before any log.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideinfo/matrix.hpp"
#include "sideinfo/model.hpp"

namespace sideinfo {

enum class PatternKind {
  direct,           // s must equal z
  multi_task,       // beta(s) must predict z
  multi_view_corr,  // s must align with beta(z), optional variance penalty
  multi_view_pred,  // psi(beta(z)) must predict y, psi shared with the main task
  pairwise_sim,     // pull similar pairs together, push dissimilar apart
  pairwise_transform,  // representation differences must behave like z
  irrelevance       // beta predicts z while psi stays orthogonal to beta
};

// Dissimilarity shapes for pairwise losses, as functions of d = |s_i - s_j|:
//   margin:        max(0, m - d^2)   (gradient 0 from the flat side at d^2 = m)
//   exp_neg_dist:  exp(-d)           (gradient taken as 0 at the d = 0 kink)
//   gaussian:      exp(-d^2)
enum class SigmaKind { margin, exp_neg_dist, gaussian };

struct PatternSpec {
  PatternKind kind = PatternKind::direct;
  double weight_main = 0.5;  // simultaneous mixing; must sum to 1 with weight_side
  double weight_side = 0.5;
  double gamma = 0.0;        // batch-variance penalty strength (multi_view_corr)
  SigmaKind sigma = SigmaKind::gaussian;
  double margin = 1.0;
  bool transform_pair_compare = false;  // pairwise_transform: compare transition pairs
  bool transform_continuous = false;    // pair comparison weighted by sigma(|z_i - z_j|)
};

struct PairIndex {
  std::size_t i = 0, j = 0;
  bool similar = true;
};

struct LossResult {
  double value = 0.0;
  Vec phi_grad, psi_grad, beta_grad;  // sized iff the map participates
  bool degenerate = false;            // e.g. no matching transition pairs
};

namespace detail {

inline constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

inline void check_batch(std::span<const std::size_t> idx, std::size_t limit,
                        const char* who) {
  if (idx.empty()) throw std::invalid_argument(std::string(who) + ": empty batch");
  for (std::size_t k : idx)
    if (k >= limit)
      throw std::invalid_argument(std::string(who) + ": index " + std::to_string(k) +
                                  " out of range (" + std::to_string(limit) + " rows)");
}

inline void check_dims(const Map& m, std::size_t in, std::size_t out, const char* who) {
  if (m.in_dim() != in || m.out_dim() != out)
    throw std::invalid_argument(std::string(who) + ": map is " +
                                std::to_string(m.out_dim()) + "x" + std::to_string(m.in_dim()) +
                                ", expected " + std::to_string(out) + "x" + std::to_string(in));
}

}  // namespace detail

// Mean binary cross-entropy of psi(phi(x)) against labels in {0,1}.
inline LossResult loss_supervised(const Map& psi, const Map& phi, const Matrix& x,
                                  const std::vector<int>& y,
                                  std::span<const std::size_t> idx) {
  detail::check_batch(idx, x.rows(), "loss_supervised");
  if (y.size() != x.rows())
    throw std::invalid_argument("loss_supervised: labels do not cover inputs");
  detail::check_dims(phi, x.cols(), phi.out_dim(), "loss_supervised: phi");
  detail::check_dims(psi, phi.out_dim(), 1, "loss_supervised: psi");

  LossResult r;
  r.phi_grad.assign(phi.param_count(), 0.0);
  r.psi_grad.assign(psi.param_count(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  Vec s(phi.out_dim()), p(1), sgrad(phi.out_dim());
  for (std::size_t k : idx) {
    if (y[k] != 0 && y[k] != 1)
      throw std::invalid_argument("loss_supervised: labels must be 0 or 1");
    phi.forward(x.row(k), s.data());
    psi.forward(s.data(), p.data());
    const double pc = detail::clamp_prob(p[0]);
    r.value -= inv_b * (y[k] == 1 ? std::log(pc) : std::log(1.0 - pc));
    const double up = inv_b * (pc - static_cast<double>(y[k])) / (pc * (1.0 - pc));
    std::fill(sgrad.begin(), sgrad.end(), 0.0);
    psi.backward(s.data(), &up, r.psi_grad.data(), sgrad.data());
    phi.backward(x.row(k), sgrad.data(), r.phi_grad.data(), nullptr);
  }
  return r;
}

// Mean squared distance between phi(x) and z.
inline LossResult loss_direct(const Map& phi, const Matrix& x, const Matrix& z,
                              std::span<const std::size_t> idx) {
  detail::check_batch(idx, x.rows(), "loss_direct");
  if (z.rows() != x.rows())
    throw std::invalid_argument("loss_direct: side rows do not cover inputs");
  detail::check_dims(phi, x.cols(), z.cols(), "loss_direct: phi");

  LossResult r;
  r.phi_grad.assign(phi.param_count(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  Vec s(phi.out_dim()), up(phi.out_dim());
  for (std::size_t k : idx) {
    phi.forward(x.row(k), s.data());
    const double* zr = z.row(k);
    for (std::size_t d = 0; d < s.size(); ++d) {
      const double diff = s[d] - zr[d];
      r.value += inv_b * diff * diff;
      up[d] = 2.0 * inv_b * diff;
    }
    phi.backward(x.row(k), up.data(), r.phi_grad.data(), nullptr);
  }
  return r;
}

// Mean squared distance between beta(phi(x)) and z.
inline LossResult loss_multi_task(const Map& beta, const Map& phi, const Matrix& x,
                                  const Matrix& z, std::span<const std::size_t> idx) {
  detail::check_batch(idx, x.rows(), "loss_multi_task");
  if (z.rows() != x.rows())
    throw std::invalid_argument("loss_multi_task: side rows do not cover inputs");
  detail::check_dims(phi, x.cols(), phi.out_dim(), "loss_multi_task: phi");
  detail::check_dims(beta, phi.out_dim(), z.cols(), "loss_multi_task: beta");

  LossResult r;
  r.phi_grad.assign(phi.param_count(), 0.0);
  r.beta_grad.assign(beta.param_count(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  Vec s(phi.out_dim()), zh(beta.out_dim()), up(beta.out_dim()), sgrad(phi.out_dim());
  for (std::size_t k : idx) {
    phi.forward(x.row(k), s.data());
    beta.forward(s.data(), zh.data());
    const double* zr = z.row(k);
    for (std::size_t d = 0; d < zh.size(); ++d) {
      const double diff = zh[d] - zr[d];
      r.value += inv_b * diff * diff;
      up[d] = 2.0 * inv_b * diff;
    }
    std::fill(sgrad.begin(), sgrad.end(), 0.0);
    beta.backward(s.data(), up.data(), r.beta_grad.data(), sgrad.data());
    phi.backward(x.row(k), sgrad.data(), r.phi_grad.data(), nullptr);
  }
  return r;
}

// Mean squared distance between the views s = phi(x) and s' = beta(z), plus a
// soft unit-variance penalty gamma * sum_k (Var_batch(.) - 1)^2 applied to
// both views (population variance). The penalty is what keeps the decoupled
// problem from collapsing to s = s' = 0.
inline LossResult loss_multi_view_corr(const Map& beta, const Map& phi, const Matrix& x,
                                       const Matrix& z, std::span<const std::size_t> idx,
                                       double gamma) {
  detail::check_batch(idx, x.rows(), "loss_multi_view_corr");
  if (z.rows() != x.rows())
    throw std::invalid_argument("loss_multi_view_corr: side rows do not cover inputs");
  if (gamma < 0.0) throw std::invalid_argument("loss_multi_view_corr: gamma must be >= 0");
  detail::check_dims(phi, x.cols(), phi.out_dim(), "loss_multi_view_corr: phi");
  detail::check_dims(beta, z.cols(), phi.out_dim(), "loss_multi_view_corr: beta");
  const std::size_t b = idx.size();
  if (gamma > 0.0 && b < 2)
    throw std::invalid_argument(
        "loss_multi_view_corr: batch of one sample has no variance; gamma > 0 needs >= 2");

  const std::size_t kdim = phi.out_dim();
  const double inv_b = 1.0 / static_cast<double>(b);
  Matrix s(b, kdim), sp(b, kdim);
  Vec mean_s(kdim, 0.0), mean_sp(kdim, 0.0);
  for (std::size_t r_i = 0; r_i < b; ++r_i) {
    phi.forward(x.row(idx[r_i]), s.row(r_i));
    beta.forward(z.row(idx[r_i]), sp.row(r_i));
    for (std::size_t d = 0; d < kdim; ++d) {
      mean_s[d] += inv_b * s(r_i, d);
      mean_sp[d] += inv_b * sp(r_i, d);
    }
  }

  LossResult r;
  r.phi_grad.assign(phi.param_count(), 0.0);
  r.beta_grad.assign(beta.param_count(), 0.0);

  Vec var_s(kdim, 0.0), var_sp(kdim, 0.0);
  for (std::size_t r_i = 0; r_i < b; ++r_i)
    for (std::size_t d = 0; d < kdim; ++d) {
      const double cs = s(r_i, d) - mean_s[d];
      const double cp = sp(r_i, d) - mean_sp[d];
      var_s[d] += inv_b * cs * cs;
      var_sp[d] += inv_b * cp * cp;
    }

  for (std::size_t r_i = 0; r_i < b; ++r_i)
    r.value += inv_b * sq_dist(s.row(r_i), sp.row(r_i), kdim);
  if (gamma > 0.0)
    for (std::size_t d = 0; d < kdim; ++d) {
      const double ds = var_s[d] - 1.0, dp = var_sp[d] - 1.0;
      r.value += gamma * (ds * ds + dp * dp);
    }

  Vec up_s(kdim), up_sp(kdim);
  for (std::size_t r_i = 0; r_i < b; ++r_i) {
    for (std::size_t d = 0; d < kdim; ++d) {
      const double diff = 2.0 * inv_b * (s(r_i, d) - sp(r_i, d));
      up_s[d] = diff;
      up_sp[d] = -diff;
      if (gamma > 0.0) {
        up_s[d] += gamma * 4.0 * inv_b * (var_s[d] - 1.0) * (s(r_i, d) - mean_s[d]);
        up_sp[d] += gamma * 4.0 * inv_b * (var_sp[d] - 1.0) * (sp(r_i, d) - mean_sp[d]);
      }
    }
    phi.backward(x.row(idx[r_i]), up_s.data(), r.phi_grad.data(), nullptr);
    beta.backward(z.row(idx[r_i]), up_sp.data(), r.beta_grad.data(), nullptr);
  }
  return r;
}

// Mean binary cross-entropy of psi(beta(z)) against labels; psi is the same
// predictor the main objective trains, so its gradients accumulate from both.
inline LossResult loss_multi_view_pred(const Map& psi, const Map& beta, const Matrix& z,
                                       const std::vector<int>& y,
                                       std::span<const std::size_t> idx) {
  detail::check_batch(idx, z.rows(), "loss_multi_view_pred");
  if (y.size() != z.rows())
    throw std::invalid_argument("loss_multi_view_pred: labels do not cover side rows");
  detail::check_dims(beta, z.cols(), beta.out_dim(), "loss_multi_view_pred: beta");
  detail::check_dims(psi, beta.out_dim(), 1, "loss_multi_view_pred: psi");

  LossResult r;
  r.psi_grad.assign(psi.param_count(), 0.0);
  r.beta_grad.assign(beta.param_count(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  Vec sp(beta.out_dim()), p(1), spgrad(beta.out_dim());
  for (std::size_t k : idx) {
    if (y[k] != 0 && y[k] != 1)
      throw std::invalid_argument("loss_multi_view_pred: labels must be 0 or 1");
    beta.forward(z.row(k), sp.data());
    psi.forward(sp.data(), p.data());
    const double pc = detail::clamp_prob(p[0]);
    r.value -= inv_b * (y[k] == 1 ? std::log(pc) : std::log(1.0 - pc));
    const double up = inv_b * (pc - static_cast<double>(y[k])) / (pc * (1.0 - pc));
    std::fill(spgrad.begin(), spgrad.end(), 0.0);
    psi.backward(sp.data(), &up, r.psi_grad.data(), spgrad.data());
    beta.backward(z.row(k), spgrad.data(), r.beta_grad.data(), nullptr);
  }
  return r;
}

// Mean over pairs: squared distance for similar pairs, sigma(distance) for
// dissimilar ones.
inline LossResult loss_pairwise(const Map& phi, const Matrix& x,
                                std::span<const PairIndex> pairs,
                                std::span<const std::size_t> pair_idx, SigmaKind sigma,
                                double margin) {
  if (pair_idx.empty()) throw std::invalid_argument("loss_pairwise: empty batch");
  if (sigma == SigmaKind::margin && !(margin > 0.0))
    throw std::invalid_argument("loss_pairwise: margin must be positive");
  detail::check_dims(phi, x.cols(), phi.out_dim(), "loss_pairwise: phi");

  LossResult r;
  r.phi_grad.assign(phi.param_count(), 0.0);
  const double inv_p = 1.0 / static_cast<double>(pair_idx.size());
  const std::size_t kdim = phi.out_dim();
  Vec si(kdim), sj(kdim), up(kdim);
  for (std::size_t pk : pair_idx) {
    if (pk >= pairs.size())
      throw std::invalid_argument("loss_pairwise: pair index out of range");
    const PairIndex& pr = pairs[pk];
    if (pr.i >= x.rows() || pr.j >= x.rows())
      throw std::invalid_argument("loss_pairwise: sample index out of range");
    phi.forward(x.row(pr.i), si.data());
    phi.forward(x.row(pr.j), sj.data());
    double d2 = 0.0;
    for (std::size_t d = 0; d < kdim; ++d) {
      up[d] = si[d] - sj[d];
      d2 += up[d] * up[d];
    }
    double coef = 0.0;  // dL/d(d^2), per pair, before the 1/P mean
    if (pr.similar) {
      r.value += inv_p * d2;
      coef = 1.0;
    } else {
      switch (sigma) {
        case SigmaKind::margin:
          if (d2 < margin) {
            r.value += inv_p * (margin - d2);
            coef = -1.0;
          }
          break;
        case SigmaKind::exp_neg_dist: {
          const double dist = std::sqrt(d2);
          const double e = std::exp(-dist);
          r.value += inv_p * e;
          coef = dist > 0.0 ? -e / (2.0 * dist) : 0.0;
          break;
        }
        case SigmaKind::gaussian: {
          const double e = std::exp(-d2);
          r.value += inv_p * e;
          coef = -e;
          break;
        }
      }
    }
    if (coef != 0.0) {
      const double scale = 2.0 * inv_p * coef;
      for (std::size_t d = 0; d < kdim; ++d) up[d] *= scale;
      phi.backward(x.row(pr.i), up.data(), r.phi_grad.data(), nullptr);
      for (double& u : up) u = -u;
      phi.backward(x.row(pr.j), up.data(), r.phi_grad.data(), nullptr);
    }
  }
  return r;
}

// Mean squared error of the representation step phi(x_{t+1}) - phi(x_t)
// against z_t; z_t encodes the forward change between t and t+1.
inline LossResult loss_transform_fixed(const Map& phi, const Matrix& x, const Matrix& z,
                                       std::span<const std::size_t> trans_idx) {
  if (x.rows() < 2) throw std::invalid_argument("loss_transform_fixed: need >= 2 samples");
  if (z.rows() + 1 != x.rows())
    throw std::invalid_argument("loss_transform_fixed: need one z row per transition");
  detail::check_batch(trans_idx, z.rows(), "loss_transform_fixed");
  detail::check_dims(phi, x.cols(), z.cols(), "loss_transform_fixed: phi");

  LossResult r;
  r.phi_grad.assign(phi.param_count(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(trans_idx.size());
  const std::size_t kdim = phi.out_dim();
  Vec sa(kdim), sb(kdim), up(kdim);
  for (std::size_t t : trans_idx) {
    phi.forward(x.row(t), sa.data());
    phi.forward(x.row(t + 1), sb.data());
    const double* zr = z.row(t);
    for (std::size_t d = 0; d < kdim; ++d) {
      const double diff = (sb[d] - sa[d]) - zr[d];
      r.value += inv_b * diff * diff;
      up[d] = 2.0 * inv_b * diff;
    }
    phi.backward(x.row(t + 1), up.data(), r.phi_grad.data(), nullptr);
    for (double& u : up) u = -u;
    phi.backward(x.row(t), up.data(), r.phi_grad.data(), nullptr);
  }
  return r;
}

// Compares representation steps across transitions that share (or nearly
// share) their side value. Discrete mode averages |D_a - D_b|^2 over the
// transition pairs with exactly equal z rows; if none match the loss is 0 and
// the result is flagged degenerate. Continuous mode averages over all pairs,
// each weighted by sigma(|z_a - z_b|); the weight is constant with respect to
// the parameters. Both modes normalize by the number of pairs they sum over
// (discrete: matching pairs; continuous: all pairs).
inline LossResult loss_transform_pairs(const Map& phi, const Matrix& x, const Matrix& z,
                                       std::span<const std::size_t> trans_idx,
                                       bool continuous, SigmaKind sigma, double margin) {
  if (x.rows() < 2) throw std::invalid_argument("loss_transform_pairs: need >= 2 samples");
  if (z.rows() + 1 != x.rows())
    throw std::invalid_argument("loss_transform_pairs: need one z row per transition");
  if (trans_idx.size() < 2)
    throw std::invalid_argument("loss_transform_pairs: need >= 2 transitions to form pairs");
  detail::check_batch(trans_idx, z.rows(), "loss_transform_pairs");
  detail::check_dims(phi, x.cols(), phi.out_dim(), "loss_transform_pairs: phi");
  if (sigma == SigmaKind::margin && !(margin > 0.0))
    throw std::invalid_argument("loss_transform_pairs: margin must be positive");

  const std::size_t b = trans_idx.size();
  const std::size_t kdim = phi.out_dim();
  Matrix steps(b, kdim);
  Vec sa(kdim), sb(kdim);
  for (std::size_t a = 0; a < b; ++a) {
    phi.forward(x.row(trans_idx[a]), sa.data());
    phi.forward(x.row(trans_idx[a] + 1), sb.data());
    for (std::size_t d = 0; d < kdim; ++d) steps(a, d) = sb[d] - sa[d];
  }

  LossResult r;
  r.phi_grad.assign(phi.param_count(), 0.0);
  Matrix step_grad(b, kdim);  // dL/d(step_a)

  double norm_count = 0.0;
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> active;
  for (std::size_t a = 0; a < b; ++a) {
    for (std::size_t c = a + 1; c < b; ++c) {
      double w = 0.0;
      if (continuous) {
        const double dz = std::sqrt(sq_dist(z.row(trans_idx[a]), z.row(trans_idx[c]), z.cols()));
        switch (sigma) {
          case SigmaKind::margin: w = std::max(0.0, margin - dz * dz); break;
          case SigmaKind::exp_neg_dist: w = std::exp(-dz); break;
          case SigmaKind::gaussian: w = std::exp(-dz * dz); break;
        }
      } else {
        bool equal = true;
        const double* za = z.row(trans_idx[a]);
        const double* zc = z.row(trans_idx[c]);
        for (std::size_t d = 0; d < z.cols() && equal; ++d) equal = (za[d] == zc[d]);
        w = equal ? 1.0 : 0.0;
        if (equal) norm_count += 1.0;
      }
      if (w != 0.0) active.push_back({{a, c}, w});
    }
  }
  if (continuous) norm_count = 0.5 * static_cast<double>(b) * static_cast<double>(b - 1);

  if (norm_count == 0.0) {
    r.degenerate = true;  // no matching pairs: vacuous batch, zero loss
    return r;
  }
  const double inv_m = 1.0 / norm_count;
  for (const auto& [pr, w] : active) {
    const auto [a, c] = pr;
    double d2 = 0.0;
    for (std::size_t d = 0; d < kdim; ++d) {
      const double diff = steps(a, d) - steps(c, d);
      d2 += diff * diff;
      step_grad(a, d) += 2.0 * inv_m * w * diff;
      step_grad(c, d) -= 2.0 * inv_m * w * diff;
    }
    r.value += inv_m * w * d2;
  }

  Vec up(kdim);
  for (std::size_t a = 0; a < b; ++a) {
    for (std::size_t d = 0; d < kdim; ++d) up[d] = step_grad(a, d);
    phi.backward(x.row(trans_idx[a] + 1), up.data(), r.phi_grad.data(), nullptr);
    for (double& u : up) u = -u;
    phi.backward(x.row(trans_idx[a]), up.data(), r.phi_grad.data(), nullptr);
  }
  return r;
}

// Squared Frobenius norm of the row-inner-product matrix between the linear
// parts of psi and beta: sum_{a,b} <w_psi_a, w_beta_b>^2, biases excluded.
// Example: w_psi = [1,0], w_beta = [0,1] -> 0; equal unit rows -> 1.
// Only linear maps qualify (a logistic head counts through its logit).
inline LossResult irrelevance_penalty(const Map& psi, const Map& beta) {
  if (psi.kind() == MapKind::mlp || beta.kind() != MapKind::linear)
    throw std::invalid_argument(
        "irrelevance_penalty: defined for linear psi and beta only");
  if (psi.in_dim() != beta.in_dim())
    throw std::invalid_argument("irrelevance_penalty: psi and beta input dims differ");

  const std::size_t rdim = psi.in_dim();
  const std::size_t rows_psi = psi.out_dim();
  const std::size_t rows_beta = beta.out_dim();

  // Row-major weight blocks sit first in both layouts; biases trail.
  Vec wp = psi.params();
  Vec wb = beta.params();

  LossResult r;
  r.psi_grad.assign(psi.param_count(), 0.0);
  r.beta_grad.assign(beta.param_count(), 0.0);
  for (std::size_t a = 0; a < rows_psi; ++a) {
    for (std::size_t b = 0; b < rows_beta; ++b) {
      const double* pa = wp.data() + a * rdim;
      const double* bb = wb.data() + b * rdim;
      const double g = dot(pa, bb, rdim);
      r.value += g * g;
      for (std::size_t d = 0; d < rdim; ++d) {
        r.psi_grad[a * rdim + d] += 2.0 * g * bb[d];
        r.beta_grad[b * rdim + d] += 2.0 * g * pa[d];
      }
    }
  }
  return r;
}

// Similar pairs from temporal adjacency, dissimilar pairs from differing
// labels. Deterministic order: (t,t+1) runs first, then label-crossing pairs
// (i,j), i<j, row-major, capped at max_dissimilar.
inline std::vector<PairIndex> derive_pairs_from_labels(const std::vector<int>& y,
                                                       std::size_t max_dissimilar = 0) {
  std::vector<PairIndex> out;
  if (y.size() < 2) return out;
  for (std::size_t t = 0; t + 1 < y.size(); ++t) out.push_back({t, t + 1, true});
  std::size_t taken = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = i + 1; j < y.size(); ++j)
      if (y[i] != y[j]) {
        if (max_dissimilar != 0 && taken >= max_dissimilar) return out;
        out.push_back({i, j, false});
        ++taken;
      }
  return out;
}

}  // namespace sideinfo
