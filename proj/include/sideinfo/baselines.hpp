#pragma once

// Reference methods the benchmark compares against: ridge-grid logistic
// regression, PCA, linear slow feature analysis, and closed-form CCA.
// The spectral methods all run through sym_eig; sample covariances use the
// 1/(N-1) convention throughout.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideinfo/eig.hpp"
#include "sideinfo/matrix.hpp"
#include "sideinfo/model.hpp"
#include "sideinfo/train.hpp"

namespace sideinfo {

// k directions applied to mean-centered input: out = W (x - mean).
struct LinearProjector {
  Matrix w;             // k x d
  Vec mean;             // d
  std::string method;   // "pca" | "sfa" | "cca-x" | "cca-z"
  Vec spectrum;         // per-component score, in component order

  Vec project_row(const double* x) const {
    Vec out(w.rows(), 0.0);
    for (std::size_t k = 0; k < w.rows(); ++k) {
      const double* row = w.row(k);
      double acc = 0.0;
      for (std::size_t d = 0; d < w.cols(); ++d) acc += row[d] * (x[d] - mean[d]);
      out[k] = acc;
    }
    return out;
  }

  Matrix project(const Matrix& x) const {
    if (x.cols() != w.cols())
      throw std::invalid_argument("LinearProjector: input dimension mismatch");
    Matrix out(x.rows(), w.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const Vec row = project_row(x.row(i));
      std::copy(row.begin(), row.end(), out.row(i));
    }
    return out;
  }
};

namespace detail {

inline Vec column_means(const Matrix& x) {
  Vec mean(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += x(i, j);
  for (double& m : mean) m /= static_cast<double>(x.rows());
  return mean;
}

inline Matrix centered(const Matrix& x, const Vec& mean) {
  Matrix c = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) c(i, j) -= mean[j];
  return c;
}

// (1/(N-1)) A^T B for equally tall, centered matrices.
inline Matrix cross_cov(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ra = a.row(i);
    const double* rb = b.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double v = ra[p];
      if (v == 0.0) continue;
      double* crow = c.row(p);
      for (std::size_t q = 0; q < b.cols(); ++q) crow[q] += v * rb[q];
    }
  }
  const double inv = 1.0 / static_cast<double>(a.rows() - 1);
  for (std::size_t p = 0; p < c.rows(); ++p)
    for (std::size_t q = 0; q < c.cols(); ++q) c(p, q) *= inv;
  return c;
}

inline constexpr double kEigFloor = 1e-10;  // relative to the top eigenvalue

// Whitening transform W with W C W^T = I, rejecting spectra that fall below
// kEigFloor relative to the largest eigenvalue.
inline Matrix whitener(const Matrix& cov, const char* who) {
  const SymEig eig = sym_eig(cov);
  const double top = eig.values.front();
  if (!(top > 0.0))
    throw std::runtime_error(std::string(who) + ": covariance has no positive variance");
  Matrix w(eig.values.size(), eig.values.size());
  for (std::size_t k = 0; k < eig.values.size(); ++k) {
    if (eig.values[k] < kEigFloor * top)
      throw std::runtime_error(std::string(who) +
                               ": covariance rank-deficient beyond the 1e-10 floor");
    const double s = 1.0 / std::sqrt(eig.values[k]);
    for (std::size_t d = 0; d < eig.values.size(); ++d) w(k, d) = s * eig.vectors(d, k);
  }
  return w;
}

}  // namespace detail

// Top-k principal directions of the sample covariance.
inline LinearProjector fit_pca(const Matrix& x, std::size_t k) {
  if (x.rows() < 2) throw std::invalid_argument("fit_pca: need at least 2 samples");
  if (k == 0 || k > x.cols()) throw std::invalid_argument("fit_pca: bad component count");
  LinearProjector p;
  p.method = "pca";
  p.mean = detail::column_means(x);
  const Matrix c = detail::centered(x, p.mean);
  const SymEig eig = sym_eig(detail::cross_cov(c, c));
  p.w = Matrix(k, x.cols());
  p.spectrum.assign(eig.values.begin(), eig.values.begin() + k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t d = 0; d < x.cols(); ++d) p.w(r, d) = eig.vectors(d, r);
  return p;
}

// Linear slow feature analysis: whiten, then take the directions whose
// temporal differences have the least variance. Rows of x must be in time
// order. Outputs have unit sample variance by construction. The spectrum
// holds the Delta-variances, slowest first (ascending).
inline LinearProjector fit_sfa(const Matrix& x, std::size_t k) {
  if (x.rows() < 3) throw std::invalid_argument("fit_sfa: need at least 3 samples");
  if (k == 0 || k > x.cols()) throw std::invalid_argument("fit_sfa: bad component count");
  LinearProjector p;
  p.method = "sfa";
  p.mean = detail::column_means(x);
  const Matrix c = detail::centered(x, p.mean);
  const Matrix white = detail::whitener(detail::cross_cov(c, c), "fit_sfa");

  const Matrix u = matmul(c, transpose(white));
  Matrix du(u.rows() - 1, u.cols());
  for (std::size_t t = 0; t + 1 < u.rows(); ++t)
    for (std::size_t d = 0; d < u.cols(); ++d) du(t, d) = u(t + 1, d) - u(t, d);
  const SymEig eig = sym_eig(detail::cross_cov(du, du));

  // sym_eig sorts descending; the slow directions sit at the tail.
  p.w = Matrix(k, x.cols());
  p.spectrum.resize(k);
  const std::size_t n = eig.values.size();
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t src = n - 1 - r;
    p.spectrum[r] = eig.values[src];
    for (std::size_t d = 0; d < x.cols(); ++d) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n; ++m) acc += eig.vectors(m, src) * white(m, d);
      p.w(r, d) = acc;
    }
  }
  return p;
}

struct CcaResult {
  LinearProjector x_proj, z_proj;
  Vec correlations;  // descending, clamped to [0, 1]
};

// Closed-form canonical correlation analysis: whiten both views, then
// eigendecompose T T^T with T the whitened cross-covariance.
inline CcaResult fit_cca(const Matrix& x, const Matrix& z, std::size_t k) {
  if (x.rows() != z.rows()) throw std::invalid_argument("fit_cca: views differ in length");
  if (x.rows() < std::max(x.cols(), z.cols()) + 1)
    throw std::invalid_argument("fit_cca: need at least max(dim x, dim z) + 1 samples");
  if (k == 0 || k > std::min(x.cols(), z.cols()))
    throw std::invalid_argument("fit_cca: bad component count");

  CcaResult r;
  r.x_proj.method = "cca-x";
  r.z_proj.method = "cca-z";
  r.x_proj.mean = detail::column_means(x);
  r.z_proj.mean = detail::column_means(z);
  const Matrix cx = detail::centered(x, r.x_proj.mean);
  const Matrix cz = detail::centered(z, r.z_proj.mean);
  const Matrix wx = detail::whitener(detail::cross_cov(cx, cx), "fit_cca (x view)");
  const Matrix wz = detail::whitener(detail::cross_cov(cz, cz), "fit_cca (z view)");

  // T = Wx Cxz Wz^T, correlations are its singular values.
  const Matrix t = matmul(wx, matmul(detail::cross_cov(cx, cz), transpose(wz)));
  const SymEig eig = sym_eig(matmul(t, transpose(t)));

  r.x_proj.w = Matrix(k, x.cols());
  r.z_proj.w = Matrix(k, z.cols());
  r.correlations.resize(k);
  const Matrix tt = transpose(t);
  for (std::size_t c = 0; c < k; ++c) {
    const double rho = std::sqrt(std::min(1.0, std::max(0.0, eig.values[c])));
    r.correlations[c] = rho;
    Vec u(t.rows());
    for (std::size_t d = 0; d < t.rows(); ++d) u[d] = eig.vectors(d, c);
    // a = Wx^T u
    for (std::size_t d = 0; d < x.cols(); ++d) {
      double acc = 0.0;
      for (std::size_t m = 0; m < t.rows(); ++m) acc += wx(m, d) * u[m];
      r.x_proj.w(c, d) = acc;
    }
    // b = Wz^T (T^T u) / rho; below numerical rank the pairing is arbitrary
    Vec v = matvec(tt, u);
    const double scale = rho > 1e-12 ? 1.0 / rho : 0.0;
    for (std::size_t d = 0; d < z.cols(); ++d) {
      double acc = 0.0;
      for (std::size_t m = 0; m < v.size(); ++m) acc += wz(m, d) * v[m];
      r.z_proj.w(c, d) = acc * scale;
    }
  }
  r.x_proj.spectrum = r.correlations;
  r.z_proj.spectrum = r.correlations;
  return r;
}

struct LogregGridResult {
  LogisticHead model{1};
  double best_c = std::numeric_limits<double>::infinity();
  double best_accuracy = 0.0;
  Vec c_grid;
  Vec test_accuracy;  // per grid entry; NaN when that fit aborted
};

inline const Vec& default_c_grid() {
  static const Vec grid{0.001, 0.01, 0.1, 1.0, std::numeric_limits<double>::infinity()};
  return grid;
}

// Logistic regression with an L2 penalty (1/C) * |w|^2 / 2 on the weights
// (bias exempt; C = inf means no penalty), trained with the same Nesterov
// update as everything else. Model selection picks the best TEST accuracy
// across the grid, replicating the benchmark protocol; that choice is
// optimistic and is labeled as such wherever results are written. The step
// size is capped at 0.5 * C for finite C so the ridge term cannot destabilize
// the update.
inline LogregGridResult fit_logreg_grid(const Matrix& xtr, const std::vector<int>& ytr,
                                        const Matrix& xte, const std::vector<int>& yte,
                                        const TrainConfig& cfg,
                                        const Vec& c_grid = default_c_grid()) {
  if (xtr.rows() == 0 || xtr.rows() != ytr.size())
    throw std::invalid_argument("fit_logreg_grid: bad training set");
  if (xte.rows() == 0 || xte.rows() != yte.size())
    throw std::invalid_argument("fit_logreg_grid: bad test set");
  if (xte.cols() != xtr.cols())
    throw std::invalid_argument("fit_logreg_grid: train/test dimension mismatch");
  if (c_grid.empty()) throw std::invalid_argument("fit_logreg_grid: empty grid");
  detail::check_config(cfg);

  LogregGridResult out;
  out.c_grid = c_grid;
  out.test_accuracy.assign(c_grid.size(), std::numeric_limits<double>::quiet_NaN());
  bool any = false;

  const auto all = detail::all_units(xtr.rows());
  for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
    const double c = c_grid[ci];
    if (!(c > 0.0)) throw std::invalid_argument("fit_logreg_grid: C values must be positive");
    const bool penalized = std::isfinite(c);
    const double lr = penalized ? std::min(cfg.learning_rate, 0.5 * c) : cfg.learning_rate;

    LogisticHead head(xtr.cols(), /*with_bias=*/true);  // zeros start: convex problem
    ParamBundle bundle;
    bundle.add(&head);
    OptimizerState st;
    Rng shuffle = Rng(cfg.seed).substream("shuffle", ci);

    try {
      detail::epoch_loop(
          xtr.rows(), cfg.epochs, cfg.batch_size, shuffle,
          [&](std::span<const std::size_t> batch) {
            nesterov_step(
                bundle, st,
                [&](Vec& g) {
                  double value = 0.0;
                  const double inv_b = 1.0 / static_cast<double>(batch.size());
                  Vec p(1);
                  for (std::size_t k : batch) {
                    head.forward(xtr.row(k), p.data());
                    const double pc = detail::clamp_prob(p[0]);
                    value -= inv_b * (ytr[k] == 1 ? std::log(pc) : std::log(1.0 - pc));
                    const double up =
                        inv_b * (pc - static_cast<double>(ytr[k])) / (pc * (1.0 - pc));
                    head.backward(xtr.row(k), &up, g.data(), nullptr);
                  }
                  if (penalized) {
                    const Vec& w = head.weights();
                    for (std::size_t d = 0; d < w.size(); ++d) {
                      value += 0.5 * w[d] * w[d] / c;
                      g[d] += w[d] / c;
                    }
                  }
                  return value;
                },
                lr, cfg.momentum);
          },
          [](std::size_t) {});
    } catch (const TrainAbort&) {
      continue;  // recorded as NaN accuracy; the grid survives single failures
    }

    std::size_t hits = 0;
    Vec p(1);
    for (std::size_t i = 0; i < xte.rows(); ++i) {
      head.forward(xte.row(i), p.data());
      hits += ((p[0] >= 0.5 ? 1 : 0) == yte[i]);
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(xte.rows());
    out.test_accuracy[ci] = acc;
    if (!any || acc > out.best_accuracy) {
      any = true;
      out.best_accuracy = acc;
      out.best_c = c;
      out.model = head;
    }
  }
  if (!any) throw TrainAbort("fit_logreg_grid: every grid member aborted");
  return out;
}

}  // namespace sideinfo
