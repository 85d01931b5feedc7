#pragma once
// Verification suites shared by the CLI and the test binaries: central
// finite-difference gradient checks for every loss and map family, and
// closed-form oracles for the statistical components (independent naive-loop
// loss recomputation, planted-signal SFA, CCA identities and the equivalence
// of decoupled multi-view-corr training with closed-form CCA).

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sideinfo/baselines.hpp"
#include "sideinfo/eig.hpp"
#include "sideinfo/matrix.hpp"
#include "sideinfo/model.hpp"
#include "sideinfo/patterns.hpp"
#include "sideinfo/rng.hpp"
#include "sideinfo/train.hpp"

namespace sideinfo {

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_err = 0.0;
  std::string detail;
};

namespace detail {

// Central finite differences over every parameter in the bundle; relative
// error uses max(1, |analytic|, |numeric|) as denominator.
inline double fd_max_rel_err(ParamBundle& bundle,
                             const std::function<LossResult()>& eval,
                             const std::function<Vec(const LossResult&)>& concat) {
  const Vec theta0 = bundle.get();
  const Vec g = concat(eval());
  if (g.size() != theta0.size())
    throw std::logic_error("fd_max_rel_err: gradient/parameter size mismatch");
  Vec theta = theta0;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta0.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta0[i]));
    theta[i] = theta0[i] + h;
    bundle.set(theta);
    const double fp = eval().value;
    theta[i] = theta0[i] - h;
    bundle.set(theta);
    const double fm = eval().value;
    theta[i] = theta0[i];
    const double fd = (fp - fm) / (2.0 * h);
    const double err =
        std::abs(g[i] - fd) / std::max({1.0, std::abs(g[i]), std::abs(fd)});
    worst = std::max(worst, err);
  }
  bundle.set(theta0);
  return worst;
}

inline std::unique_ptr<Map> make_phi(const std::string& family, std::size_t in,
                                     std::size_t out) {
  if (family == "linear") return std::make_unique<LinearMap>(out, in, false);
  if (family == "mlp") return std::make_unique<MlpStack>(std::vector<std::size_t>{in, 5, out});
  throw std::invalid_argument("unknown map family: " + family);
}

// Smallest |pre-activation| across the hidden layers for the given inputs.
// Finite differences step across the kink when this is tiny, so such draws
// are resampled.
inline double mlp_min_abs_pre(const Map& m, const Matrix& x) {
  if (m.kind() != MapKind::mlp) return 1.0;
  const auto& layers = static_cast<const MlpStack&>(m).layers();
  double lo = std::numeric_limits<double>::infinity();
  Vec cur, next;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    cur.assign(x.row(r), x.row(r) + x.cols());
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      next.assign(layers[l].out_dim(), 0.0);
      layers[l].forward(cur.data(), next.data());
      for (double v : next) lo = std::min(lo, std::abs(v));
      for (double& v : next) v = v > 0.0 ? v : 0.0;
      cur = next;
    }
  }
  return lo;
}

// In-place column standardization (mean 0, sample standard deviation 1).
inline void standardize_columns(Matrix& m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
    mean /= static_cast<double>(m.rows());
    double ss = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double d = m(i, j) - mean;
      ss += d * d;
    }
    const double sd = m.rows() > 1
                          ? std::sqrt(ss / static_cast<double>(m.rows() - 1))
                          : 1.0;
    const double scale = sd > 1e-12 ? sd : 1e-12;
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = (m(i, j) - mean) / scale;
  }
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

inline std::vector<int> random_labels(std::size_t n, Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.index(2));
  return y;
}

inline Vec concat_grads(const LossResult& r, bool phi, bool psi, bool beta) {
  Vec out;
  auto append = [&out](const Vec& v) { out.insert(out.end(), v.begin(), v.end()); };
  if (phi) append(r.phi_grad);
  if (psi) append(r.psi_grad);
  if (beta) append(r.beta_grad);
  return out;
}

}  // namespace detail

// Every loss x map-family combination, checked against central finite
// differences on `draws` independent random problems. `must_contain` filters
// combinations by name substring (all entries must match).
inline std::vector<CheckResult> gradcheck_all(
    std::uint64_t seed, double tol = 1e-5, std::size_t draws = 20,
    const std::vector<std::string>& must_contain = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("gradcheck_all: tolerance must be positive");
  if (draws == 0) throw std::invalid_argument("gradcheck_all: need at least one draw");

  const std::size_t in = 4, rep = 3, zdim = 2, batch = 6;
  const std::vector<std::string> families{"linear", "mlp"};
  std::vector<CheckResult> results;

  struct Combo {
    std::string name;
    std::function<double(Rng&)> run;  // one draw, returns max rel err
  };
  std::vector<Combo> combos;

  auto idx_all = [](std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
  };

  for (const std::string& fam : families) {
    combos.push_back(
        {"supervised/" + fam, [=](Rng& rng) {
           auto phi = detail::make_phi(fam, in, rep);
           LogisticHead psi(rep, true);
           Rng prng = rng.substream("params");
           phi->init(InitScheme::scaled_uniform, prng);
           psi.init(InitScheme::scaled_uniform, prng);
           const Matrix x = detail::random_matrix(batch, in, rng);
           if (detail::mlp_min_abs_pre(*phi, x) < 1e-3) return -1.0;
           const auto y = detail::random_labels(batch, rng);
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(phi.get());
           b.add(&psi);
           return detail::fd_max_rel_err(
               b, [&] { return loss_supervised(psi, *phi, x, y, idx); },
               [](const LossResult& r) { return detail::concat_grads(r, true, true, false); });
         }});

    combos.push_back(
        {"direct/" + fam, [=](Rng& rng) {
           auto phi = detail::make_phi(fam, in, rep);
           Rng prng = rng.substream("params");
           phi->init(InitScheme::scaled_uniform, prng);
           const Matrix x = detail::random_matrix(batch, in, rng);
           const Matrix z = detail::random_matrix(batch, rep, rng);
           if (detail::mlp_min_abs_pre(*phi, x) < 1e-3) return -1.0;
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(phi.get());
           return detail::fd_max_rel_err(
               b, [&] { return loss_direct(*phi, x, z, idx); },
               [](const LossResult& r) { return detail::concat_grads(r, true, false, false); });
         }});

    combos.push_back(
        {"multi-task/" + fam, [=](Rng& rng) {
           auto phi = detail::make_phi(fam, in, rep);
           auto beta = detail::make_phi(fam, rep, zdim);
           Rng prng = rng.substream("params");
           phi->init(InitScheme::scaled_uniform, prng);
           beta->init(InitScheme::scaled_uniform, prng);
           const Matrix x = detail::random_matrix(batch, in, rng);
           const Matrix z = detail::random_matrix(batch, zdim, rng);
           if (detail::mlp_min_abs_pre(*phi, x) < 1e-3) return -1.0;
           Matrix s_rows(batch, rep);
           for (std::size_t r = 0; r < batch; ++r) phi->forward(x.row(r), s_rows.row(r));
           if (detail::mlp_min_abs_pre(*beta, s_rows) < 1e-3) return -1.0;
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(phi.get());
           b.add(beta.get());
           return detail::fd_max_rel_err(
               b, [&] { return loss_multi_task(*beta, *phi, x, z, idx); },
               [](const LossResult& r) { return detail::concat_grads(r, true, false, true); });
         }});

    for (double gamma : {0.0, 0.7}) {
      std::ostringstream name;
      name << "multi-view-corr-g" << (gamma > 0.0 ? "1" : "0") << "/" << fam;
      combos.push_back(
          {name.str(), [=](Rng& rng) {
             auto phi = detail::make_phi(fam, in, rep);
             auto beta = detail::make_phi(fam, zdim, rep);
             Rng prng = rng.substream("params");
             phi->init(InitScheme::scaled_uniform, prng);
             beta->init(InitScheme::scaled_uniform, prng);
             const Matrix x = detail::random_matrix(batch, in, rng);
             const Matrix z = detail::random_matrix(batch, zdim, rng);
             if (detail::mlp_min_abs_pre(*phi, x) < 1e-3 ||
                 detail::mlp_min_abs_pre(*beta, z) < 1e-3)
               return -1.0;
             const auto idx = idx_all(batch);
             ParamBundle b;
             b.add(phi.get());
             b.add(beta.get());
             return detail::fd_max_rel_err(
                 b, [&] { return loss_multi_view_corr(*beta, *phi, x, z, idx, gamma); },
                 [](const LossResult& r) {
                   return detail::concat_grads(r, true, false, true);
                 });
           }});
    }

    combos.push_back(
        {"multi-view-pred/" + fam, [=](Rng& rng) {
           auto beta = detail::make_phi(fam, zdim, rep);
           LogisticHead psi(rep, true);
           Rng prng = rng.substream("params");
           beta->init(InitScheme::scaled_uniform, prng);
           psi.init(InitScheme::scaled_uniform, prng);
           const Matrix z = detail::random_matrix(batch, zdim, rng);
           if (detail::mlp_min_abs_pre(*beta, z) < 1e-3) return -1.0;
           const auto y = detail::random_labels(batch, rng);
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(&psi);
           b.add(beta.get());
           return detail::fd_max_rel_err(
               b, [&] { return loss_multi_view_pred(psi, *beta, z, y, idx); },
               [](const LossResult& r) { return detail::concat_grads(r, false, true, true); });
         }});

    for (SigmaKind sigma :
         {SigmaKind::margin, SigmaKind::exp_neg_dist, SigmaKind::gaussian}) {
      const char* sname = sigma == SigmaKind::margin         ? "margin"
                          : sigma == SigmaKind::exp_neg_dist ? "expdist"
                                                             : "gaussian";
      combos.push_back(
          {std::string("pairwise-sim-") + sname + "/" + fam, [=](Rng& rng) {
             auto phi = detail::make_phi(fam, in, rep);
             Rng prng = rng.substream("params");
             phi->init(InitScheme::scaled_uniform, prng);
             const Matrix x = detail::random_matrix(batch, in, rng);
             if (detail::mlp_min_abs_pre(*phi, x) < 1e-3) return -1.0;
             const std::vector<PairIndex> pairs{
                 {0, 1, true}, {2, 3, true}, {0, 2, false}, {4, 5, false}};
             // Kink guards: the margin hinge switches at d^2 == margin, the
             // exp(-d) form at d == 0.
             Vec si(rep), sj(rep);
             for (const PairIndex& p : pairs) {
               if (p.similar) continue;
               phi->forward(x.row(p.i), si.data());
               phi->forward(x.row(p.j), sj.data());
               const double d2 = sq_dist(si.data(), sj.data(), rep);
               if (sigma == SigmaKind::margin && std::abs(d2 - 1.0) < 1e-3) return -1.0;
               if (sigma == SigmaKind::exp_neg_dist && d2 < 1e-4) return -1.0;
             }
             const auto idx = idx_all(pairs.size());
             ParamBundle b;
             b.add(phi.get());
             return detail::fd_max_rel_err(
                 b, [&] { return loss_pairwise(*phi, x, pairs, idx, sigma, 1.0); },
                 [](const LossResult& r) {
                   return detail::concat_grads(r, true, false, false);
                 });
           }});
    }

    combos.push_back(
        {"transform-fixed/" + fam, [=](Rng& rng) {
           auto phi = detail::make_phi(fam, in, rep);
           Rng prng = rng.substream("params");
           phi->init(InitScheme::scaled_uniform, prng);
           const Matrix x = detail::random_matrix(batch + 1, in, rng);
           const Matrix z = detail::random_matrix(batch, rep, rng);
           if (detail::mlp_min_abs_pre(*phi, x) < 1e-3) return -1.0;
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(phi.get());
           return detail::fd_max_rel_err(
               b, [&] { return loss_transform_fixed(*phi, x, z, idx); },
               [](const LossResult& r) { return detail::concat_grads(r, true, false, false); });
         }});

    combos.push_back(
        {"transform-pairs-discrete/" + fam, [=](Rng& rng) {
           auto phi = detail::make_phi(fam, in, rep);
           Rng prng = rng.substream("params");
           phi->init(InitScheme::scaled_uniform, prng);
           const Matrix x = detail::random_matrix(batch + 1, in, rng);
           Matrix z(batch, 1);
           for (std::size_t t = 0; t < batch; ++t)
             z(t, 0) = static_cast<double>(rng.index(2));  // coarse values force matches
           if (detail::mlp_min_abs_pre(*phi, x) < 1e-3) return -1.0;
           bool any_match = false;
           for (std::size_t a = 0; a < batch && !any_match; ++a)
             for (std::size_t c = a + 1; c < batch; ++c)
               if (z(a, 0) == z(c, 0)) {
                 any_match = true;
                 break;
               }
           if (!any_match) return -1.0;
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(phi.get());
           return detail::fd_max_rel_err(
               b,
               [&] {
                 return loss_transform_pairs(*phi, x, z, idx, false, SigmaKind::gaussian, 1.0);
               },
               [](const LossResult& r) { return detail::concat_grads(r, true, false, false); });
         }});

    combos.push_back(
        {"transform-pairs-continuous/" + fam, [=](Rng& rng) {
           auto phi = detail::make_phi(fam, in, rep);
           Rng prng = rng.substream("params");
           phi->init(InitScheme::scaled_uniform, prng);
           const Matrix x = detail::random_matrix(batch + 1, in, rng);
           const Matrix z = detail::random_matrix(batch, 1, rng);
           if (detail::mlp_min_abs_pre(*phi, x) < 1e-3) return -1.0;
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(phi.get());
           return detail::fd_max_rel_err(
               b,
               [&] {
                 return loss_transform_pairs(*phi, x, z, idx, true, SigmaKind::gaussian, 1.0);
               },
               [](const LossResult& r) { return detail::concat_grads(r, true, false, false); });
         }});

    combos.push_back(
        {"irrelevance/" + fam, [=](Rng& rng) {
           // The orthogonality penalty is defined on linear psi/beta weight
           // rows; only phi's family varies.
           ModelStack stack;
           stack.phi = detail::make_phi(fam, in, rep);
           stack.psi = std::make_unique<LogisticHead>(rep, true);
           stack.beta = std::make_unique<LinearMap>(zdim, rep, false);
           Rng prng = rng.substream("params");
           stack.init(InitScheme::scaled_uniform, prng);
           SideData data;
           data.x = detail::random_matrix(batch, in, rng);
           data.z = detail::random_matrix(batch, zdim, rng);
           if (detail::mlp_min_abs_pre(*stack.phi, data.x) < 1e-3) return -1.0;
           PatternSpec spec;
           spec.kind = PatternKind::irrelevance;
           const auto idx = idx_all(batch);
           ParamBundle b;
           b.add(stack.phi.get());
           b.add(stack.psi.get());
           b.add(stack.beta.get());
           return detail::fd_max_rel_err(
               b, [&] { return side_objective(stack, data, spec, idx); },
               [](const LossResult& r) { return detail::concat_grads(r, true, true, true); });
         }});
  }

  for (const Combo& combo : combos) {
    bool wanted = true;
    for (const std::string& needle : must_contain)
      if (!needle.empty() && combo.name.find(needle) == std::string::npos) wanted = false;
    if (!wanted) continue;

    CheckResult res;
    res.name = combo.name;
    Rng combo_rng = Rng(seed).substream(combo.name);
    std::size_t done = 0, attempts = 0;
    while (done < draws) {
      if (++attempts > draws * 50)
        throw std::runtime_error("gradcheck_all: resample guard stuck on " + combo.name);
      Rng draw_rng = combo_rng.substream("draw", attempts);
      const double err = combo.run(draw_rng);
      if (err < 0.0) continue;  // draw hit a kink guard, resample
      res.max_err = std::max(res.max_err, err);
      ++done;
    }
    res.pass = res.max_err <= tol;
    std::ostringstream d;
    d << "max rel err " << res.max_err << " over " << draws << " draws (tol " << tol << ")";
    res.detail = d.str();
    results.push_back(std::move(res));
  }
  if (results.empty()) throw std::invalid_argument("gradcheck_all: filter matched nothing");
  return results;
}

namespace detail {

// Naive reference values, written as direct transcriptions of the loss
// definitions with plain loops; shared only the forward passes.
inline double naive_pairwise_value(const Map& phi, const Matrix& x,
                                   const std::vector<PairIndex>& pairs, SigmaKind sigma,
                                   double margin) {
  double total = 0.0;
  for (const PairIndex& p : pairs) {
    Vec a(phi.out_dim()), b(phi.out_dim());
    phi.forward(x.row(p.i), a.data());
    phi.forward(x.row(p.j), b.data());
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d2 += std::pow(a[k] - b[k], 2.0);
    if (p.similar) {
      total += d2;
    } else if (sigma == SigmaKind::margin) {
      total += std::max(0.0, margin - d2);
    } else if (sigma == SigmaKind::exp_neg_dist) {
      total += std::exp(-std::sqrt(d2));
    } else {
      total += std::exp(-d2);
    }
  }
  return total / static_cast<double>(pairs.size());
}

inline double naive_transform_fixed_value(const Map& phi, const Matrix& x,
                                          const Matrix& z) {
  double total = 0.0;
  for (std::size_t t = 0; t < z.rows(); ++t) {
    Vec a(phi.out_dim()), b(phi.out_dim());
    phi.forward(x.row(t), a.data());
    phi.forward(x.row(t + 1), b.data());
    for (std::size_t k = 0; k < a.size(); ++k)
      total += std::pow(b[k] - a[k] - z(t, k), 2.0);
  }
  return total / static_cast<double>(z.rows());
}

inline double naive_transform_pairs_value(const Map& phi, const Matrix& x,
                                          const Matrix& z, bool continuous,
                                          SigmaKind sigma, double margin,
                                          bool* degenerate) {
  const std::size_t n = z.rows();
  std::vector<Vec> steps(n, Vec(phi.out_dim()));
  for (std::size_t t = 0; t < n; ++t) {
    Vec a(phi.out_dim()), b(phi.out_dim());
    phi.forward(x.row(t), a.data());
    phi.forward(x.row(t + 1), b.data());
    for (std::size_t k = 0; k < a.size(); ++k) steps[t][k] = b[k] - a[k];
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = a + 1; c < n; ++c) {
      double step_d2 = 0.0;
      for (std::size_t k = 0; k < steps[a].size(); ++k)
        step_d2 += std::pow(steps[a][k] - steps[c][k], 2.0);
      if (continuous) {
        double zd2 = 0.0;
        for (std::size_t k = 0; k < z.cols(); ++k) zd2 += std::pow(z(a, k) - z(c, k), 2.0);
        const double zd = std::sqrt(zd2);
        double w = 0.0;
        if (sigma == SigmaKind::margin)
          w = std::max(0.0, margin - zd * zd);
        else if (sigma == SigmaKind::exp_neg_dist)
          w = std::exp(-zd);
        else
          w = std::exp(-zd * zd);
        total += w * step_d2;
        ++count;
      } else {
        bool equal = true;
        for (std::size_t k = 0; k < z.cols(); ++k)
          if (z(a, k) != z(c, k)) equal = false;
        if (equal) {
          total += step_d2;
          ++count;
        }
      }
    }
  if (continuous) count = n * (n - 1) / 2;
  if (degenerate) *degenerate = count == 0;
  if (count == 0) return 0.0;
  return total / static_cast<double>(count);
}

inline double pearson(const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: bad inputs");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(a.size());
  double cab = 0.0, caa = 0.0, cbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cab += (a[i] - ma) * (b[i] - mb);
    caa += (a[i] - ma) * (a[i] - ma);
    cbb += (b[i] - mb) * (b[i] - mb);
  }
  if (caa == 0.0 || cbb == 0.0) throw std::invalid_argument("pearson: constant input");
  return cab / std::sqrt(caa * cbb);
}

}  // namespace detail

// (a) of the oracle suite: optimized losses equal a naive transcription of
// their definitions on random 6-pair batches.
inline CheckResult oracle_naive_loop(std::uint64_t seed, double tol = 1e-12) {
  if (!(tol > 0.0))
    throw std::invalid_argument("oracle_naive_loop: tolerance must be positive");
  CheckResult res;
  res.name = "naive-loop";
  Rng rng = Rng(seed).substream("naive-loop");
  const std::size_t in = 4, rep = 3, trials = 25;
  double worst = 0.0;

  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng trng = rng.substream("trial", trial);
    LinearMap lphi(rep, in, false);
    MlpStack mphi({in, 5, rep});
    Rng prng = trng.substream("params");
    lphi.init(InitScheme::scaled_uniform, prng);
    mphi.init(InitScheme::scaled_uniform, prng);
    const std::vector<const Map*> phis{&lphi, &mphi};

    const Matrix x = detail::random_matrix(7, in, trng);
    const std::vector<PairIndex> pairs{{0, 1, true},  {2, 3, true},  {4, 5, true},
                                       {0, 2, false}, {1, 4, false}, {3, 6, false}};
    std::vector<std::size_t> pidx(pairs.size());
    for (std::size_t i = 0; i < pidx.size(); ++i) pidx[i] = i;
    const Matrix zfix = detail::random_matrix(6, rep, trng);
    Matrix zdisc(6, 1);
    for (std::size_t t = 0; t < 6; ++t) zdisc(t, 0) = static_cast<double>(trng.index(2));
    const Matrix zcont = detail::random_matrix(6, 1, trng);
    std::vector<std::size_t> tidx{0, 1, 2, 3, 4, 5};

    for (const Map* phi : phis) {
      for (SigmaKind sigma :
           {SigmaKind::margin, SigmaKind::exp_neg_dist, SigmaKind::gaussian}) {
        const double got = loss_pairwise(*phi, x, pairs, pidx, sigma, 1.0).value;
        const double want = detail::naive_pairwise_value(*phi, x, pairs, sigma, 1.0);
        worst = std::max(worst, std::abs(got - want));
      }
      {
        const double got = loss_transform_fixed(*phi, x, zfix, tidx).value;
        const double want = detail::naive_transform_fixed_value(*phi, x, zfix);
        worst = std::max(worst, std::abs(got - want));
      }
      {
        const LossResult got =
            loss_transform_pairs(*phi, x, zdisc, tidx, false, SigmaKind::gaussian, 1.0);
        bool want_degenerate = false;
        const double want = detail::naive_transform_pairs_value(
            *phi, x, zdisc, false, SigmaKind::gaussian, 1.0, &want_degenerate);
        worst = std::max(worst, std::abs(got.value - want));
        if (got.degenerate != want_degenerate) worst = std::max(worst, 1.0);
      }
      for (SigmaKind sigma :
           {SigmaKind::margin, SigmaKind::exp_neg_dist, SigmaKind::gaussian}) {
        const double got =
            loss_transform_pairs(*phi, x, zcont, tidx, true, sigma, 1.0).value;
        const double want = detail::naive_transform_pairs_value(*phi, x, zcont, true,
                                                                sigma, 1.0, nullptr);
        worst = std::max(worst, std::abs(got - want));
      }
    }
  }

  res.max_err = worst;
  res.pass = worst <= tol;
  std::ostringstream d;
  d << "max |optimized - naive| " << worst << " (tol " << tol << ")";
  res.detail = d.str();
  return res;
}

// (b): a slow sinusoid mixed among fast white dimensions must come back as
// the slowest component.
inline CheckResult oracle_sfa(std::uint64_t seed) {
  CheckResult res;
  res.name = "sfa-planted";
  Rng rng = Rng(seed).substream("sfa-planted");
  const std::size_t T = 2000, d = 10;
  Vec slow(T);
  for (std::size_t t = 0; t < T; ++t)
    slow[t] = std::sin(2.0 * 3.14159265358979323846 * 3.0 * static_cast<double>(t) /
                       static_cast<double>(T));
  Matrix latent(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    latent(t, 0) = slow[t];
    for (std::size_t j = 1; j < d; ++j) latent(t, j) = rng.normal();
  }
  const Matrix rot = random_rotation(d, rng);
  Matrix x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const Vec mixed = matvec(rot, Vec(latent.row(t), latent.row(t) + d));
    for (std::size_t j = 0; j < d; ++j) x(t, j) = mixed[j];
  }
  const LinearProjector sfa = fit_sfa(x, 1);
  const Matrix proj = sfa.project(x);
  Vec rec(T);
  for (std::size_t t = 0; t < T; ++t) rec[t] = proj(t, 0);
  const double rho = std::abs(detail::pearson(rec, slow));
  res.max_err = 1.0 - rho;
  res.pass = rho >= 0.99;
  std::ostringstream det;
  det << "|corr(recovered, planted)| = " << rho << " (need >= 0.99)";
  res.detail = det.str();
  return res;
}

// (c) + (d): closed-form CCA identities, and agreement of decoupled
// multi-view-corr training with the closed form on planted two-view data.
inline CheckResult oracle_cca(std::uint64_t seed) {
  CheckResult res;
  res.name = "cca-alignment";
  Rng rng = Rng(seed).substream("cca-alignment");
  std::ostringstream det;
  bool pass = true;
  double worst = 0.0;

  {  // identical views: top correlation is exactly 1
    const Matrix x = detail::random_matrix(500, 4, rng);
    const CcaResult cca = fit_cca(x, x, 4);
    const double err = std::abs(cca.correlations[0] - 1.0);
    worst = std::max(worst, err);
    pass = pass && err <= 1e-8;
    det << "identical views |rho0 - 1| = " << err << "; ";
  }

  {  // independent views: no spurious correlation
    const Matrix x = detail::random_matrix(2000, 3, rng);
    const Matrix z = detail::random_matrix(2000, 3, rng);
    const CcaResult cca = fit_cca(x, z, 1);
    pass = pass && cca.correlations[0] <= 0.15;
    det << "independent views rho0 = " << cca.correlations[0] << "; ";
  }

  // Planted latent shared by both views. Loading vectors are normalized to a
  // fixed signal strength so the top correlation is stable across seeds, and
  // both views are column-standardized so that SGD sees well-scaled inputs.
  const std::size_t T = 2000, dx = 6, dz = 3;
  Vec g(T);
  Matrix x(T, dx), z(T, dz);
  Vec ax(dx), az(dz);
  for (double& v : ax) v = rng.normal();
  for (double& v : az) v = rng.normal();
  const double nx = norm(ax), nz = norm(az);
  for (double& v : ax) v *= std::sqrt(static_cast<double>(dx)) / nx;
  for (double& v : az) v *= std::sqrt(static_cast<double>(dz)) / nz;
  for (std::size_t t = 0; t < T; ++t) {
    g[t] = rng.normal();
    for (std::size_t j = 0; j < dx; ++j) x(t, j) = ax[j] * g[t] + 0.5 * rng.normal();
    for (std::size_t j = 0; j < dz; ++j) z(t, j) = az[j] * g[t] + 0.5 * rng.normal();
  }
  detail::standardize_columns(x);
  detail::standardize_columns(z);
  const CcaResult cca = fit_cca(x, z, 1);
  pass = pass && cca.correlations[0] >= 0.9;
  det << "planted rho0 = " << cca.correlations[0] << "; ";

  {  // decoupled multi-view-corr training lands on the same directions
    ModelStack stack;
    stack.phi = std::make_unique<LinearMap>(1, dx, false);
    stack.psi = std::make_unique<LogisticHead>(1, true);
    stack.beta = std::make_unique<LinearMap>(1, dz, false);
    Rng init_rng = rng.substream("init");
    stack.init(InitScheme::scaled_uniform, init_rng);
    {  // start well inside the stable basin of the variance penalty
      ParamBundle pb;
      pb.add(stack.phi.get());
      pb.add(stack.beta.get());
      Vec p = pb.get();
      for (double& v : p) v *= 0.2;
      pb.set(p);
    }

    SideData data;
    data.x = x;
    data.z = z;
    data.y.resize(T);
    for (std::size_t t = 0; t < T; ++t) data.y[t] = g[t] > 0.0 ? 0 : 1;

    PatternSpec spec;
    spec.kind = PatternKind::multi_view_corr;
    spec.gamma = 1.0;
    TrainConfig tc;
    tc.learning_rate = 0.01;
    tc.epochs = 150;
    tc.batch_size = 100;
    tc.seed = rng.substream("trainer").seed();
    train_decoupled(stack, data, spec, tc);

    const Vec& wphi = static_cast<const LinearMap&>(*stack.phi).weights().row_vec(0);
    const Vec wx(cca.x_proj.w.row(0), cca.x_proj.w.row(0) + dx);
    const double cos_phi = std::abs(cosine(wphi, wx));
    const Vec& wbeta = static_cast<const LinearMap&>(*stack.beta).weights().row_vec(0);
    const Vec wz(cca.z_proj.w.row(0), cca.z_proj.w.row(0) + dz);
    const double cos_beta = std::abs(cosine(wbeta, wz));
    worst = std::max(worst, 1.0 - std::min(cos_phi, cos_beta));
    pass = pass && cos_phi >= 0.99 && cos_beta >= 0.99;
    det << "trained-vs-closed-form |cos| = (" << cos_phi << ", " << cos_beta
        << ") (need >= 0.99)";
  }

  res.pass = pass;
  res.max_err = worst;
  res.detail = det.str();
  return res;
}

// PCA sanity: a dominant planted direction is the top component.
inline CheckResult oracle_pca(std::uint64_t seed) {
  CheckResult res;
  res.name = "pca-rank1";
  Rng rng = Rng(seed).substream("pca-rank1");
  const std::size_t T = 400, d = 5;
  Vec v(d);
  for (double& e : v) e = rng.normal();
  const double vn = norm(v);
  for (double& e : v) e /= vn;
  Matrix x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const double c = rng.normal() * 3.0;
    for (std::size_t j = 0; j < d; ++j) x(t, j) = c * v[j] + 0.05 * rng.normal();
  }
  const LinearProjector pca = fit_pca(x, 1);
  const Vec w(pca.w.row(0), pca.w.row(0) + d);
  const double cos = std::abs(cosine(w, v));
  res.max_err = 1.0 - cos;
  res.pass = cos >= 0.999;
  std::ostringstream det;
  det << "|cos(top component, planted axis)| = " << cos << " (need >= 0.999)";
  res.detail = det.str();
  return res;
}

// All oracle suites, optionally filtered by suite name.
inline std::vector<CheckResult> oracle_all(std::uint64_t seed,
                                           const std::string& suite = "",
                                           double naive_tol = 1e-12) {
  std::vector<CheckResult> out;
  if (suite.empty() || suite == "naive-loop")
    out.push_back(oracle_naive_loop(seed, naive_tol));
  if (suite.empty() || suite == "sfa") out.push_back(oracle_sfa(seed));
  if (suite.empty() || suite == "cca") out.push_back(oracle_cca(seed));
  if (suite.empty() || suite == "pca") out.push_back(oracle_pca(seed));
  if (out.empty())
    throw std::invalid_argument("unknown oracle suite: '" + suite +
                                "' (naive-loop, sfa, cca, pca)");
  return out;
}

}  // namespace sideinfo
