#pragma once

// Symmetric eigendecomposition (cyclic Jacobi) and Haar-distributed random
// orthogonal matrices (Gram-Schmidt QR of a Gaussian draw). Both are small-
// matrix routines; sym_eig rejects inputs above kSymEigMaxDim.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideinfo/matrix.hpp"
#include "sideinfo/rng.hpp"

namespace sideinfo {

inline constexpr std::size_t kSymEigMaxDim = 256;

struct SymEig {
  Vec values;      // descending
  Matrix vectors;  // column k pairs with values[k]; largest-magnitude entry positive
};

// Cyclic Jacobi with rotation threshold; converges when every off-diagonal
// entry falls below 1e-14 * max|A| (or exactly zero). Requires a symmetric
// input: max |a_ij - a_ji| <= 1e-9 * max(1, max|a|).
inline SymEig sym_eig(const Matrix& a_in) {
  const std::size_t n = a_in.rows();
  if (n == 0 || a_in.cols() != n)
    throw std::invalid_argument("sym_eig: matrix must be square and non-empty");
  if (n > kSymEigMaxDim)
    throw std::invalid_argument("sym_eig: dimension " + std::to_string(n) +
                                " exceeds cap " + std::to_string(kSymEigMaxDim));

  double amax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) amax = std::max(amax, std::abs(a_in(i, j)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a_in(i, j) - a_in(j, i)) > 1e-9 * std::max(1.0, amax))
        throw std::invalid_argument("sym_eig: input not symmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");

  Matrix a = a_in;
  // Symmetrize exactly so rounding asymmetries cannot bias the sweep.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = m;
    }

  Matrix v = Matrix::identity(n);
  const double tol = 1e-14 * std::max(1e-300, amax);
  const int max_sweeps = 100;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymEig out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.values[k] = a(src, src);
    // Sign convention: the first entry of largest magnitude is made positive.
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = std::abs(v(i, src));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    const double flip = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = flip * v(i, src);
  }
  return out;
}

// Haar-distributed orthogonal matrix: fill with standard normals (row-major
// draw order), then orthonormalize columns by modified Gram-Schmidt with one
// re-orthogonalization pass. Normalization keeps the implicit triangular
// factor's diagonal positive, which is what makes the law Haar.
inline Matrix random_rotation(std::size_t dim, Rng& rng) {
  if (dim == 0) throw std::invalid_argument("random_rotation: dim must be positive");
  Matrix g(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) g(i, j) = rng.normal();

  for (std::size_t j = 0; j < dim; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < dim; ++i) proj += g(i, k) * g(i, j);
        for (std::size_t i = 0; i < dim; ++i) g(i, j) -= proj * g(i, k);
      }
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) nrm += g(i, j) * g(i, j);
    nrm = std::sqrt(nrm);
    if (!(nrm > 1e-12))
      throw std::runtime_error("random_rotation: degenerate Gaussian draw");
    for (std::size_t i = 0; i < dim; ++i) g(i, j) /= nrm;
  }
  return g;
}

}  // namespace sideinfo
