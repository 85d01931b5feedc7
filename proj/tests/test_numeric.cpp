#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "sideinfo/eig.hpp"
#include "sideinfo/matrix.hpp"
#include "sideinfo/rng.hpp"

using namespace sideinfo;

namespace {

Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = rng.normal();
  return a;
}

}  // namespace

TEST_CASE("rng streams are reproducible and substreams are independent") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  // Forking is a function of (seed, label, index), not of draw position.
  Rng parent(7);
  Rng s1 = parent.substream("data");
  parent.normal_vec(50);
  Rng s2 = parent.substream("data");
  REQUIRE(s1.next_u64() == s2.next_u64());

  REQUIRE(Rng(7).substream("data").next_u64() != Rng(7).substream("init").next_u64());
  REQUIRE(Rng(7).substream("data", 0).next_u64() != Rng(7).substream("data", 1).next_u64());
  REQUIRE(Rng(7).next_u64() != Rng(8).next_u64());
}

TEST_CASE("uniform lies strictly inside (0,1)") {
  Rng rng(99);
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("standard normal moments at seed 42") {
  Rng rng(42);
  const std::size_t n = 100000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.02);
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(5), b(5);
  a.shuffle(v);
  b.shuffle(w);
  REQUIRE(v == w);
  const std::set<int> uniq(v.begin(), v.end());
  REQUIRE(uniq.size() == 100);
  REQUIRE(v != std::vector<int>(uniq.begin(), uniq.end()));
}

TEST_CASE("sym_eig matches the 2x2 closed form") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a = random_symmetric(2, rng);
    const SymEig e = sym_eig(a);
    const double tr = a(0, 0) + a(1, 1);
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double disc = std::sqrt(tr * tr - 4.0 * det);
    REQUIRE(e.values[0] == Catch::Approx((tr + disc) / 2.0).margin(1e-12));
    REQUIRE(e.values[1] == Catch::Approx((tr - disc) / 2.0).margin(1e-12));
  }
}

TEST_CASE("sym_eig on a diagonal matrix returns sorted axes") {
  Matrix a(3, 3);
  a(0, 0) = -1.0;
  a(1, 1) = 5.0;
  a(2, 2) = 2.0;
  const SymEig e = sym_eig(a);
  REQUIRE(e.values[0] == Catch::Approx(5.0));
  REQUIRE(e.values[1] == Catch::Approx(2.0));
  REQUIRE(e.values[2] == Catch::Approx(-1.0));
  // Sign convention: dominant entry positive.
  REQUIRE(e.vectors(1, 0) == Catch::Approx(1.0));
  REQUIRE(e.vectors(2, 1) == Catch::Approx(1.0));
  REQUIRE(e.vectors(0, 2) == Catch::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs, stays orthonormal, and solves the eigenproblem") {
  Rng rng(17);
  for (std::size_t n : {2u, 7u, 33u, 64u}) {
    Matrix a = random_symmetric(n, rng);
    const SymEig e = sym_eig(a);
    const double scale = frobenius(a);

    for (std::size_t k = 0; k + 1 < n; ++k) REQUIRE(e.values[k] >= e.values[k + 1]);

    // V diag(values) V^T == A
    Matrix rec(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          acc += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
        rec(i, j) = acc;
      }
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) err = std::max(err, std::abs(rec(i, j) - a(i, j)));
    REQUIRE(err <= 1e-7 * std::max(1.0, scale));

    // V^T V == I
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += e.vectors(i, p) * e.vectors(i, q);
        REQUIRE(std::abs(acc - (p == q ? 1.0 : 0.0)) < 1e-9);
      }

    // A v_k == values[k] v_k and sign convention
    for (std::size_t k = 0; k < n; ++k) {
      Vec v(n);
      double big = 0.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = e.vectors(i, k);
        if (std::abs(v[i]) > big) {
          big = std::abs(v[i]);
          arg = i;
        }
      }
      REQUIRE(v[arg] > 0.0);
      const Vec av = matvec(a, v);
      for (std::size_t i = 0; i < n; ++i)
        REQUIRE(std::abs(av[i] - e.values[k] * v[i]) <= 1e-8 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("sym_eig rejects bad input") {
  REQUIRE_THROWS_AS(sym_eig(Matrix(2, 3)), std::invalid_argument);
  REQUIRE_THROWS_AS(sym_eig(Matrix(0, 0)), std::invalid_argument);
  Matrix asym(2, 2);
  asym(0, 1) = 1.0;
  asym(1, 0) = 0.5;
  REQUIRE_THROWS_AS(sym_eig(asym), std::invalid_argument);
  REQUIRE_THROWS_AS(sym_eig(Matrix(kSymEigMaxDim + 1, kSymEigMaxDim + 1)),
                    std::invalid_argument);
  REQUIRE_NOTHROW(sym_eig(Matrix::identity(1)));
}

TEST_CASE("random_rotation is orthogonal and norm preserving") {
  for (std::size_t dim : {3u, 50u}) {
    Rng rng(7);
    const Matrix r = random_rotation(dim, rng);
    const Matrix rtr = matmul(transpose(r), r);
    double err = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        err = std::max(err, std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)));
    REQUIRE(err < 1e-10);

    Rng vec_rng(21);
    for (int trial = 0; trial < 5; ++trial) {
      const Vec x = vec_rng.normal_vec(dim);
      const Vec rx = matvec(r, x);
      REQUIRE(std::abs(norm(rx) - norm(x)) < 1e-10);
    }
  }
  Rng rng(3);
  REQUIRE_THROWS_AS(random_rotation(0, rng), std::invalid_argument);

  Rng r1(13), r2(13);
  const Matrix a = random_rotation(8, r1), b = random_rotation(8, r2);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) REQUIRE(a(i, j) == b(i, j));
}
