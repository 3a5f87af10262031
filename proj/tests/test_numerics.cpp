#include <doctest.h>

#include "gpelab/numerics.hpp"
#include "oracles.hpp"

using namespace gpelab;

namespace {

RealCsr random_spd(std::mt19937_64& g, std::size_t n) {
  // Diagonally dominant symmetric matrix with a sparse band.
  std::vector<RealCsr::Entry> trip;
  for (std::size_t i = 0; i < n; ++i) {
    trip.push_back({i, i, 4.0 + oracles::uniform(g, 0.0, 1.0)});
    if (i + 1 < n) {
      const double v = oracles::uniform(g, -1.0, 1.0);
      trip.push_back({i, i + 1, v});
      trip.push_back({i + 1, i, v});
    }
  }
  return RealCsr::from_triplets(std::move(trip), n, n, true);
}

oracles::Dense<double> to_dense(const RealCsr& A) {
  auto D = oracles::zeros<double>(A.n_rows(), A.n_cols());
  auto off = A.row_offsets();
  auto cols = A.col_indices();
  auto vals = A.values();
  for (std::size_t i = 0; i < A.n_rows(); ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) D[i][cols[p]] = vals[p];
  return D;
}

} // namespace

TEST_CASE("sparse_from_triplets: identity, duplicates, empty") {
  const RealCsr I = RealCsr::from_triplets({{0, 0, 1.0}, {1, 1, 1.0}}, 2, 2);
  CHECK(I.nnz() == 2);
  CHECK(I.coeff(0, 0) == 1.0);
  CHECK(I.coeff(1, 1) == 1.0);
  CHECK(I.coeff(0, 1) == 0.0);

  const RealCsr D = RealCsr::from_triplets({{0, 0, 1.0}, {0, 0, 2.0}}, 1, 1);
  CHECK(D.nnz() == 1);
  CHECK(D.coeff(0, 0) == 3.0);

  const RealCsr Z = RealCsr::from_triplets({}, 3, 3);
  const CVec x = {cplx(1, 1), cplx(2, 0), cplx(0, -3)};
  const CVec y = matvec(Z, std::span<const cplx>(x));
  for (const cplx& v : y) CHECK(std::abs(v) == 0.0);

  CHECK_THROWS_WITH_AS(RealCsr::from_triplets({{5, 0, 1.0}}, 2, 2, false),
                       doctest::Contains("(5, 0)"), Error);
}

TEST_CASE("matvec: identity, zero, tridiagonal oracle") {
  const RealCsr I = RealCsr::from_triplets({{0, 0, 1.0}, {1, 1, 1.0}}, 2, 2);
  const CVec x = {cplx(0.5, -2.0), cplx(3.0, 1.0)};
  const CVec y = matvec(I, std::span<const cplx>(x));
  CHECK(y[0] == x[0]);
  CHECK(y[1] == x[1]);

  // Tridiagonal (2,1)/4 pattern applied to e_1.
  std::vector<RealCsr::Entry> trip;
  for (std::size_t i = 0; i < 3; ++i) {
    trip.push_back({i, i, 2.0 / 4.0});
    if (i + 1 < 3) {
      trip.push_back({i, i + 1, 1.0 / 4.0});
      trip.push_back({i + 1, i, 1.0 / 4.0});
    }
  }
  const RealCsr T = RealCsr::from_triplets(std::move(trip), 3, 3, true);
  const CVec e1 = {cplx(1, 0), cplx(0, 0), cplx(0, 0)};
  const CVec te = matvec(T, std::span<const cplx>(e1));
  CHECK(te[0].real() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(te[1].real() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(std::abs(te[2]) == 0.0);

  // Cross-check against the dense oracle on a random vector.
  auto g = oracles::rng(7);
  std::vector<double> xr(3);
  for (double& v : xr) v = oracles::uniform(g, -1, 1);
  const auto dense = to_dense(T);
  const auto y_o = oracles::dense_matvec(dense, xr);
  const RVec y_s = matvec(T, std::span<const double>(xr));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(y_s[i] == doctest::Approx(y_o[i]).epsilon(1e-15));

  CHECK_THROWS_AS((void)matvec(T, std::span<const cplx>(x)), Error);
}

TEST_CASE("assembled symmetric matrices satisfy the adjoint identity") {
  auto g = oracles::rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(oracles::uniform(g, 0, 30));
    const RealCsr A = random_spd(g, n);
    CVec x(n), y(n);
    for (auto& v : x) v = oracles::random_cplx(g);
    for (auto& v : y) v = oracles::random_cplx(g);
    const CVec Ay = matvec(A, std::span<const cplx>(y));
    const CVec Ax = matvec(A, std::span<const cplx>(x));
    const cplx lhs = dot(std::span<const cplx>(x), std::span<const cplx>(Ay));
    const cplx rhs = std::conj(dot(std::span<const cplx>(y), std::span<const cplx>(Ax)));
    const double bound = 1e-12 * A.frobenius_norm() *
                         norm2(std::span<const cplx>(x)) *
                         norm2(std::span<const cplx>(y));
    CHECK(std::abs(lhs - rhs) <= bound);
  }
}

TEST_CASE("factorize: identity, SPD stiffness, structural singularity, indefinite") {
  const RealCsr I = RealCsr::from_triplets({{0, 0, 1.0}, {1, 1, 1.0}}, 2, 2, true);
  const SpdFactorization F(I);
  const CVec b = {cplx(2, 1), cplx(-1, 0.5)};
  const CVec x = F.solve(std::span<const cplx>(b));
  CHECK(std::abs(x[0] - b[0]) < 1e-15);
  CHECK(std::abs(x[1] - b[1]) < 1e-15);

  // 1D P1 Dirichlet stiffness is SPD.
  std::vector<RealCsr::Entry> trip;
  const std::size_t n = 9;
  for (std::size_t i = 0; i < n; ++i) {
    trip.push_back({i, i, 2.0});
    if (i + 1 < n) {
      trip.push_back({i, i + 1, -1.0});
      trip.push_back({i + 1, i, -1.0});
    }
  }
  const RealCsr S = RealCsr::from_triplets(std::move(trip), n, n, true);
  CHECK_NOTHROW(SpdFactorization{S});

  // Zero row: structurally singular.
  const RealCsr Z = RealCsr::from_triplets({{0, 0, 1.0}}, 2, 2, true);
  CHECK_THROWS_WITH_AS(SpdFactorization{Z}, doctest::Contains("singular"), Error);
  CHECK_THROWS_WITH_AS(LuFactorization<double>{Z}, doctest::Contains("singular"),
                       Error);

  // Indefinite matrix: not positive definite.
  const RealCsr Ind = RealCsr::from_triplets(
      {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 1.0}}, 2, 2, true);
  CHECK_THROWS_WITH_AS(SpdFactorization{Ind}, doctest::Contains("positive definite"),
                       Error);
}

TEST_CASE("solve: trivial cases and the dense oracle") {
  const RealCsr D =
      RealCsr::from_triplets({{0, 0, 2.0}, {1, 1, 4.0}}, 2, 2, true);
  const SpdFactorization F(D);
  const CVec zero = {cplx(0, 0), cplx(0, 0)};
  const CVec xz = F.solve(std::span<const cplx>(zero));
  CHECK(norm2(std::span<const cplx>(xz)) == 0.0);

  const CVec b = {cplx(2, 0), cplx(4, 0)};
  const CVec x = F.solve(std::span<const cplx>(b));
  CHECK(std::abs(x[0] - cplx(1, 0)) < 1e-14);
  CHECK(std::abs(x[1] - cplx(1, 0)) < 1e-14);

  auto g = oracles::rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t m = 3 + static_cast<std::size_t>(oracles::uniform(g, 0, 20));
    const RealCsr A = random_spd(g, m);
    std::vector<double> rhs(m);
    for (double& v : rhs) v = oracles::uniform(g, -1, 1);
    const SpdFactorization FA(A);
    const RVec xs = FA.solve(std::span<const double>(rhs));
    const auto xo = oracles::dense_solve(to_dense(A), rhs);
    for (std::size_t i = 0; i < m; ++i) CHECK(std::abs(xs[i] - xo[i]) <= 1e-12);
  }
}

TEST_CASE("factorize + solve round-trips matvec") {
  auto g = oracles::rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 5 + static_cast<std::size_t>(oracles::uniform(g, 0, 40));
    const RealCsr A = random_spd(g, n);
    CVec x(n);
    for (auto& v : x) v = oracles::random_cplx(g);
    const SpdFactorization F(A);
    const CVec b = matvec(A, std::span<const cplx>(x));
    const CVec y = F.solve(std::span<const cplx>(b));
    double err = 0, scale = 0;
    for (std::size_t i = 0; i < n; ++i) {
      err += std::norm(y[i] - x[i]);
      scale += std::norm(x[i]);
    }
    CHECK(std::sqrt(err) <= 1e-10 * std::sqrt(scale));
  }
}

TEST_CASE("complex LU: general matrices") {
  auto g = oracles::rng(19);
  std::vector<ComplexCsr::Entry> trip;
  const std::size_t n = 12;
  for (std::size_t i = 0; i < n; ++i) {
    trip.push_back({i, i, cplx(3.0, 1.0) + oracles::random_cplx(g)});
    if (i + 1 < n) trip.push_back({i, i + 1, oracles::random_cplx(g)});
    if (i >= 1) trip.push_back({i, i - 1, oracles::random_cplx(g)});
  }
  const ComplexCsr A = ComplexCsr::from_triplets(std::move(trip), n, n);
  CVec x(n);
  for (auto& v : x) v = oracles::random_cplx(g);
  const CVec b = matvec(A, std::span<const cplx>(x));
  const LuFactorization<cplx> F(A);
  const CVec y = F.solve(std::span<const cplx>(b));
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y[i] - x[i]) < 1e-11);
}

TEST_CASE("saddle_solve: unconstrained, 3x3 oracle, random KKT systems") {
  // m = 0 degenerates to a plain solve.
  const RealCsr I2 = RealCsr::from_triplets({{0, 0, 1.0}, {1, 1, 1.0}}, 2, 2, true);
  const SpdFactorization FI(I2);
  const RealCsr C0 = RealCsr::from_triplets({}, 0, 2);
  const CVec b0 = {cplx(1, 2), cplx(3, -1)};
  const SaddleSolution s0 = saddle_solve(FI, C0, std::span<const cplx>(b0));
  CHECK(std::abs(s0.x[0] - b0[0]) < 1e-15);
  CHECK(std::abs(s0.x[1] - b0[1]) < 1e-15);
  CHECK(s0.multipliers.empty());

  // A = I2, C = (1 0), b = (1,1): x = (0,1), lambda = 1.
  const RealCsr C1 = RealCsr::from_triplets({{0, 0, 1.0}}, 1, 2);
  const CVec b1 = {cplx(1, 0), cplx(1, 0)};
  const SaddleSolution s1 = saddle_solve(FI, C1, std::span<const cplx>(b1));
  CHECK(std::abs(s1.x[0]) <= 1e-12);
  CHECK(std::abs(s1.x[1] - cplx(1, 0)) <= 1e-12);
  CHECK(std::abs(s1.multipliers[0] - cplx(1, 0)) <= 1e-12);
  {
    // Same numbers from the dense KKT oracle.
    const auto [xo, lo] = oracles::dense_kkt(to_dense(I2), to_dense(C1),
                                             std::vector<cplx>{b1[0], b1[1]});
    CHECK(std::abs(s1.x[0] - xo[0]) <= 1e-12);
    CHECK(std::abs(s1.x[1] - xo[1]) <= 1e-12);
    CHECK(std::abs(s1.multipliers[0] - lo[0]) <= 1e-12);
  }

  auto g = oracles::rng(23);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t n = 6 + static_cast<std::size_t>(oracles::uniform(g, 0, 44));
    const std::size_t m = 1 + static_cast<std::size_t>(oracles::uniform(g, 0, 4));
    const RealCsr A = random_spd(g, n);
    std::vector<RealCsr::Entry> ct;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        // Random wide constraints plus a staircase to guarantee full rank.
        double v = oracles::uniform(g, -1, 1) * 0.3;
        if (j == i) v += 2.0;
        ct.push_back({i, j, v});
      }
    const RealCsr C = RealCsr::from_triplets(std::move(ct), m, n);
    CVec b(n);
    for (auto& v : b) v = oracles::random_cplx(g);

    const SpdFactorization FA(A);
    const SaddleSolution s = saddle_solve(FA, C, std::span<const cplx>(b));

    const auto [xo, lo] =
        oracles::dense_kkt(to_dense(A), to_dense(C), std::vector<cplx>(b));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(s.x[i] - xo[i]) <= 1e-10);
    for (std::size_t i = 0; i < m; ++i)
      CHECK(std::abs(s.multipliers[i] - lo[i]) <= 1e-10);

    // Both block equations hold.
    const CVec Ax = matvec(A, std::span<const cplx>(s.x));
    CVec ct_lambda(n, cplx{});
    C.apply_transpose<cplx>(s.multipliers, ct_lambda);
    double res1 = 0;
    for (std::size_t i = 0; i < n; ++i)
      res1 = std::max(res1, std::abs(Ax[i] + ct_lambda[i] - b[i]));
    CHECK(res1 <= 1e-10 * std::max(1.0, norm2(std::span<const cplx>(b))));
    CVec cx(m);
    C.apply<cplx>(s.x, cx);
    CHECK(norm_inf(std::span<const cplx>(cx)) <= 1e-10);
  }
}

TEST_CASE("saddle_solve: rank-deficient constraints are reported") {
  const RealCsr I3 = RealCsr::from_triplets(
      {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}}, 3, 3, true);
  const SpdFactorization F(I3);
  // Two identical rows.
  const RealCsr C = RealCsr::from_triplets(
      {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}}, 2, 3);
  const CVec b = {cplx(1, 0), cplx(1, 0), cplx(1, 0)};
  CHECK_THROWS_WITH_AS(saddle_solve(F, C, std::span<const cplx>(b), "patch 7"),
                       doctest::Contains("patch 7"), Error);
}

TEST_CASE("principal submatrix and block extraction") {
  std::vector<RealCsr::Entry> trip;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      trip.push_back({i, j, static_cast<double>(10 * i + j)});
  const RealCsr A = RealCsr::from_triplets(std::move(trip), 6, 6);
  const RealCsr P = A.principal_submatrix(2, 4);
  CHECK(P.n_rows() == 3);
  CHECK(P.coeff(0, 0) == 22.0);
  CHECK(P.coeff(2, 1) == 43.0);
  const RealCsr B = A.block(1, 2, 3, 5);
  CHECK(B.n_rows() == 2);
  CHECK(B.n_cols() == 3);
  CHECK(B.coeff(0, 0) == 13.0);
  CHECK(B.coeff(1, 2) == 25.0);
}
