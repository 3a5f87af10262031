// Independent reference implementations used as test oracles: dense linear
// algebra, a dense KKT solve, a Jacobi eigensolver and high-order composite
// quadrature. None of these share code with the library paths they check.
#ifndef GPELAB_TESTS_ORACLES_HPP
#define GPELAB_TESTS_ORACLES_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracles {

using cplx = std::complex<double>;

template <typename T>
using Dense = std::vector<std::vector<T>>;

template <typename T>
Dense<T> zeros(std::size_t n, std::size_t m) {
  return Dense<T>(n, std::vector<T>(m, T{}));
}

template <typename T>
std::vector<T> dense_matvec(const Dense<T>& A, const std::vector<T>& x) {
  std::vector<T> y(A.size(), T{});
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += A[i][j] * x[j];
  return y;
}

/// Gaussian elimination with partial pivoting.
template <typename T>
std::vector<T> dense_solve(Dense<T> A, std::vector<T> b) {
  const std::size_t n = A.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(A[i][k]) > std::abs(A[piv][k])) piv = i;
    std::swap(A[k], A[piv]);
    std::swap(b[k], b[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const T f = A[i][k] / A[k][k];
      for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<T> x(n, T{});
  for (std::size_t i = n; i-- > 0;) {
    T s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
    x[i] = s / A[i][i];
  }
  return x;
}

/// Dense KKT solve of [A C^T; C 0][x; lambda] = [b; 0].
template <typename T>
std::pair<std::vector<T>, std::vector<T>> dense_kkt(const Dense<double>& A,
                                                    const Dense<double>& C,
                                                    const std::vector<T>& b) {
  const std::size_t n = A.size();
  const std::size_t m = C.size();
  Dense<T> K = zeros<T>(n + m, n + m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) K[i][j] = T(A[i][j]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      K[n + i][j] = T(C[i][j]);
      K[j][n + i] = T(C[i][j]);
    }
  std::vector<T> rhs(n + m, T{});
  for (std::size_t i = 0; i < n; ++i) rhs[i] = b[i];
  const std::vector<T> sol = dense_solve(K, rhs);
  return {std::vector<T>(sol.begin(), sol.begin() + n),
          std::vector<T>(sol.begin() + n, sol.end())};
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
inline double smallest_eigenvalue(Dense<double> A) {
  const std::size_t n = A.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += A[p][q] * A[p][q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(A[p][q]) < 1e-18) continue;
        const double theta = 0.5 * std::atan2(2 * A[p][q], A[q][q] - A[p][p]);
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A[k][p], akq = A[k][q];
          A[k][p] = c * akp - s * akq;
          A[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A[p][k], aqk = A[q][k];
          A[p][k] = c * apk - s * aqk;
          A[q][k] = s * apk + c * aqk;
        }
      }
  }
  double mn = A[0][0];
  for (std::size_t i = 1; i < n; ++i) mn = std::min(mn, A[i][i]);
  return mn;
}

/// Composite Gauss(8) quadrature with `cells` subdivisions per call interval.
inline double composite_quadrature(const std::function<double(double)>& f,
                                   double a, double b, int cells) {
  // 8-point Gauss-Legendre nodes/weights on [-1, 1].
  static const double xs[8] = {-0.9602898564975363, -0.7966664774136267,
                               -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
  static const double ws[8] = {0.1012285362903763, 0.2223810344533745,
                               0.3137066458778873, 0.3626837833783620,
                               0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
  const double h = (b - a) / cells;
  double total = 0;
  for (int c = 0; c < cells; ++c) {
    const double xl = a + c * h;
    for (int q = 0; q < 8; ++q) {
      const double x = xl + 0.5 * h * (xs[q] + 1.0);
      total += 0.5 * h * ws[q] * f(x);
    }
  }
  return total;
}

/// q-stage Gauss collocation (implicit Runge-Kutta) step for the scalar
/// linear equation i u' = lambda u, i.e. u' = -i lambda u.
inline cplx gauss_irk_step(int q, double lambda, double tau, cplx u) {
  // Collocation nodes: Gauss-Legendre points on (0,1) via Newton iteration.
  std::vector<double> c(q);
  {
    auto legendre = [&](int n, double x, double& dp) {
      double p0 = 1.0, p1 = x;
      if (n == 0) {
        dp = 0;
        return 1.0;
      }
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      return p1;
    };
    for (int i = 0; i < q; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (q + 0.5));
      double dp = 0;
      for (int it = 0; it < 100; ++it) {
        const double p = legendre(q, x, dp);
        const double dx = p / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      c[q - 1 - i] = 0.5 * (1.0 + x);
    }
  }
  // Butcher matrix a[m][j] = int_0^{c_m} l_j(s) ds by 16-cell composite Gauss.
  Dense<double> a = zeros<double>(q, q);
  std::vector<double> bw(q, 0.0);
  auto lag = [&](int j, double s) {
    double v = 1.0;
    for (int m = 0; m < q; ++m) {
      if (m == j) continue;
      v *= (s - c[m]) / (c[j] - c[m]);
    }
    return v;
  };
  for (int j = 0; j < q; ++j) {
    for (int m = 0; m < q; ++m)
      a[m][j] = composite_quadrature([&](double s) { return lag(j, s); }, 0.0,
                                     c[m], 16);
    bw[j] = composite_quadrature([&](double s) { return lag(j, s); }, 0.0, 1.0, 16);
  }
  // Stage system (I + i lambda tau a) k = -i lambda u * ones.
  Dense<cplx> M = zeros<cplx>(q, q);
  std::vector<cplx> rhs(q);
  const cplx il(0.0, lambda);
  for (int m = 0; m < q; ++m) {
    for (int j = 0; j < q; ++j)
      M[m][j] = (m == j ? cplx(1.0) : cplx(0.0)) + il * tau * a[m][j];
    rhs[m] = -il * u;
  }
  const std::vector<cplx> k = dense_solve(M, rhs);
  cplx out = u;
  for (int j = 0; j < q; ++j) out += tau * bw[j] * k[j];
  return out;
}

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline cplx random_cplx(std::mt19937_64& g) {
  return {uniform(g, -1.0, 1.0), uniform(g, -1.0, 1.0)};
}

} // namespace oracles

#endif
