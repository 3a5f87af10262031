#include "gpelab/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace gpelab {

namespace {

double legendre(int n, double x, double& dp) {
  // Returns P_n(x) and its derivative via the three-term recurrence.
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
}

struct ShapeTable {
  // values[q][l], derivs[q][l] on the reference element [0,1].
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> derivs;
};

ShapeTable tabulate(const FESpace& space, const QuadratureRule& quad) {
  const int k = space.order();
  ShapeTable t;
  t.values.resize(quad.points.size());
  t.derivs.resize(quad.points.size());
  for (std::size_t q = 0; q < quad.points.size(); ++q) {
    t.values[q].resize(k + 1);
    t.derivs[q].resize(k + 1);
    for (int l = 0; l <= k; ++l) {
      t.values[q][l] = space.shape(l, quad.points[q]);
      t.derivs[q][l] = space.shape_deriv(l, quad.points[q]);
    }
  }
  return t;
}

// Maps (element, local node) to the dof index, or npos for boundary nodes.
constexpr std::size_t kNoDof = static_cast<std::size_t>(-1);

std::size_t dof_index(const FESpace& space, std::size_t element, int local) {
  const std::size_t node = space.order() * element + static_cast<std::size_t>(local);
  if (node == 0 || node == space.order() * space.mesh().n_elements) return kNoDof;
  return node - 1;
}

} // namespace

QuadratureRule gauss_rule(int n_points) {
  require(n_points >= 1 && n_points <= 10,
          "gauss_rule: supported point counts are 1..10");
  QuadratureRule rule;
  rule.exactness = 2 * n_points - 1;
  rule.points.resize(n_points);
  rule.weights.resize(n_points);
  const int n = n_points;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      const double p = legendre(n, x, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, x, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[i] = 0.5 * (1.0 - x); // roots come out in decreasing order
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  std::sort(rule.points.begin(), rule.points.end());
  return rule;
}

Potential Potential::harmonic10() {
  return Potential([](double x) { return 10.0 * x * x; }, "V1", true);
}

Potential Potential::groundstate_trap() {
  return Potential([](double x) { return x * x; }, "gs", true);
}

Potential Potential::discontinuous() {
  return Potential(
      [](double x) {
        double v = 0.0;
        if (x <= 0.0) v += 10.0 * x * x;
        if (x >= 5.0) v += 100.0;
        return v;
      },
      "V2", false);
}

Potential Potential::zero() {
  return Potential([](double) { return 0.0; }, "zero", true);
}

Potential Potential::custom(std::function<double(double)> f, std::string id,
                            bool smooth) {
  return Potential(std::move(f), std::move(id), smooth);
}

Potential Potential::by_id(const std::string& id) {
  if (id == "V1") return harmonic10();
  if (id == "V2") return discontinuous();
  if (id == "gs") return groundstate_trap();
  if (id == "zero") return zero();
  throw Error("Potential::by_id: unknown potential '" + id + "'");
}

FESpace::FESpace(Mesh1D mesh, int order) : mesh_(mesh), order_(order) {
  require(order >= 1 && order <= 3, "FESpace: order must be 1, 2 or 3");
}

double FESpace::shape(int l, double xi) const {
  const int k = order_;
  double v = 1.0;
  const double xl = static_cast<double>(l) / k;
  for (int m = 0; m <= k; ++m) {
    if (m == l) continue;
    const double xm = static_cast<double>(m) / k;
    v *= (xi - xm) / (xl - xm);
  }
  return v;
}

double FESpace::shape_deriv(int l, double xi) const {
  const int k = order_;
  const double xl = static_cast<double>(l) / k;
  double sum = 0.0;
  for (int m = 0; m <= k; ++m) {
    if (m == l) continue;
    const double xm = static_cast<double>(m) / k;
    double term = 1.0 / (xl - xm);
    for (int r = 0; r <= k; ++r) {
      if (r == l || r == m) continue;
      const double xr = static_cast<double>(r) / k;
      term *= (xi - xr) / (xl - xr);
    }
    sum += term;
  }
  return sum;
}

cplx evaluate(const FEFunction& u, double x) {
  const Mesh1D& mesh = u.space.mesh();
  require(x >= mesh.a - 1e-12 && x <= mesh.b + 1e-12,
          "evaluate: point outside mesh interval");
  const double h = mesh.h();
  auto e = static_cast<std::size_t>(
      std::clamp((x - mesh.a) / h, 0.0, static_cast<double>(mesh.n_elements) - 0.5));
  if (e >= mesh.n_elements) e = mesh.n_elements - 1;
  const double xi = (x - mesh.node(e)) / h;
  const int k = u.space.order();
  cplx v{};
  for (int l = 0; l <= k; ++l) {
    const std::size_t d = dof_index(u.space, e, l);
    if (d == kNoDof) continue;
    v += u.coefficients[d] * u.space.shape(l, xi);
  }
  return v;
}

cplx evaluate_deriv(const FEFunction& u, double x) {
  const Mesh1D& mesh = u.space.mesh();
  const double h = mesh.h();
  auto e = static_cast<std::size_t>(
      std::clamp((x - mesh.a) / h, 0.0, static_cast<double>(mesh.n_elements) - 0.5));
  if (e >= mesh.n_elements) e = mesh.n_elements - 1;
  const double xi = (x - mesh.node(e)) / h;
  const int k = u.space.order();
  cplx v{};
  for (int l = 0; l <= k; ++l) {
    const std::size_t d = dof_index(u.space, e, l);
    if (d == kNoDof) continue;
    v += u.coefficients[d] * u.space.shape_deriv(l, xi);
  }
  return v / h;
}

FEFunction interpolate(const FESpace& space, const std::function<cplx(double)>& f) {
  CVec c(space.dim());
  for (std::size_t d = 0; d < c.size(); ++d) c[d] = f(space.node_coord(d + 1));
  return FEFunction(space, std::move(c));
}

QuadratureRule default_linear_quadrature(int order, const Potential& V) {
  if (!V.smooth()) return gauss_rule(5);
  return gauss_rule(std::min(10, 2 * order + 2));
}

QuadratureRule default_nonlinear_quadrature(int order) {
  return gauss_rule(std::max(3, 2 * order + 1));
}

namespace {

using Entry = RealCsr::Entry;

template <typename LocalKernel>
RealCsr assemble_local(const FESpace& space, LocalKernel&& kernel) {
  const int k = space.order();
  const std::size_t n = space.mesh().n_elements;
  std::vector<Entry> trip;
  trip.reserve(n * (k + 1) * (k + 1));
  std::vector<double> local((k + 1) * (k + 1));
  for (std::size_t e = 0; e < n; ++e) {
    kernel(e, local);
    for (int a = 0; a <= k; ++a) {
      const std::size_t da = dof_index(space, e, a);
      if (da == kNoDof) continue;
      for (int b = 0; b <= k; ++b) {
        const std::size_t db = dof_index(space, e, b);
        if (db == kNoDof) continue;
        trip.push_back({da, db, local[a * (k + 1) + b]});
      }
    }
  }
  return RealCsr::from_triplets(std::move(trip), space.dim(), space.dim(), true);
}

} // namespace

RealCsr assemble_mass(const FESpace& space) {
  const int k = space.order();
  const QuadratureRule quad = gauss_rule(k + 1); // exact for degree 2k
  const ShapeTable tab = tabulate(space, quad);
  const double h = space.mesh().h();
  return assemble_local(space, [&](std::size_t, std::vector<double>& local) {
    std::fill(local.begin(), local.end(), 0.0);
    for (std::size_t q = 0; q < quad.points.size(); ++q)
      for (int a = 0; a <= k; ++a)
        for (int b = 0; b <= k; ++b)
          local[a * (k + 1) + b] +=
              h * quad.weights[q] * tab.values[q][a] * tab.values[q][b];
  });
}

RealCsr assemble_stiffness(const FESpace& space) {
  const int k = space.order();
  const QuadratureRule quad = gauss_rule(std::max(1, k)); // exact for degree 2k-2
  const ShapeTable tab = tabulate(space, quad);
  const double h = space.mesh().h();
  return assemble_local(space, [&](std::size_t, std::vector<double>& local) {
    std::fill(local.begin(), local.end(), 0.0);
    for (std::size_t q = 0; q < quad.points.size(); ++q)
      for (int a = 0; a <= k; ++a)
        for (int b = 0; b <= k; ++b)
          local[a * (k + 1) + b] +=
              quad.weights[q] * tab.derivs[q][a] * tab.derivs[q][b] / h;
  });
}

RealCsr assemble_weighted_mass(const FESpace& space, const Potential& V,
                               const QuadratureRule& quad) {
  const int k = space.order();
  const ShapeTable tab = tabulate(space, quad);
  const double h = space.mesh().h();
  const Mesh1D& mesh = space.mesh();
  return assemble_local(space, [&](std::size_t e, std::vector<double>& local) {
    std::fill(local.begin(), local.end(), 0.0);
    const double x0 = mesh.node(e);
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      const double x = x0 + quad.points[q] * h;
      const double v = V(x);
      if (v < 0) {
        std::ostringstream os;
        os << "assemble_weighted_mass: potential negative at x = " << x;
        throw Error(os.str());
      }
      for (int a = 0; a <= k; ++a)
        for (int b = 0; b <= k; ++b)
          local[a * (k + 1) + b] +=
              h * quad.weights[q] * v * tab.values[q][a] * tab.values[q][b];
    }
  });
}

RealCsr assemble_hform(const FESpace& space, const Potential& V,
                       const QuadratureRule& quad) {
  const int k = space.order();
  const ShapeTable tab = tabulate(space, quad);
  const double h = space.mesh().h();
  const Mesh1D& mesh = space.mesh();
  return assemble_local(space, [&](std::size_t e, std::vector<double>& local) {
    std::fill(local.begin(), local.end(), 0.0);
    const double x0 = mesh.node(e);
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      const double x = x0 + quad.points[q] * h;
      const double v = V(x);
      if (v < 0) throw Error("assemble_hform: potential negative");
      for (int a = 0; a <= k; ++a)
        for (int b = 0; b <= k; ++b)
          local[a * (k + 1) + b] +=
              quad.weights[q] * (tab.derivs[q][a] * tab.derivs[q][b] / h +
                                 h * v * tab.values[q][a] * tab.values[q][b]);
    }
  });
}

std::vector<std::array<double, 4>> local_hform_p1(const FESpace& space,
                                                  const Potential& V,
                                                  const QuadratureRule& quad) {
  require(space.order() == 1, "local_hform_p1: requires a P1 space");
  const ShapeTable tab = tabulate(space, quad);
  const Mesh1D& mesh = space.mesh();
  const double h = mesh.h();
  std::vector<std::array<double, 4>> local(mesh.n_elements, {0, 0, 0, 0});
  for (std::size_t e = 0; e < mesh.n_elements; ++e) {
    const double x0 = mesh.node(e);
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      const double x = x0 + quad.points[q] * h;
      const double v = V(x);
      if (v < 0) throw Error("local_hform_p1: potential negative");
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          local[e][a * 2 + b] +=
              quad.weights[q] * (tab.derivs[q][a] * tab.derivs[q][b] / h +
                                 h * v * tab.values[q][a] * tab.values[q][b]);
    }
  }
  return local;
}

CVec nonlinear_vector(const FESpace& space, const FEFunction& u, double beta,
                      const QuadratureRule& quad) {
  require(u.space.mesh().n_elements == space.mesh().n_elements &&
              u.space.order() == space.order(),
          "nonlinear_vector: function lives on a different space");
  const int k = space.order();
  const ShapeTable tab = tabulate(space, quad);
  const double h = space.mesh().h();
  CVec out(space.dim(), cplx{});
  std::vector<cplx> uq(quad.points.size());
  for (std::size_t e = 0; e < space.mesh().n_elements; ++e) {
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      cplx val{};
      for (int l = 0; l <= k; ++l) {
        const std::size_t d = dof_index(space, e, l);
        if (d == kNoDof) continue;
        val += u.coefficients[d] * tab.values[q][l];
      }
      uq[q] = val;
    }
    for (int l = 0; l <= k; ++l) {
      const std::size_t d = dof_index(space, e, l);
      if (d == kNoDof) continue;
      cplx acc{};
      for (std::size_t q = 0; q < quad.points.size(); ++q)
        acc += quad.weights[q] * std::norm(uq[q]) * uq[q] * tab.values[q][l];
      out[d] += beta * h * acc;
    }
  }
  return out;
}

FEFunction l2_project(const FESpace& space, const std::function<cplx(double)>& f,
                      const QuadratureRule& quad, std::size_t sub_intervals) {
  require(sub_intervals >= 1, "l2_project: sub_intervals must be positive");
  const int k = space.order();
  const Mesh1D& mesh = space.mesh();
  const double h = mesh.h();
  const double hs = h / static_cast<double>(sub_intervals);
  CVec load(space.dim(), cplx{});
  for (std::size_t e = 0; e < mesh.n_elements; ++e) {
    const double x0 = mesh.node(e);
    for (std::size_t s = 0; s < sub_intervals; ++s) {
      const double xs = x0 + static_cast<double>(s) * hs;
      for (std::size_t q = 0; q < quad.points.size(); ++q) {
        const double x = xs + quad.points[q] * hs;
        const double xi = (x - x0) / h;
        const cplx fv = f(x);
        for (int l = 0; l <= k; ++l) {
          const std::size_t d = dof_index(space, e, l);
          if (d == kNoDof) continue;
          load[d] += hs * quad.weights[q] * fv * space.shape(l, xi);
        }
      }
    }
  }
  const RealCsr M = assemble_mass(space);
  SpdFactorization F(M, "l2_project mass");
  return FEFunction(space, F.solve(load));
}

FEFunction l2_project(const FESpace& space, const FEFunction& f) {
  const std::size_t ns = space.mesh().n_elements;
  const std::size_t nf = f.space.mesh().n_elements;
  require(space.mesh().a == f.space.mesh().a && space.mesh().b == f.space.mesh().b,
          "l2_project: meshes cover different intervals");
  // Integrate on the union refinement so the integrand is a polynomial on
  // every quadrature cell.
  std::size_t sub = 1;
  if (nf > ns) {
    require(nf % ns == 0, "l2_project: meshes are not nested");
    sub = nf / ns;
  } else {
    require(ns % nf == 0, "l2_project: meshes are not nested");
  }
  const int deg = space.order() + f.space.order();
  const QuadratureRule quad = gauss_rule(std::min(10, deg / 2 + 2));
  return l2_project(
      space, [&](double x) { return evaluate(f, x); }, quad, sub);
}

ErrorPair fe_errors(const FEFunction& u, const FEFunction& v) {
  const Mesh1D& mu = u.space.mesh();
  const Mesh1D& mv = v.space.mesh();
  require(mu.a == mv.a && mu.b == mv.b,
          "fe_errors: functions live on different intervals");
  const std::size_t nu = mu.n_elements, nv = mv.n_elements;
  const std::size_t n = std::lcm(nu, nv);
  const double h = (mu.b - mu.a) / static_cast<double>(n);
  const int kmax = std::max(u.space.order(), v.space.order());
  const QuadratureRule quad = gauss_rule(std::min(10, kmax + 2));
  double l2 = 0, h1semi = 0;
  for (std::size_t e = 0; e < n; ++e) {
    const double x0 = mu.a + static_cast<double>(e) * h;
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      const double x = x0 + quad.points[q] * h;
      const cplx dv = evaluate(u, x) - evaluate(v, x);
      const cplx dd = evaluate_deriv(u, x) - evaluate_deriv(v, x);
      l2 += h * quad.weights[q] * std::norm(dv);
      h1semi += h * quad.weights[q] * std::norm(dd);
    }
  }
  return ErrorPair{std::sqrt(l2 + h1semi), std::sqrt(l2)};
}

double h1_error(const FEFunction& u, const FEFunction& v) {
  return fe_errors(u, v).h1;
}

double h1_norm(const FEFunction& u) {
  FEFunction zero(u.space, CVec(u.space.dim(), cplx{}));
  return fe_errors(u, zero).h1;
}

double energy(const FESpace& space, const Potential& V, double beta,
              const FEFunction& u, const QuadratureRule& quad) {
  require(u.space.dim() == space.dim(), "energy: space mismatch");
  const int k = space.order();
  const ShapeTable tab = tabulate(space, quad);
  const Mesh1D& mesh = space.mesh();
  const double h = mesh.h();
  double E = 0;
  for (std::size_t e = 0; e < mesh.n_elements; ++e) {
    const double x0 = mesh.node(e);
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      const double x = x0 + quad.points[q] * h;
      cplx val{}, der{};
      for (int l = 0; l <= k; ++l) {
        const std::size_t d = dof_index(space, e, l);
        if (d == kNoDof) continue;
        val += u.coefficients[d] * tab.values[q][l];
        der += u.coefficients[d] * tab.derivs[q][l];
      }
      der /= h;
      const double dens = std::norm(val);
      E += h * quad.weights[q] *
           (0.5 * (std::norm(der) + V(x) * dens) + 0.25 * beta * dens * dens);
    }
  }
  return E;
}

RVec prolong_real(const RefinementPair& pair, std::span<const double> coarse_coeffs) {
  require(coarse_coeffs.size() == pair.coarse.n_interior(),
          "prolong: coefficient count mismatch");
  const std::size_t r = pair.factor;
  const std::size_t nf = pair.fine.n_elements;
  RVec fine(nf - 1, 0.0);
  auto coarse_nodal = [&](std::size_t node) -> double {
    if (node == 0 || node == pair.coarse.n_elements) return 0.0;
    return coarse_coeffs[node - 1];
  };
  for (std::size_t p = 1; p < nf; ++p) {
    const std::size_t j = p / r;
    const std::size_t s = p % r;
    const double t = static_cast<double>(s) / static_cast<double>(r);
    fine[p - 1] = (1.0 - t) * coarse_nodal(j) + t * coarse_nodal(j + 1);
  }
  return fine;
}

FEFunction prolong(const FEFunction& coarse_p1, const RefinementPair& pair) {
  require(coarse_p1.space.order() == 1, "prolong: input must be P1");
  require(coarse_p1.space.mesh().n_elements == pair.coarse.n_elements,
          "prolong: function does not live on the pair's coarse mesh");
  const std::size_t r = pair.factor;
  const std::size_t nf = pair.fine.n_elements;
  CVec fine(nf - 1, cplx{});
  auto coarse_nodal = [&](std::size_t node) -> cplx {
    if (node == 0 || node == pair.coarse.n_elements) return cplx{};
    return coarse_p1.coefficients[node - 1];
  };
  for (std::size_t p = 1; p < nf; ++p) {
    const std::size_t j = p / r;
    const std::size_t s = p % r;
    const double t = static_cast<double>(s) / static_cast<double>(r);
    fine[p - 1] = (1.0 - t) * coarse_nodal(j) + t * coarse_nodal(j + 1);
  }
  return FEFunction(FESpace(pair.fine, 1), std::move(fine));
}

} // namespace gpelab
