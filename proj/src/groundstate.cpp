#include "gpelab/groundstate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gpelab {

namespace {

RVec real_parts(const CVec& v) {
  RVec r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i].real();
  return r;
}

CVec to_complex(const RVec& v) {
  CVec c(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) c[i] = cplx(v[i], 0.0);
  return c;
}

} // namespace

double gpe_energy_gs(const FESpace& space, const FEFunction& u, double beta) {
  return energy(space, Potential::groundstate_trap(), beta, u,
                default_nonlinear_quadrature(space.order()));
}

GroundStateResult sobolev_gradient_descent(const GroundStateConfig& config,
                                           const FEFunction* initial) {
  const FESpace& space = config.space;
  require(space.order() == 1, "sobolev_gradient_descent: expects a P1 space");
  require(config.tolerance > 0, "sobolev_gradient_descent: tolerance must be positive");
  require(config.sigma > 0 && config.sigma <= 1.0,
          "sobolev_gradient_descent: sigma must lie in (0, 1]");

  const RealCsr M = assemble_mass(space);
  const RealCsr S = assemble_stiffness(space);
  const RealCsr MV = assemble_weighted_mass(
      space, config.trap, default_linear_quadrature(space.order(), config.trap));
  const SpdFactorization M_factor(M, "mass");
  const QuadratureRule nl_quad = default_nonlinear_quadrature(space.order());

  // stiffness + trap rows merged once; the density part is rebuilt per iterate.
  auto build_operator = [&](const FEFunction& u) -> RealCsr {
    std::vector<RealCsr::Entry> trip;
    auto push_all = [&](const RealCsr& X, double scale) {
      auto off = X.row_offsets();
      auto cols = X.col_indices();
      auto vals = X.values();
      for (std::size_t i = 0; i < X.n_rows(); ++i)
        for (std::size_t p = off[i]; p < off[i + 1]; ++p)
          trip.push_back({i, cols[p], scale * vals[p]});
    };
    push_all(S, 1.0);
    push_all(MV, 1.0);
    if (config.beta != 0.0) {
      const Potential density = Potential::custom(
          [&u](double x) { return std::norm(evaluate(u, x)); }, "density", true);
      push_all(assemble_weighted_mass(space, density, nl_quad), config.beta);
    }
    return RealCsr::from_triplets(std::move(trip), space.dim(), space.dim(), true);
  };

  auto m_normalize = [&](RVec& v) {
    const RVec mv = matvec(M, std::span<const double>(v));
    const double nrm = std::sqrt(dot(std::span<const double>(v),
                                     std::span<const double>(mv)));
    require(nrm > 0, "sobolev_gradient_descent: zero iterate");
    for (double& x : v) x /= nrm;
  };

  RVec u;
  if (initial) {
    require(initial->space.dim() == space.dim(),
            "sobolev_gradient_descent: initial guess space mismatch");
    u = real_parts(initial->coefficients);
  } else {
    u.resize(space.dim());
    for (std::size_t d = 0; d < u.size(); ++d) {
      const double x = space.node_coord(d + 1);
      u[d] = std::exp(-0.5 * x * x);
    }
  }
  m_normalize(u);
  const RVec u_init = u;

  GroundStateResult result{FEFunction(space, to_complex(u)), 0.0, 0.0,
                           0,          0.0,                   0.0, {},  false};
  double E = gpe_energy_gs(space, FEFunction(space, to_complex(u)), config.beta);
  result.energy_trace.push_back(E);

  const RealCsr H1 = [&] {
    std::vector<RealCsr::Entry> trip;
    auto push_all = [&](const RealCsr& X) {
      auto off = X.row_offsets();
      auto cols = X.col_indices();
      auto vals = X.values();
      for (std::size_t i = 0; i < X.n_rows(); ++i)
        for (std::size_t p = off[i]; p < off[i + 1]; ++p)
          trip.push_back({i, cols[p], vals[p]});
    };
    push_all(S);
    push_all(M);
    return RealCsr::from_triplets(std::move(trip), space.dim(), space.dim(), true);
  }();

  int iter = 0;
  while (true) {
    const RealCsr A_u = build_operator(FEFunction(space, to_complex(u)));
    const RVec Au = matvec(A_u, std::span<const double>(u));
    const RVec Mu = matvec(M, std::span<const double>(u));
    const double lambda = dot(std::span<const double>(u), std::span<const double>(Au));

    RVec residual(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      residual[i] = Au[i] - lambda * Mu[i];

    const RVec minv_r = M_factor.solve(residual);
    result.eigen_residual = std::sqrt(std::max(
        0.0, dot(std::span<const double>(residual), std::span<const double>(minv_r))));

    RVec g;
    if (config.adaptive_metric) {
      const SpdFactorization A_factor(A_u, "adapted metric");
      g = A_factor.solve(residual);
    } else {
      const SpdFactorization H_factor(H1, "H1 metric");
      g = H_factor.solve(residual);
    }
    const RVec h1g = matvec(H1, std::span<const double>(g));
    result.gradient_h1 = std::sqrt(
        std::max(0.0, dot(std::span<const double>(g), std::span<const double>(h1g))));

    result.lambda = lambda;
    if (result.gradient_h1 <= config.tolerance &&
        result.eigen_residual <= 10.0 * config.tolerance)
      break;

    if (iter >= config.max_iters) {
      std::ostringstream os;
      os << "sobolev_gradient_descent: no convergence after " << config.max_iters
         << " iterations (gradient " << result.gradient_h1 << ", residual "
         << result.eigen_residual << ")";
      throw Error(os.str());
    }

    // Damped update with energy control.
    double sigma = config.sigma;
    RVec candidate(u.size());
    double E_new = 0;
    while (true) {
      for (std::size_t i = 0; i < u.size(); ++i)
        candidate[i] = u[i] - sigma * g[i];
      m_normalize(candidate);
      E_new = gpe_energy_gs(space, FEFunction(space, to_complex(candidate)),
                            config.beta);
      if (E_new <= E + 1e-14 * std::max(1.0, std::abs(E))) break;
      if (!config.backtrack || sigma < 1e-8 * config.sigma) {
        std::ostringstream os;
        os << "sobolev_gradient_descent: energy increased from " << E << " to "
           << E_new << " (sigma " << sigma << " too large)";
        throw Error(os.str());
      }
      sigma *= 0.5;
    }
    u = candidate;
    ++iter;
    // Stall exit: the energy no longer moves at double precision.
    const bool stalled = std::abs(E - E_new) < 1e-14 * std::max(1.0, std::abs(E));
    E = E_new;
    result.energy_trace.push_back(E);
    if (stalled) {
      result.stalled = true;
      break;
    }
  }

  // Fix the global phase: positive mass-inner-product with the initial guess.
  const RVec Mu = matvec(M, std::span<const double>(u));
  if (dot(std::span<const double>(u_init), std::span<const double>(Mu)) < 0)
    for (double& x : u) x = -x;

  result.iterations = iter;
  result.energy = E;
  result.state = FEFunction(space, to_complex(u));
  return result;
}

} // namespace gpelab
