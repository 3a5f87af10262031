#include "gpelab/systems.hpp"

namespace gpelab {

namespace {

RealCsr add_matrices(const RealCsr& X, const RealCsr& Y) {
  std::vector<RealCsr::Entry> trip;
  trip.reserve(X.nnz() + Y.nnz());
  auto push_all = [&](const RealCsr& Z) {
    auto off = Z.row_offsets();
    auto cols = Z.col_indices();
    auto vals = Z.values();
    for (std::size_t i = 0; i < Z.n_rows(); ++i)
      for (std::size_t p = off[i]; p < off[i + 1]; ++p)
        trip.push_back({i, cols[p], vals[p]});
  };
  push_all(X);
  push_all(Y);
  return RealCsr::from_triplets(std::move(trip), X.n_rows(), X.n_cols(), true);
}

} // namespace

PkSystem::PkSystem(FESpace space, Potential potential, double beta)
    : space_(space),
      potential_(std::move(potential)),
      beta_(beta),
      nl_quad_(default_nonlinear_quadrature(space.order())),
      energy_quad_(gauss_rule(std::max(
          static_cast<int>(default_nonlinear_quadrature(space.order()).points.size()),
          static_cast<int>(
              default_linear_quadrature(space.order(), potential_).points.size())))),
      M_(assemble_mass(space_)),
      A_(assemble_hform(space_, potential_,
                        default_linear_quadrature(space_.order(), potential_))),
      H1_(add_matrices(assemble_stiffness(space_), M_)),
      M_factor_(M_, "mass") {}

CVec PkSystem::nonlinear(std::span<const cplx> u) const {
  FEFunction uf(space_, CVec(u.begin(), u.end()));
  return nonlinear_vector(space_, uf, beta_, nl_quad_);
}

double PkSystem::energy(std::span<const cplx> u) const {
  FEFunction uf(space_, CVec(u.begin(), u.end()));
  return gpelab::energy(space_, potential_, beta_, uf, energy_quad_);
}

} // namespace gpelab
