#ifndef GPELAB_SYSTEMS_HPP
#define GPELAB_SYSTEMS_HPP

#include <memory>

#include "gpelab/fem.hpp"
#include "gpelab/lod.hpp"
#include "gpelab/timeint.hpp"

namespace gpelab {

/// Lagrange realization: plain cubic nonlinearity (identity density hook).
class PkSystem : public SpatialSystem {
public:
  PkSystem(FESpace space, Potential potential, double beta);

  std::size_t dim() const override { return space_.dim(); }
  const RealCsr& mass() const override { return M_; }
  const RealCsr& hform() const override { return A_; }
  const RealCsr& h1form() const override { return H1_; }
  CVec mass_solve(std::span<const cplx> b) const override {
    return M_factor_.solve(b);
  }
  CVec nonlinear(std::span<const cplx> u) const override;
  bool linear() const override { return beta_ == 0.0; }
  double energy(std::span<const cplx> u) const override;

  const FESpace& space() const { return space_; }
  const Potential& potential() const { return potential_; }
  double beta() const { return beta_; }

private:
  FESpace space_;
  Potential potential_;
  double beta_;
  QuadratureRule nl_quad_;
  QuadratureRule energy_quad_;
  RealCsr M_, A_, H1_;
  SpdFactorization M_factor_;
};

/// Multiscale realization: the nonlinear term projects the density onto the
/// basis through the precomputed triple-product tensor, and the energy is the
/// correspondingly modified one.
class LodSpatialSystem : public SpatialSystem {
public:
  LodSpatialSystem(std::shared_ptr<const LodSystem> system, double beta)
      : system_(std::move(system)), beta_(beta) {}

  std::size_t dim() const override { return system_->dim(); }
  const RealCsr& mass() const override { return system_->mass(); }
  const RealCsr& hform() const override { return system_->hform(); }
  const RealCsr& h1form() const override { return system_->h1form(); }
  CVec mass_solve(std::span<const cplx> b) const override {
    return system_->mass_factorization().solve(b);
  }
  CVec nonlinear(std::span<const cplx> u) const override {
    return system_->nonlinear(u, beta_);
  }
  bool linear() const override { return beta_ == 0.0; }
  double energy(std::span<const cplx> u) const override {
    return system_->modified_energy(u, beta_);
  }

  const LodSystem& lod() const { return *system_; }
  double beta() const { return beta_; }

private:
  std::shared_ptr<const LodSystem> system_;
  double beta_;
};

} // namespace gpelab

#endif
