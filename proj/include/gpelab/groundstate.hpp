#ifndef GPELAB_GROUNDSTATE_HPP
#define GPELAB_GROUNDSTATE_HPP

#include "gpelab/fem.hpp"

namespace gpelab {

/// Parameters of the energy-adaptive Sobolev gradient descent for the
/// minimizer of the Gross-Pitaevskii energy under a unit-mass constraint.
struct GroundStateConfig {
  FESpace space;            // fine P1 space
  Potential trap = Potential::groundstate_trap();
  double beta = 0;
  double tolerance = 1e-9;  // on the H1 norm of the preconditioned gradient
  int max_iters = 20000;
  double sigma = 1.0;       // step damping in (0, 1]
  bool adaptive_metric = true; // false: plain (stiffness + mass) metric
  bool backtrack = true;    // halve sigma on energy increase

  explicit GroundStateConfig(FESpace s) : space(std::move(s)) {}
};

struct GroundStateResult {
  FEFunction state;        // real, nonnegative phase, unit mass
  double energy = 0;
  double lambda = 0;       // Rayleigh quotient of the adapted operator
  int iterations = 0;      // accepted update steps
  double gradient_h1 = 0;  // H1 norm of the last preconditioned gradient
  double eigen_residual = 0; // ||A_u u - lambda M u|| in the M^{-1} norm
  RVec energy_trace;       // energy after every accepted step
  bool stalled = false;    // stopped on energy stagnation instead of residual
};

GroundStateResult sobolev_gradient_descent(const GroundStateConfig& config,
                                           const FEFunction* initial = nullptr);

/// Gross-Pitaevskii energy with the ground-state trap x^2.
double gpe_energy_gs(const FESpace& space, const FEFunction& u, double beta);

} // namespace gpelab

#endif
