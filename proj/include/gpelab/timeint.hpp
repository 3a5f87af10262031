#ifndef GPELAB_TIMEINT_HPP
#define GPELAB_TIMEINT_HPP

#include <functional>
#include <memory>
#include <vector>

#include "gpelab/numerics.hpp"

namespace gpelab {

/// Spatial discretization contract consumed by the time integrator: real SPD
/// mass, real symmetric bilinear-form matrix, a nonlinear term (with the
/// density-projection hook folded in by the realization) and a discrete
/// energy. Implementations must be safe for concurrent read access.
class SpatialSystem {
public:
  virtual ~SpatialSystem() = default;

  virtual std::size_t dim() const = 0;
  virtual const RealCsr& mass() const = 0;
  virtual const RealCsr& hform() const = 0;
  virtual const RealCsr& h1form() const = 0;
  virtual CVec mass_solve(std::span<const cplx> b) const = 0;
  virtual CVec nonlinear(std::span<const cplx> u) const = 0;
  virtual bool linear() const = 0;
  virtual double energy(std::span<const cplx> u) const = 0;

  double mass_norm(std::span<const cplx> u) const {
    const CVec mu = matvec(mass(), u);
    return std::sqrt(std::max(0.0, dot(u, mu).real()));
  }
  double h1_norm(std::span<const cplx> u) const {
    const CVec hu = matvec(h1form(), u);
    return std::sqrt(std::max(0.0, dot(u, hu).real()));
  }
};

/// Time discretization parameters: polynomial degree q in time, step size,
/// fixed-point tolerance in the mass-weighted norm, and the number of
/// quadrature points for the nonlinear time integral (0 picks the q Gauss
/// points; 2q+1 makes the nonlinear integral exact for the stage polynomial).
struct CgConfig {
  int q = 2;
  double tau = 2e-3;
  double fp_tol = 1e-10;
  int max_fp_iters = 200;
  int nl_time_points = 0;
};

struct StepResult {
  CVec u;
  int fp_iters = 0;
  std::vector<CVec> stages;
};

/// Factorized stage system of one cG(q) interval. The trial polynomial is
/// interpolated at {0} plus the q Gauss points of (0,1); tests are Legendre
/// polynomials up to degree q-1; the linear-in-time integrals are exact. The
/// linear block operator is independent of the step index and reused.
class StageOperator {
public:
  StageOperator(const SpatialSystem& system, const CgConfig& config);
  ~StageOperator();
  StageOperator(StageOperator&&) noexcept;

  StepResult step(const SpatialSystem& system, const CgConfig& config,
                  std::span<const cplx> u_n, std::size_t step_index = 0) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct StepRecord {
  double t = 0;
  double energy = 0;
  double mass = 0;
  int fp_iters = 0;
  double seconds = 0;
};

struct Trajectory {
  CVec final_state;
  std::vector<StepRecord> records; // one per step
  std::vector<CVec> snapshots;     // filled when store_all is requested
  double initial_energy = 0;
  double initial_mass = 0;
  double setup_seconds = 0; // stage-operator factorization (offline cost)

  double energy_drift() const;
  double mass_drift() const;
  double mean_fp_iters() const;
  /// Stepping-loop seconds with the first (warm-up) step replaced by the
  /// mean of the remaining ones.
  double online_seconds() const;
};

using StepObserver =
    std::function<void(std::size_t step, double t, const CVec& u)>;

Trajectory integrate(const SpatialSystem& system, const CVec& u0, double T,
                     const CgConfig& config, bool store_all = false,
                     const StepObserver& observer = {});

struct TimeOrderRow {
  double tau = 0;
  double h1_error = 0;
  double eoc = 0; // vs the previous row; 0 on the first
};

std::vector<TimeOrderRow> time_order_study(const SpatialSystem& system,
                                           const CVec& u0, double T,
                                           const CgConfig& base,
                                           const std::vector<double>& taus,
                                           double tau_ref);

} // namespace gpelab

#endif
