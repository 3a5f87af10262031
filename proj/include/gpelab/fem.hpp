#ifndef GPELAB_FEM_HPP
#define GPELAB_FEM_HPP

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "gpelab/mesh.hpp"
#include "gpelab/numerics.hpp"

namespace gpelab {

/// Gauss-Legendre rule mapped to [0,1]; n points are exact for polynomials of
/// degree 2n-1. Weights are positive and sum to one.
struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;
  int exactness = 0;
};

QuadratureRule gauss_rule(int n_points);

/// Nonnegative external potential V(x). The descriptor identifies the
/// built-in choices used by the experiments (and keys basis caches); `smooth`
/// selects the default quadrature treatment.
class Potential {
public:
  static Potential harmonic10();      // 10 x^2
  static Potential groundstate_trap(); // x^2
  static Potential discontinuous();   // 10 x^2 for x <= 0, 100 for x >= 5
  static Potential zero();
  static Potential custom(std::function<double(double)> f, std::string id = "custom",
                          bool smooth = false);
  static Potential by_id(const std::string& id); // V1 | V2 | gs | zero

  double operator()(double x) const { return eval_(x); }
  const std::string& id() const { return id_; }
  bool smooth() const { return smooth_; }

private:
  Potential(std::function<double(double)> f, std::string id, bool smooth)
      : eval_(std::move(f)), id_(std::move(id)), smooth_(smooth) {}
  std::function<double(double)> eval_;
  std::string id_;
  bool smooth_ = true;
};

/// H^1-conforming Lagrange space of order k (1, 2 or 3) on a uniform mesh,
/// with equispaced element nodes and homogeneous Dirichlet conditions.
/// Global node m sits at a + m h/k; the dofs are the k*n-1 interior nodes.
class FESpace {
public:
  FESpace(Mesh1D mesh, int order);

  const Mesh1D& mesh() const { return mesh_; }
  int order() const { return order_; }
  std::size_t dim() const { return order_ * mesh_.n_elements - 1; }
  std::size_t n_nodes() const { return order_ * mesh_.n_elements + 1; }
  double node_coord(std::size_t m) const {
    return mesh_.a + static_cast<double>(m) * mesh_.h() / order_;
  }

  /// Lagrange shape value / reference derivative of local node l at xi in [0,1].
  double shape(int l, double xi) const;
  double shape_deriv(int l, double xi) const;

private:
  Mesh1D mesh_;
  int order_;
};

struct FEFunction {
  FESpace space;
  CVec coefficients; // one per interior node

  FEFunction(FESpace s, CVec c) : space(std::move(s)), coefficients(std::move(c)) {
    require(coefficients.size() == space.dim(),
            "FEFunction: coefficient count does not match space dimension");
  }
};

// Pointwise evaluation (complex value and derivative) at arbitrary x.
cplx evaluate(const FEFunction& u, double x);
cplx evaluate_deriv(const FEFunction& u, double x);

FEFunction interpolate(const FESpace& space, const std::function<cplx(double)>& f);

// Default per-element quadrature choices.
QuadratureRule default_linear_quadrature(int order, const Potential& V);
QuadratureRule default_nonlinear_quadrature(int order);

RealCsr assemble_mass(const FESpace& space);
RealCsr assemble_stiffness(const FESpace& space);
RealCsr assemble_weighted_mass(const FESpace& space, const Potential& V,
                               const QuadratureRule& quad);
RealCsr assemble_hform(const FESpace& space, const Potential& V,
                       const QuadratureRule& quad);

/// Per-element local matrices of the form (grad u, grad v) + (V u, v); for a
/// P1 space each entry is the 2x2 block of one fine element. Used to build
/// patch-restricted operators that match the global assembly bit for bit.
std::vector<std::array<double, 4>> local_hform_p1(const FESpace& space,
                                                  const Potential& V,
                                                  const QuadratureRule& quad);

CVec nonlinear_vector(const FESpace& space, const FEFunction& u, double beta,
                      const QuadratureRule& quad);

FEFunction l2_project(const FESpace& space, const std::function<cplx(double)>& f,
                      const QuadratureRule& quad, std::size_t sub_intervals = 1);
FEFunction l2_project(const FESpace& space, const FEFunction& f);

struct ErrorPair {
  double h1 = 0;
  double l2 = 0;
};
/// Composite-quadrature H^1/L^2 distance on the union refinement of the two
/// meshes (both functions must live on the same interval).
ErrorPair fe_errors(const FEFunction& u, const FEFunction& v);
double h1_error(const FEFunction& u, const FEFunction& v);
double h1_norm(const FEFunction& u);

/// Gross-Pitaevskii energy 1/2 int |u'|^2 + V |u|^2 + (beta/2) |u|^4.
double energy(const FESpace& space, const Potential& V, double beta,
              const FEFunction& u, const QuadratureRule& quad);

/// Exact embedding of a coarse P1 function into the fine P1 space of a pair.
FEFunction prolong(const FEFunction& coarse_p1, const RefinementPair& pair);
RVec prolong_real(const RefinementPair& pair, std::span<const double> coarse_coeffs);

} // namespace gpelab

#endif
