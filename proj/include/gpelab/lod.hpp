#ifndef GPELAB_LOD_HPP
#define GPELAB_LOD_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpelab/fem.hpp"
#include "gpelab/mesh.hpp"
#include "gpelab/numerics.hpp"

namespace gpelab {

/// Inputs of a localized-basis construction: nested mesh pair, number of
/// oversampling layers and the potential entering the bilinear form.
struct LodConfig {
  RefinementPair pair;
  std::size_t oversampling = 1;
  Potential potential = Potential::zero();
  QuadratureRule quad;  // per-fine-element rule for the potential term
  unsigned threads = 1;

  LodConfig(RefinementPair p, std::size_t ell, Potential pot)
      : pair(p), oversampling(ell), potential(std::move(pot)),
        quad(default_linear_quadrature(1, potential)) {
    require(oversampling >= 1, "LodConfig: oversampling must be >= 1");
  }
};

/// Pairing matrix between coarse hat functions (rows) and fine P1 basis
/// functions (columns): C[i][p] = int hat_i * lambda_p dx, integrated exactly.
/// A fine function w satisfies C w = 0 exactly when its coarse L2 projection
/// vanishes.
RealCsr coarse_constraint_matrix(const RefinementPair& pair);

/// A vector supported on a contiguous fine-dof range; zero elsewhere.
struct CorrectorSegment {
  std::size_t lo = 0; // first fine dof index
  RVec values;
  std::size_t hi() const { return lo + values.size() - 1; }
};

/// Solves one local corrector problem: the patch-restricted variational
/// problem for coarse element K and the hat at `vertex_node`, constrained to
/// functions with vanishing coarse projection, extended by zero outside the
/// patch. The fine matrix and the constraint matrix are the global ones.
CorrectorSegment element_corrector(const LodConfig& config,
                                   const RealCsr& fine_hform,
                                   const RealCsr& constraint, std::size_t K,
                                   std::size_t vertex_node);

/// Basis of the localized multiscale space: column j holds the fine P1
/// coefficients of (I - C)hat_{j+1} with contiguous support.
class LodBasis {
public:
  static LodBasis assemble(const LodConfig& config);
  /// Plain embedding of the coarse hats (no correctors); used as the
  /// degenerate reference in tests and identities.
  static LodBasis prolongation_only(const RefinementPair& pair);

  std::size_t n_columns() const { return columns_.size(); }
  std::size_t fine_dim() const { return pair_.fine.n_interior(); }
  const RefinementPair& pair() const { return pair_; }
  std::size_t oversampling() const { return oversampling_; }
  const std::string& potential_id() const { return potential_id_; }
  const CorrectorSegment& column(std::size_t j) const { return columns_[j]; }

  /// CSR view (fine dofs x N_H) of the basis.
  const RealCsr& matrix() const { return matrix_; }

  CVec apply(std::span<const cplx> coarse) const;
  RVec apply(std::span<const double> coarse) const;
  CVec apply_transpose(std::span<const cplx> fine) const;
  RVec apply_transpose(std::span<const double> fine) const;

  static LodBasis from_columns(RefinementPair pair, std::size_t ell,
                               std::string potential_id,
                               std::vector<CorrectorSegment> columns);

private:
  LodBasis() = default;
  void build_matrix();

  RefinementPair pair_;
  std::size_t oversampling_ = 0;
  std::string potential_id_;
  std::vector<CorrectorSegment> columns_;
  RealCsr matrix_;
};

/// Galerkin restriction of fine matrices to the basis: B^T X B.
std::pair<RealCsr, RealCsr> lod_matrices(const LodBasis& basis, const RealCsr& M_h,
                                         const RealCsr& A_h);
RealCsr reduce_matrix(const LodBasis& basis, const RealCsr& X);

/// Sparse symmetric rank-3 tensor of triple products of basis functions,
/// stored once per ordered triple i <= j <= k and expanded symmetrically.
class OmegaTensor {
public:
  static OmegaTensor assemble(const LodBasis& basis);

  std::size_t n_indices() const { return n_; }
  std::size_t n_unique() const { return keys_.size(); }

  /// Symmetric lookup; absent entries are structural zeros.
  double value(std::size_t i, std::size_t j, std::size_t k) const;

  /// r_k = sum_{ij} conj(u_i) u_j omega_ijk (complex; imaginary part is a
  /// roundoff diagnostic).
  CVec density_rhs(std::span<const cplx> u) const;
  /// b_k = sum_{ij} rho_i u_j omega_ijk.
  CVec apply(std::span<const double> rho, std::span<const cplx> u) const;

  // Test hook: replace one canonical entry (returns false if absent).
  bool poke(std::size_t i, std::size_t j, std::size_t k, double v);

private:
  void build_slices();

  std::size_t n_ = 0;
  std::vector<std::uint64_t> keys_; // sorted canonical (i<=j<=k) keys
  std::vector<double> vals_;
  // per output index: list of unordered coefficient pairs
  std::vector<std::size_t> slice_off_;
  std::vector<std::uint32_t> pa_, pb_;
  std::vector<double> pw_;
};

/// Reduced mass and bilinear-form matrices plus the triple-product tensor:
/// everything the time integrator needs to advance coefficients in the
/// multiscale space.
class LodSystem {
public:
  LodSystem(std::shared_ptr<const LodBasis> basis, const RealCsr& M_h,
            const RealCsr& A_h, const RealCsr& h1_h);

  std::size_t dim() const { return M_lod_.n_rows(); }
  const LodBasis& basis() const { return *basis_; }
  const RealCsr& mass() const { return M_lod_; }
  const RealCsr& hform() const { return A_lod_; }
  const RealCsr& h1form() const { return H1_lod_; }
  const OmegaTensor& omega() const { return omega_; }
  OmegaTensor& omega_mutable() { return omega_; } // test hook
  const SpdFactorization& mass_factorization() const { return M_factor_; }

  /// Coefficients of the L2 projection of |u|^2 onto the space, computed
  /// through the tensor. Throws if the tensor produces a complex residue.
  RVec project_density(std::span<const cplx> u) const;
  CVec nonlinear(std::span<const cplx> u, double beta) const;
  double modified_energy(std::span<const cplx> u, double beta) const;

private:
  std::shared_ptr<const LodBasis> basis_;
  RealCsr M_lod_;
  RealCsr A_lod_;
  RealCsr H1_lod_;
  OmegaTensor omega_;
  SpdFactorization M_factor_;
};

struct RitzRow {
  std::size_t coarse_elements = 0;
  double H = 0;
  double h1_error = 0;
};

/// Per-level H1 distance between the fine solution of the linear elliptic
/// problem with load f and its Galerkin approximation in the localized space.
std::vector<RitzRow> ritz_error_study(std::span<const LodConfig> configs,
                                      const std::function<double(double)>& f);

// Basis cache: text header plus the CSR streams in little-endian 64-bit.
void write_basis_cache(const std::string& path, const LodBasis& basis);
LodBasis read_basis_cache(const std::string& path);

} // namespace gpelab

#endif
