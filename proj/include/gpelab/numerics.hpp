#ifndef GPELAB_NUMERICS_HPP
#define GPELAB_NUMERICS_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gpelab/util.hpp"

namespace gpelab {

/// Compressed-sparse-row matrix over double or complex<double>.
/// Column indices are strictly increasing within each row and duplicates are
/// summed at construction. The symmetric flag is a promise made by the
/// assembling code; is_symmetric() verifies it entrywise.
template <typename Scalar>
class CsrMatrix {
public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    Scalar value;
  };

  CsrMatrix() = default;

  static CsrMatrix from_triplets(std::vector<Entry> triplets, std::size_t n_rows,
                                 std::size_t n_cols, bool symmetric = false);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t nnz() const { return cols_.size(); }
  bool symmetric_flag() const { return symmetric_; }
  void set_symmetric_flag(bool s) { symmetric_ = s; }

  std::span<const std::size_t> row_offsets() const { return offsets_; }
  std::span<const std::size_t> col_indices() const { return cols_; }
  std::span<const Scalar> values() const { return vals_; }

  Scalar coeff(std::size_t i, std::size_t j) const;
  bool is_symmetric(double tol) const;
  double frobenius_norm() const;

  /// Principal submatrix over a contiguous index range [lo, hi] (inclusive).
  CsrMatrix principal_submatrix(std::size_t lo, std::size_t hi) const;

  /// Rectangular block over contiguous inclusive row/column ranges.
  CsrMatrix block(std::size_t row_lo, std::size_t row_hi, std::size_t col_lo,
                  std::size_t col_hi) const;

  template <typename T>
  void apply(std::span<const T> x, std::span<T> y) const {
    require(x.size() == n_cols_ && y.size() == n_rows_,
            "matvec: dimension mismatch");
    for (std::size_t i = 0; i < n_rows_; ++i) {
      T acc{};
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
        acc += vals_[p] * x[cols_[p]];
      y[i] = acc;
    }
  }

  template <typename T>
  void apply_transpose(std::span<const T> x, std::span<T> y) const {
    require(x.size() == n_rows_ && y.size() == n_cols_,
            "matvec^T: dimension mismatch");
    std::fill(y.begin(), y.end(), T{});
    for (std::size_t i = 0; i < n_rows_; ++i)
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
        y[cols_[p]] += vals_[p] * x[i];
  }

private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> cols_;
  std::vector<Scalar> vals_;
  bool symmetric_ = false;
};

using RealCsr = CsrMatrix<double>;
using ComplexCsr = CsrMatrix<cplx>;

RVec matvec(const RealCsr& A, std::span<const double> x);
CVec matvec(const RealCsr& A, std::span<const cplx> x);
CVec matvec(const ComplexCsr& A, std::span<const cplx> x);

/// Sparse Cholesky of a real symmetric positive definite matrix.
/// Complex right-hand sides are solved as two real solves.
class SpdFactorization {
public:
  explicit SpdFactorization(const RealCsr& A, const std::string& context = "");
  ~SpdFactorization();
  SpdFactorization(SpdFactorization&&) noexcept;
  SpdFactorization& operator=(SpdFactorization&&) noexcept;

  std::size_t dim() const { return dim_; }
  RVec solve(std::span<const double> b) const;
  CVec solve(std::span<const cplx> b) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t dim_ = 0;
};

/// Sparse LU of a general square matrix (real or complex).
template <typename Scalar>
class LuFactorization {
public:
  explicit LuFactorization(const CsrMatrix<Scalar>& A,
                           const std::string& context = "");
  ~LuFactorization();
  LuFactorization(LuFactorization&&) noexcept;
  LuFactorization& operator=(LuFactorization&&) noexcept;

  std::size_t dim() const { return dim_; }
  std::vector<Scalar> solve(std::span<const Scalar> b) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t dim_ = 0;
};

struct SaddleSolution {
  CVec x;
  CVec multipliers;
};
struct RealSaddleSolution {
  RVec x;
  RVec multipliers;
};

/// Solves the KKT system  A x + C^T lambda = b,  C x = 0  via the Schur
/// complement S = C A^{-1} C^T. F_A must factorize the SPD block A; C holds
/// the m constraint rows. Rank deficiency of S is reported with `context`.
SaddleSolution saddle_solve(const SpdFactorization& F_A, const RealCsr& C,
                            std::span<const cplx> b,
                            const std::string& context = "");
RealSaddleSolution saddle_solve(const SpdFactorization& F_A, const RealCsr& C,
                                std::span<const double> b,
                                const std::string& context = "");

/// Shared Schur-complement data for repeated saddle solves against one patch:
/// keeps Z = A^{-1} C^T and a dense factorization of S = C Z.
class SaddleOperator {
public:
  SaddleOperator(const SpdFactorization& F_A, const RealCsr& C,
                 const std::string& context = "");
  ~SaddleOperator();
  SaddleOperator(SaddleOperator&&) noexcept;

  RVec solve(std::span<const double> b) const;
  RVec solve(std::span<const double> b, RVec& multipliers) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Inner products and norms; dot conjugates its first argument.
cplx dot(std::span<const cplx> x, std::span<const cplx> y);
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const cplx> x);
double norm2(std::span<const double> x);
double norm_inf(std::span<const cplx> x);

} // namespace gpelab

#endif
