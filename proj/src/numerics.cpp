#include "gpelab/numerics.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gpelab {

namespace {

template <typename Scalar>
Eigen::SparseMatrix<Scalar> to_eigen(const CsrMatrix<Scalar>& A) {
  using ET = Eigen::Triplet<Scalar>;
  std::vector<ET> trip;
  trip.reserve(A.nnz());
  auto off = A.row_offsets();
  auto cols = A.col_indices();
  auto vals = A.values();
  for (std::size_t i = 0; i < A.n_rows(); ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p)
      trip.emplace_back(static_cast<int>(i), static_cast<int>(cols[p]), vals[p]);
  Eigen::SparseMatrix<Scalar> M(static_cast<int>(A.n_rows()),
                                static_cast<int>(A.n_cols()));
  M.setFromTriplets(trip.begin(), trip.end());
  M.makeCompressed();
  return M;
}

template <typename Scalar>
void check_no_empty_rows(const CsrMatrix<Scalar>& A, const std::string& context) {
  auto off = A.row_offsets();
  for (std::size_t i = 0; i < A.n_rows(); ++i) {
    if (off[i] == off[i + 1]) {
      std::ostringstream os;
      os << "factorize: structurally singular matrix (empty row " << i << ")";
      if (!context.empty()) os << " [" << context << "]";
      throw Error(os.str());
    }
  }
}

} // namespace

template <typename Scalar>
CsrMatrix<Scalar> CsrMatrix<Scalar>::from_triplets(std::vector<Entry> triplets,
                                                   std::size_t n_rows,
                                                   std::size_t n_cols,
                                                   bool symmetric) {
  for (const auto& t : triplets) {
    if (t.row >= n_rows || t.col >= n_cols) {
      std::ostringstream os;
      os << "sparse_from_triplets: entry (" << t.row << ", " << t.col
         << ") outside " << n_rows << "x" << n_cols << " matrix";
      throw Error(os.str());
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Entry& a, const Entry& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });
  CsrMatrix M;
  M.n_rows_ = n_rows;
  M.n_cols_ = n_cols;
  M.symmetric_ = symmetric;
  M.offsets_.assign(n_rows + 1, 0);
  M.cols_.reserve(triplets.size());
  M.vals_.reserve(triplets.size());
  std::size_t i = 0;
  for (std::size_t row = 0; row < n_rows; ++row) {
    while (i < triplets.size() && triplets[i].row == row) {
      const std::size_t col = triplets[i].col;
      Scalar v{};
      while (i < triplets.size() && triplets[i].row == row &&
             triplets[i].col == col) {
        v += triplets[i].value;
        ++i;
      }
      M.cols_.push_back(col);
      M.vals_.push_back(v);
    }
    M.offsets_[row + 1] = M.cols_.size();
  }
  return M;
}

template <typename Scalar>
Scalar CsrMatrix<Scalar>::coeff(std::size_t i, std::size_t j) const {
  require(i < n_rows_ && j < n_cols_, "coeff: index out of range");
  const auto lo = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
  const auto hi = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
  const auto it = std::lower_bound(lo, hi, j);
  if (it == hi || *it != j) return Scalar{};
  return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

template <typename Scalar>
bool CsrMatrix<Scalar>::is_symmetric(double tol) const {
  if (n_rows_ != n_cols_) return false;
  for (std::size_t i = 0; i < n_rows_; ++i)
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
      const Scalar d = vals_[p] - coeff(cols_[p], i);
      if (std::abs(d) > tol) return false;
    }
  return true;
}

template <typename Scalar>
double CsrMatrix<Scalar>::frobenius_norm() const {
  double s = 0;
  for (const Scalar& v : vals_) s += std::norm(cplx(v));
  return std::sqrt(s);
}

template <typename Scalar>
CsrMatrix<Scalar> CsrMatrix<Scalar>::principal_submatrix(std::size_t lo,
                                                         std::size_t hi) const {
  require(lo <= hi && hi < n_rows_ && n_rows_ == n_cols_,
          "principal_submatrix: invalid range");
  const std::size_t n = hi - lo + 1;
  CsrMatrix S;
  S.n_rows_ = S.n_cols_ = n;
  S.symmetric_ = symmetric_;
  S.offsets_.assign(n + 1, 0);
  for (std::size_t i = lo; i <= hi; ++i) {
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
      const std::size_t j = cols_[p];
      if (j >= lo && j <= hi) {
        S.cols_.push_back(j - lo);
        S.vals_.push_back(vals_[p]);
      }
    }
    S.offsets_[i - lo + 1] = S.cols_.size();
  }
  return S;
}

template <typename Scalar>
CsrMatrix<Scalar> CsrMatrix<Scalar>::block(std::size_t row_lo, std::size_t row_hi,
                                           std::size_t col_lo,
                                           std::size_t col_hi) const {
  require(row_lo <= row_hi && row_hi < n_rows_ && col_lo <= col_hi &&
              col_hi < n_cols_,
          "block: invalid range");
  CsrMatrix S;
  S.n_rows_ = row_hi - row_lo + 1;
  S.n_cols_ = col_hi - col_lo + 1;
  S.offsets_.assign(S.n_rows_ + 1, 0);
  for (std::size_t i = row_lo; i <= row_hi; ++i) {
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
      const std::size_t j = cols_[p];
      if (j >= col_lo && j <= col_hi) {
        S.cols_.push_back(j - col_lo);
        S.vals_.push_back(vals_[p]);
      }
    }
    S.offsets_[i - row_lo + 1] = S.cols_.size();
  }
  return S;
}

template class CsrMatrix<double>;
template class CsrMatrix<cplx>;

RVec matvec(const RealCsr& A, std::span<const double> x) {
  RVec y(A.n_rows());
  A.apply<double>(x, y);
  return y;
}

CVec matvec(const RealCsr& A, std::span<const cplx> x) {
  CVec y(A.n_rows());
  A.apply<cplx>(x, y);
  return y;
}

CVec matvec(const ComplexCsr& A, std::span<const cplx> x) {
  CVec y(A.n_rows());
  A.apply<cplx>(x, y);
  return y;
}

// ---------------------------------------------------------------------------

struct SpdFactorization::Impl {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

SpdFactorization::SpdFactorization(const RealCsr& A, const std::string& context)
    : impl_(std::make_unique<Impl>()), dim_(A.n_rows()) {
  require(A.n_rows() == A.n_cols(), "factorize: matrix not square");
  check_no_empty_rows(A, context);
  impl_->llt.compute(to_eigen(A));
  if (impl_->llt.info() != Eigen::Success) {
    std::string msg = "factorize: matrix not positive definite";
    if (!context.empty()) msg += " [" + context + "]";
    throw Error(msg);
  }
}

SpdFactorization::~SpdFactorization() = default;
SpdFactorization::SpdFactorization(SpdFactorization&&) noexcept = default;
SpdFactorization& SpdFactorization::operator=(SpdFactorization&&) noexcept = default;

RVec SpdFactorization::solve(std::span<const double> b) const {
  require(b.size() == dim_, "solve: dimension mismatch");
  Eigen::Map<const Eigen::VectorXd> bm(b.data(), static_cast<long>(b.size()));
  Eigen::VectorXd x = impl_->llt.solve(bm);
  return RVec(x.data(), x.data() + x.size());
}

CVec SpdFactorization::solve(std::span<const cplx> b) const {
  require(b.size() == dim_, "solve: dimension mismatch");
  Eigen::VectorXd re(static_cast<long>(dim_)), im(static_cast<long>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) {
    re[static_cast<long>(i)] = b[i].real();
    im[static_cast<long>(i)] = b[i].imag();
  }
  Eigen::VectorXd xr = impl_->llt.solve(re);
  Eigen::VectorXd xi = impl_->llt.solve(im);
  CVec x(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    x[i] = cplx(xr[static_cast<long>(i)], xi[static_cast<long>(i)]);
  return x;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
struct LuFactorization<Scalar>::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<Scalar>> lu;
};

template <typename Scalar>
LuFactorization<Scalar>::LuFactorization(const CsrMatrix<Scalar>& A,
                                         const std::string& context)
    : impl_(std::make_unique<Impl>()), dim_(A.n_rows()) {
  require(A.n_rows() == A.n_cols(), "factorize: matrix not square");
  check_no_empty_rows(A, context);
  impl_->lu.compute(to_eigen(A));
  if (impl_->lu.info() != Eigen::Success) {
    std::string msg = "factorize: singular matrix";
    if (!context.empty()) msg += " [" + context + "]";
    throw Error(msg);
  }
}

template <typename Scalar>
LuFactorization<Scalar>::~LuFactorization() = default;
template <typename Scalar>
LuFactorization<Scalar>::LuFactorization(LuFactorization&&) noexcept = default;
template <typename Scalar>
LuFactorization<Scalar>& LuFactorization<Scalar>::operator=(
    LuFactorization&&) noexcept = default;

template <typename Scalar>
std::vector<Scalar> LuFactorization<Scalar>::solve(
    std::span<const Scalar> b) const {
  require(b.size() == dim_, "solve: dimension mismatch");
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Eigen::Map<const Vec> bm(b.data(), static_cast<long>(b.size()));
  Vec x = impl_->lu.solve(bm);
  return std::vector<Scalar>(x.data(), x.data() + x.size());
}

template class LuFactorization<double>;
template class LuFactorization<cplx>;

// ---------------------------------------------------------------------------

struct SaddleOperator::Impl {
  const SpdFactorization* F_A = nullptr;
  const RealCsr* C = nullptr;
  Eigen::MatrixXd Z;                   // A^{-1} C^T, one column per constraint
  Eigen::LDLT<Eigen::MatrixXd> S_ldlt; // S = C Z
  std::size_t n = 0, m = 0;
};

SaddleOperator::SaddleOperator(const SpdFactorization& F_A, const RealCsr& C,
                               const std::string& context)
    : impl_(std::make_unique<Impl>()) {
  const std::size_t n = F_A.dim();
  const std::size_t m = C.n_rows();
  require(C.n_cols() == n, "saddle_solve: constraint column count mismatch");
  require(m <= n, "saddle_solve: more constraints than unknowns");
  impl_->F_A = &F_A;
  impl_->C = &C;
  impl_->n = n;
  impl_->m = m;
  if (m == 0) return;

  impl_->Z.resize(static_cast<long>(n), static_cast<long>(m));
  RVec ct(n);
  auto off = C.row_offsets();
  auto cols = C.col_indices();
  auto vals = C.values();
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(ct.begin(), ct.end(), 0.0);
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) ct[cols[p]] = vals[p];
    RVec z = F_A.solve(ct);
    for (std::size_t r = 0; r < n; ++r)
      impl_->Z(static_cast<long>(r), static_cast<long>(i)) = z[r];
  }
  Eigen::MatrixXd S(static_cast<long>(m), static_cast<long>(m));
  RVec cz(m);
  for (std::size_t j = 0; j < m; ++j) {
    RVec zj(n);
    for (std::size_t r = 0; r < n; ++r)
      zj[r] = impl_->Z(static_cast<long>(r), static_cast<long>(j));
    C.apply<double>(zj, cz);
    for (std::size_t i = 0; i < m; ++i)
      S(static_cast<long>(i), static_cast<long>(j)) = cz[i];
  }
  impl_->S_ldlt.compute(S);
  bool rank_ok = impl_->S_ldlt.info() == Eigen::Success;
  if (rank_ok) {
    // The factorization accepts singular PSD matrices; reject tiny pivots.
    const auto d = impl_->S_ldlt.vectorD();
    double dmax = 0;
    for (long i = 0; i < d.size(); ++i) dmax = std::max(dmax, std::abs(d[i]));
    for (long i = 0; i < d.size(); ++i)
      if (!(d[i] > 1e-12 * dmax)) rank_ok = false;
  }
  if (!rank_ok) {
    std::string msg = "saddle_solve: rank-deficient constraint block";
    if (!context.empty()) msg += " [" + context + "]";
    throw Error(msg);
  }
}

SaddleOperator::~SaddleOperator() = default;
SaddleOperator::SaddleOperator(SaddleOperator&&) noexcept = default;

RVec SaddleOperator::solve(std::span<const double> b) const {
  RVec lambda;
  return solve(b, lambda);
}

RVec SaddleOperator::solve(std::span<const double> b, RVec& multipliers) const {
  RVec y = impl_->F_A->solve(b);
  if (impl_->m == 0) {
    multipliers.clear();
    return y;
  }
  RVec cy(impl_->m);
  impl_->C->apply<double>(y, cy);
  Eigen::Map<const Eigen::VectorXd> cym(cy.data(), static_cast<long>(impl_->m));
  Eigen::VectorXd lambda = impl_->S_ldlt.solve(cym);
  Eigen::Map<Eigen::VectorXd> ym(y.data(), static_cast<long>(impl_->n));
  ym -= impl_->Z * lambda;
  multipliers.assign(lambda.data(), lambda.data() + lambda.size());
  return y;
}

RealSaddleSolution saddle_solve(const SpdFactorization& F_A, const RealCsr& C,
                                std::span<const double> b,
                                const std::string& context) {
  require(b.size() == F_A.dim(), "saddle_solve: rhs dimension mismatch");
  if (C.n_rows() == 0) return {F_A.solve(b), {}};
  SaddleOperator op(F_A, C, context);
  RealSaddleSolution out;
  out.x = op.solve(b, out.multipliers);
  return out;
}

SaddleSolution saddle_solve(const SpdFactorization& F_A, const RealCsr& C,
                            std::span<const cplx> b, const std::string& context) {
  require(b.size() == F_A.dim(), "saddle_solve: rhs dimension mismatch");
  const std::size_t n = F_A.dim();
  RVec br(n), bi(n);
  for (std::size_t i = 0; i < n; ++i) {
    br[i] = b[i].real();
    bi[i] = b[i].imag();
  }
  RealSaddleSolution sr = saddle_solve(F_A, C, br, context);
  RealSaddleSolution si = saddle_solve(F_A, C, bi, context);
  SaddleSolution out;
  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.x[i] = cplx(sr.x[i], si.x[i]);
  out.multipliers.resize(sr.multipliers.size());
  for (std::size_t i = 0; i < sr.multipliers.size(); ++i)
    out.multipliers[i] = cplx(sr.multipliers[i], si.multipliers[i]);
  return out;
}

// ---------------------------------------------------------------------------

cplx dot(std::span<const cplx> x, std::span<const cplx> y) {
  require(x.size() == y.size(), "dot: dimension mismatch");
  cplx s{};
  for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

double dot(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "dot: dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const cplx> x) {
  double s = 0;
  for (const cplx& v : x) s += std::norm(v);
  return std::sqrt(s);
}

double norm2(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double norm_inf(std::span<const cplx> x) {
  double s = 0;
  for (const cplx& v : x) s = std::max(s, std::abs(v));
  return s;
}

} // namespace gpelab
