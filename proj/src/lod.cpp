#include "gpelab/lod.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace gpelab {

namespace {

// Patch geometry for coarse element K with `ell` layers, in fine-dof indices.
struct Patch {
  IndexRange coarse;   // coarse element range
  std::size_t dof_lo;  // fine dofs strictly inside the patch
  std::size_t dof_hi;
  std::size_t row_lo;  // constraint rows (coarse dof indices)
  std::size_t row_hi;
};

Patch make_patch(const LodConfig& cfg, std::size_t K) {
  const Mesh1D& coarse = cfg.pair.coarse;
  const std::size_t r = cfg.pair.factor;
  Patch p;
  p.coarse = element_patch(coarse, K, cfg.oversampling);
  p.dof_lo = r * p.coarse.lo;                 // fine node r*lo + 1
  p.dof_hi = r * (p.coarse.hi + 1) - 2;       // fine node r*(hi+1) - 1
  require(p.dof_hi >= p.dof_lo, "element_corrector: empty patch interior");
  const std::size_t n = coarse.n_elements;
  p.row_lo = std::max<std::size_t>(1, p.coarse.lo) - 1;
  p.row_hi = std::min(n - 1, p.coarse.hi + 1) - 1;
  return p;
}

// Hat value of coarse node nu at fine node p (exact integer arithmetic).
double hat_at_fine_node(std::size_t nu, std::size_t p, std::size_t r) {
  const auto d = static_cast<std::ptrdiff_t>(p) -
                 static_cast<std::ptrdiff_t>(nu * r);
  const auto ad = static_cast<std::size_t>(d < 0 ? -d : d);
  if (ad >= r) return 0.0;
  return 1.0 - static_cast<double>(ad) / static_cast<double>(r);
}

// Right-hand side of the local problem: (hat_nu, .)_{H,K} against the fine
// basis, restricted to the patch dofs. Uses the same per-element local
// matrices as the global assembly.
RVec corrector_rhs(const LodConfig& cfg,
                   const std::vector<std::array<double, 4>>& local, std::size_t K,
                   std::size_t nu, const Patch& patch) {
  const std::size_t r = cfg.pair.factor;
  RVec rhs(patch.dof_hi - patch.dof_lo + 1, 0.0);
  const std::size_t nf = cfg.pair.fine.n_elements;
  for (std::size_t e = r * K; e < r * (K + 1); ++e) {
    const double hv0 = hat_at_fine_node(nu, e, r);
    const double hv1 = hat_at_fine_node(nu, e + 1, r);
    const std::size_t nodes[2] = {e, e + 1};
    const double hv[2] = {hv0, hv1};
    for (int a = 0; a < 2; ++a) {
      const std::size_t node = nodes[a];
      if (node == 0 || node == nf) continue;
      const std::size_t dof = node - 1;
      if (dof < patch.dof_lo || dof > patch.dof_hi) continue;
      double acc = 0;
      for (int b = 0; b < 2; ++b) acc += local[e][a * 2 + b] * hv[b];
      rhs[dof - patch.dof_lo] += acc;
    }
  }
  return rhs;
}

struct PatchSolver {
  Patch patch;
  SpdFactorization A_factor;
  RealCsr C_patch;
  SaddleOperator saddle;

  PatchSolver(const LodConfig& cfg, const RealCsr& fine_hform,
              const RealCsr& constraint, std::size_t K, const std::string& ctx)
      : patch(make_patch(cfg, K)),
        A_factor(fine_hform.principal_submatrix(patch.dof_lo, patch.dof_hi), ctx),
        C_patch(constraint.block(patch.row_lo, patch.row_hi, patch.dof_lo,
                                 patch.dof_hi)),
        saddle(A_factor, C_patch, ctx) {}

  CorrectorSegment solve(const LodConfig& cfg,
                         const std::vector<std::array<double, 4>>& local,
                         std::size_t K, std::size_t nu) const {
    RVec rhs = corrector_rhs(cfg, local, K, nu, patch);
    return CorrectorSegment{patch.dof_lo, saddle.solve(rhs)};
  }
};

void axpy_segment(RVec& dense, std::size_t dense_lo, const CorrectorSegment& seg,
                  double alpha) {
  for (std::size_t i = 0; i < seg.values.size(); ++i)
    dense[seg.lo - dense_lo + i] += alpha * seg.values[i];
}

std::uint64_t triple_key(std::size_t i, std::size_t j, std::size_t k) {
  return (static_cast<std::uint64_t>(i) << 42) |
         (static_cast<std::uint64_t>(j) << 21) | static_cast<std::uint64_t>(k);
}

} // namespace

RealCsr coarse_constraint_matrix(const RefinementPair& pair) {
  const std::size_t r = pair.factor;
  const std::size_t n = pair.coarse.n_elements;
  const std::size_t nf = pair.fine.n_elements;
  const double hf = pair.fine.h();
  const QuadratureRule quad = gauss_rule(2); // exact for the bilinear integrand
  std::vector<RealCsr::Entry> trip;
  for (std::size_t nu = 1; nu < n; ++nu) {
    // fine elements covered by the hat of coarse node nu
    const std::size_t e_lo = r * (nu - 1);
    const std::size_t e_hi = r * (nu + 1) - 1;
    for (std::size_t e = e_lo; e <= e_hi; ++e) {
      const double hv0 = hat_at_fine_node(nu, e, r);
      const double hv1 = hat_at_fine_node(nu, e + 1, r);
      for (int a = 0; a < 2; ++a) {
        const std::size_t node = e + static_cast<std::size_t>(a);
        if (node == 0 || node == nf) continue;
        double acc = 0;
        for (std::size_t q = 0; q < quad.points.size(); ++q) {
          const double xi = quad.points[q];
          const double hat = hv0 * (1.0 - xi) + hv1 * xi;
          const double shp = a == 0 ? 1.0 - xi : xi;
          acc += quad.weights[q] * hat * shp;
        }
        trip.push_back({nu - 1, node - 1, hf * acc});
      }
    }
  }
  return RealCsr::from_triplets(std::move(trip), n - 1, nf - 1, false);
}

CorrectorSegment element_corrector(const LodConfig& config,
                                   const RealCsr& fine_hform,
                                   const RealCsr& constraint, std::size_t K,
                                   std::size_t vertex_node) {
  const std::size_t n = config.pair.coarse.n_elements;
  require(K < n, "element_corrector: invalid element");
  require(vertex_node >= 1 && vertex_node <= n - 1,
          "element_corrector: vertex is not an interior node");
  std::ostringstream ctx;
  ctx << "patch of element " << K;
  const FESpace fine_space(config.pair.fine, 1);
  const auto local = local_hform_p1(fine_space, config.potential, config.quad);
  PatchSolver solver(config, fine_hform, constraint, K, ctx.str());
  return solver.solve(config, local, K, vertex_node);
}

LodBasis LodBasis::assemble(const LodConfig& config) {
  const RefinementPair& pair = config.pair;
  const std::size_t n = pair.coarse.n_elements;
  const std::size_t r = pair.factor;
  const std::size_t nf = pair.fine.n_elements;
  const FESpace fine_space(pair.fine, 1);

  const auto local = local_hform_p1(fine_space, config.potential, config.quad);
  const RealCsr A_h = assemble_hform(fine_space, config.potential, config.quad);
  const RealCsr C = coarse_constraint_matrix(pair);

  // One corrector per (element, interior vertex); two slots per element.
  std::vector<std::optional<CorrectorSegment>> corr(2 * n);
  parallel_for(n, config.threads, [&](std::size_t k_lo, std::size_t k_hi) {
    for (std::size_t K = k_lo; K < k_hi; ++K) {
      std::ostringstream ctx;
      ctx << "patch of element " << K;
      PatchSolver solver(config, A_h, C, K, ctx.str());
      for (int side = 0; side < 2; ++side) {
        const std::size_t nu = K + static_cast<std::size_t>(side);
        if (nu < 1 || nu > n - 1) continue;
        corr[2 * K + side] = solver.solve(config, local, K, nu);
      }
    }
  });

  std::vector<CorrectorSegment> columns(n - 1);
  for (std::size_t nu = 1; nu < n; ++nu) {
    const CorrectorSegment& left = *corr[2 * (nu - 1) + 1];  // K = nu-1, right vertex
    const CorrectorSegment& right = *corr[2 * nu];           // K = nu, left vertex
    // Hat support in fine dofs: nodes strictly between r(nu-1) and r(nu+1).
    const std::size_t hat_lo = r * (nu - 1);
    const std::size_t hat_hi = r * (nu + 1) - 2;
    const std::size_t lo = std::min({left.lo, right.lo, hat_lo});
    const std::size_t hi = std::max({left.hi(), right.hi(), hat_hi});
    RVec vals(hi - lo + 1, 0.0);
    for (std::size_t d = hat_lo; d <= hat_hi; ++d)
      vals[d - lo] = hat_at_fine_node(nu, d + 1, r);
    axpy_segment(vals, lo, left, -1.0);
    axpy_segment(vals, lo, right, -1.0);
    columns[nu - 1] = CorrectorSegment{lo, std::move(vals)};
    (void)nf;
  }

  LodBasis basis;
  basis.pair_ = pair;
  basis.oversampling_ = config.oversampling;
  basis.potential_id_ = config.potential.id();
  basis.columns_ = std::move(columns);
  basis.build_matrix();
  return basis;
}

LodBasis LodBasis::prolongation_only(const RefinementPair& pair) {
  const std::size_t n = pair.coarse.n_elements;
  const std::size_t r = pair.factor;
  std::vector<CorrectorSegment> columns(n - 1);
  for (std::size_t nu = 1; nu < n; ++nu) {
    const std::size_t lo = r * (nu - 1);      // dof of fine node r(nu-1)+1
    const std::size_t hi = r * (nu + 1) - 2;  // dof of fine node r(nu+1)-1
    RVec vals(hi - lo + 1, 0.0);
    for (std::size_t d = lo; d <= hi; ++d)
      vals[d - lo] = hat_at_fine_node(nu, d + 1, r);
    columns[nu - 1] = CorrectorSegment{lo, std::move(vals)};
  }
  LodBasis basis;
  basis.pair_ = pair;
  basis.oversampling_ = 0;
  basis.potential_id_ = "none";
  basis.columns_ = std::move(columns);
  basis.build_matrix();
  return basis;
}

LodBasis LodBasis::from_columns(RefinementPair pair, std::size_t ell,
                                std::string potential_id,
                                std::vector<CorrectorSegment> columns) {
  LodBasis basis;
  basis.pair_ = pair;
  basis.oversampling_ = ell;
  basis.potential_id_ = std::move(potential_id);
  basis.columns_ = std::move(columns);
  basis.build_matrix();
  return basis;
}

void LodBasis::build_matrix() {
  std::vector<RealCsr::Entry> trip;
  std::size_t nnz = 0;
  for (const auto& c : columns_) nnz += c.values.size();
  trip.reserve(nnz);
  for (std::size_t j = 0; j < columns_.size(); ++j)
    for (std::size_t i = 0; i < columns_[j].values.size(); ++i)
      trip.push_back({columns_[j].lo + i, j, columns_[j].values[i]});
  matrix_ = RealCsr::from_triplets(std::move(trip), fine_dim(), columns_.size());
}

CVec LodBasis::apply(std::span<const cplx> coarse) const {
  require(coarse.size() == n_columns(), "LodBasis::apply: dimension mismatch");
  CVec fine(fine_dim(), cplx{});
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& col = columns_[j];
    const cplx c = coarse[j];
    for (std::size_t i = 0; i < col.values.size(); ++i)
      fine[col.lo + i] += col.values[i] * c;
  }
  return fine;
}

RVec LodBasis::apply(std::span<const double> coarse) const {
  require(coarse.size() == n_columns(), "LodBasis::apply: dimension mismatch");
  RVec fine(fine_dim(), 0.0);
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& col = columns_[j];
    const double c = coarse[j];
    for (std::size_t i = 0; i < col.values.size(); ++i)
      fine[col.lo + i] += col.values[i] * c;
  }
  return fine;
}

CVec LodBasis::apply_transpose(std::span<const cplx> fine) const {
  require(fine.size() == fine_dim(), "LodBasis::apply_transpose: dimension mismatch");
  CVec out(n_columns(), cplx{});
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& col = columns_[j];
    cplx acc{};
    for (std::size_t i = 0; i < col.values.size(); ++i)
      acc += col.values[i] * fine[col.lo + i];
    out[j] = acc;
  }
  return out;
}

RVec LodBasis::apply_transpose(std::span<const double> fine) const {
  require(fine.size() == fine_dim(), "LodBasis::apply_transpose: dimension mismatch");
  RVec out(n_columns(), 0.0);
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& col = columns_[j];
    double acc = 0;
    for (std::size_t i = 0; i < col.values.size(); ++i)
      acc += col.values[i] * fine[col.lo + i];
    out[j] = acc;
  }
  return out;
}

RealCsr reduce_matrix(const LodBasis& basis, const RealCsr& X) {
  const std::size_t N = basis.n_columns();
  const std::size_t nf = basis.fine_dim();
  require(X.n_rows() == nf && X.n_cols() == nf, "reduce_matrix: size mismatch");
  std::vector<RealCsr::Entry> trip;
  RVec w(nf);
  auto off = X.row_offsets();
  auto cols = X.col_indices();
  auto vals = X.values();
  for (std::size_t j = 0; j < N; ++j) {
    const auto& cj = basis.column(j);
    // w = X * column_j, restricted to the reachable row range.
    const std::size_t w_lo = cj.lo > 0 ? cj.lo - 1 : 0;
    const std::size_t w_hi = std::min(nf - 1, cj.hi() + 1);
    for (std::size_t rix = w_lo; rix <= w_hi; ++rix) {
      double acc = 0;
      for (std::size_t p = off[rix]; p < off[rix + 1]; ++p) {
        const std::size_t c = cols[p];
        if (c >= cj.lo && c <= cj.hi()) acc += vals[p] * cj.values[c - cj.lo];
      }
      w[rix] = acc;
    }
    for (std::size_t i = 0; i <= j; ++i) {
      const auto& ci = basis.column(i);
      const std::size_t overlap_lo = std::max(ci.lo, w_lo);
      const std::size_t overlap_hi = std::min(ci.hi(), w_hi);
      if (overlap_lo > overlap_hi) continue;
      double acc = 0;
      for (std::size_t p = overlap_lo; p <= overlap_hi; ++p)
        acc += ci.values[p - ci.lo] * w[p];
      trip.push_back({i, j, acc});
      if (i != j) trip.push_back({j, i, acc});
    }
  }
  return RealCsr::from_triplets(std::move(trip), N, N, true);
}

std::pair<RealCsr, RealCsr> lod_matrices(const LodBasis& basis, const RealCsr& M_h,
                                         const RealCsr& A_h) {
  return {reduce_matrix(basis, M_h), reduce_matrix(basis, A_h)};
}

// ---------------------------------------------------------------------------

OmegaTensor OmegaTensor::assemble(const LodBasis& basis) {
  const std::size_t N = basis.n_columns();
  const std::size_t nf = basis.pair().fine.n_elements;
  const double hf = basis.pair().fine.h();
  const QuadratureRule quad = gauss_rule(2); // cubic integrand per element

  OmegaTensor t;
  t.n_ = N;
  std::unordered_map<std::uint64_t, double> acc;
  acc.reserve(64 * N);

  // Column values at a fine node (dof + 1) or zero outside the support.
  auto node_val = [&](std::size_t j, std::size_t node) -> double {
    if (node == 0 || node == nf) return 0.0;
    const auto& c = basis.column(j);
    const std::size_t d = node - 1;
    if (d < c.lo || d > c.hi()) return 0.0;
    return c.values[d - c.lo];
  };

  // Accumulate into a dense buffer over the active column window and flush it
  // into the global map whenever the window moves (once per coarse element on
  // nested pairs).
  std::vector<double> fq;  // active-column values at the quadrature points
  std::vector<double> buf; // window-local triple accumulator
  std::size_t cur_lo = 0, cur_W = 0;
  auto flush = [&]() {
    if (cur_W == 0) return;
    for (std::size_t a = 0; a < cur_W; ++a)
      for (std::size_t b = a; b < cur_W; ++b)
        for (std::size_t c = b; c < cur_W; ++c) {
          const double v = buf[(a * cur_W + b) * cur_W + c];
          if (v != 0.0)
            acc[triple_key(cur_lo + a, cur_lo + b, cur_lo + c)] += v;
        }
    std::fill(buf.begin(), buf.end(), 0.0);
  };

  std::size_t win_lo = 0;
  const std::size_t nq = quad.points.size();
  for (std::size_t e = 0; e < nf; ++e) {
    while (win_lo < N && basis.column(win_lo).hi() + 1 < e) ++win_lo;
    std::size_t win_hi = win_lo;
    while (win_hi < N && basis.column(win_hi).lo <= e) ++win_hi;
    const std::size_t W = win_hi - win_lo;
    if (W == 0) continue;
    if (win_lo != cur_lo || W != cur_W) {
      flush();
      cur_lo = win_lo;
      cur_W = W;
      buf.assign(W * W * W, 0.0);
    }
    fq.assign(W * nq, 0.0);
    for (std::size_t w = 0; w < W; ++w) {
      const double v0 = node_val(win_lo + w, e);
      const double v1 = node_val(win_lo + w, e + 1);
      for (std::size_t q = 0; q < nq; ++q)
        fq[w * nq + q] = v0 + (v1 - v0) * quad.points[q];
    }
    for (std::size_t a = 0; a < W; ++a)
      for (std::size_t b = a; b < W; ++b) {
        double pab[8];
        for (std::size_t q = 0; q < nq; ++q)
          pab[q] = hf * quad.weights[q] * fq[a * nq + q] * fq[b * nq + q];
        double* row = &buf[(a * W + b) * W];
        for (std::size_t c = b; c < W; ++c) {
          double s = 0;
          for (std::size_t q = 0; q < nq; ++q) s += pab[q] * fq[c * nq + q];
          row[c] += s;
        }
      }
  }
  flush();

  t.keys_.reserve(acc.size());
  for (const auto& kv : acc) t.keys_.push_back(kv.first);
  std::sort(t.keys_.begin(), t.keys_.end());
  t.vals_.resize(t.keys_.size());
  for (std::size_t i = 0; i < t.keys_.size(); ++i) t.vals_[i] = acc[t.keys_[i]];
  t.build_slices();
  return t;
}

void OmegaTensor::build_slices() {
  constexpr std::uint64_t mask = (1ull << 21) - 1;
  std::vector<std::size_t> count(n_ + 1, 0);
  auto visit = [&](std::uint64_t key, auto&& fn) {
    const std::size_t i = key >> 42;
    const std::size_t j = (key >> 21) & mask;
    const std::size_t k = key & mask;
    fn(i, j, k); // slice k, pair (i, j)
    if (j != k) fn(i, k, j);
    if (i != j) fn(j, k, i);
  };
  for (std::uint64_t key : keys_)
    visit(key, [&](std::size_t, std::size_t, std::size_t c) { ++count[c + 1]; });
  slice_off_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) slice_off_[i + 1] = slice_off_[i] + count[i + 1];
  const std::size_t total = slice_off_[n_];
  pa_.resize(total);
  pb_.resize(total);
  pw_.resize(total);
  std::vector<std::size_t> cursor(slice_off_.begin(), slice_off_.end() - 1);
  for (std::size_t idx = 0; idx < keys_.size(); ++idx) {
    const double v = vals_[idx];
    visit(keys_[idx], [&](std::size_t a, std::size_t b, std::size_t c) {
      const std::size_t pos = cursor[c]++;
      pa_[pos] = static_cast<std::uint32_t>(a);
      pb_[pos] = static_cast<std::uint32_t>(b);
      pw_[pos] = v;
    });
  }
}

double OmegaTensor::value(std::size_t i, std::size_t j, std::size_t k) const {
  std::size_t a = i, b = j, c = k;
  if (a > b) std::swap(a, b);
  if (b > c) std::swap(b, c);
  if (a > b) std::swap(a, b);
  const std::uint64_t key = triple_key(a, b, c);
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return 0.0;
  return vals_[static_cast<std::size_t>(it - keys_.begin())];
}

bool OmegaTensor::poke(std::size_t i, std::size_t j, std::size_t k, double v) {
  std::size_t a = i, b = j, c = k;
  if (a > b) std::swap(a, b);
  if (b > c) std::swap(b, c);
  if (a > b) std::swap(a, b);
  const std::uint64_t key = triple_key(a, b, c);
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return false;
  vals_[static_cast<std::size_t>(it - keys_.begin())] = v;
  build_slices();
  return true;
}

CVec OmegaTensor::density_rhs(std::span<const cplx> u) const {
  require(u.size() == n_, "density_rhs: dimension mismatch");
  CVec r(n_, cplx{});
  for (std::size_t c = 0; c < n_; ++c) {
    cplx acc{};
    for (std::size_t p = slice_off_[c]; p < slice_off_[c + 1]; ++p) {
      const std::size_t a = pa_[p], b = pb_[p];
      if (a == b) {
        acc += pw_[p] * (std::conj(u[a]) * u[a]);
      } else {
        acc += pw_[p] * (std::conj(u[a]) * u[b] + std::conj(u[b]) * u[a]);
      }
    }
    r[c] = acc;
  }
  return r;
}

CVec OmegaTensor::apply(std::span<const double> rho, std::span<const cplx> u) const {
  require(rho.size() == n_ && u.size() == n_, "omega apply: dimension mismatch");
  CVec out(n_, cplx{});
  for (std::size_t c = 0; c < n_; ++c) {
    cplx acc{};
    for (std::size_t p = slice_off_[c]; p < slice_off_[c + 1]; ++p) {
      const std::size_t a = pa_[p], b = pb_[p];
      if (a == b) {
        acc += pw_[p] * rho[a] * u[a];
      } else {
        acc += pw_[p] * (rho[a] * u[b] + rho[b] * u[a]);
      }
    }
    out[c] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------

LodSystem::LodSystem(std::shared_ptr<const LodBasis> basis, const RealCsr& M_h,
                     const RealCsr& A_h, const RealCsr& h1_h)
    : basis_(std::move(basis)),
      M_lod_(reduce_matrix(*basis_, M_h)),
      A_lod_(reduce_matrix(*basis_, A_h)),
      H1_lod_(reduce_matrix(*basis_, h1_h)),
      omega_(OmegaTensor::assemble(*basis_)),
      M_factor_(M_lod_, "reduced mass") {}

RVec LodSystem::project_density(std::span<const cplx> u) const {
  const CVec r = omega_.density_rhs(u);
  double scale = 0, residue = 0;
  for (const cplx& v : r) {
    scale = std::max(scale, std::abs(v));
    residue = std::max(residue, std::abs(v.imag()));
  }
  if (residue > 1e-8 * std::max(1.0, scale))
    throw Error("project_density: complex residue in density pairing "
                "(tensor corruption?)");
  RVec rr(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) rr[i] = r[i].real();
  return M_factor_.solve(rr);
}

CVec LodSystem::nonlinear(std::span<const cplx> u, double beta) const {
  const RVec rho = project_density(u);
  CVec b = omega_.apply(rho, u);
  for (cplx& v : b) v *= beta;
  return b;
}

double LodSystem::modified_energy(std::span<const cplx> u, double beta) const {
  const CVec au = matvec(A_lod_, u);
  const double quad_part = 0.5 * dot(u, au).real();
  if (beta == 0.0) return quad_part;
  const CVec r = omega_.density_rhs(u);
  RVec rr(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) rr[i] = r[i].real();
  const RVec rho = M_factor_.solve(rr);
  double quartic = 0;
  for (std::size_t k = 0; k < rho.size(); ++k) quartic += rho[k] * rr[k];
  return quad_part + 0.25 * beta * quartic;
}

// ---------------------------------------------------------------------------

std::vector<RitzRow> ritz_error_study(std::span<const LodConfig> configs,
                                      const std::function<double(double)>& f) {
  std::vector<RitzRow> rows;
  rows.reserve(configs.size());
  for (const LodConfig& cfg : configs) {
    const FESpace fine_space(cfg.pair.fine, 1);
    const RealCsr A_h = assemble_hform(fine_space, cfg.potential, cfg.quad);
    const RealCsr S_h = assemble_stiffness(fine_space);
    const RealCsr M_h = assemble_mass(fine_space);

    // Fine load vector for f.
    const QuadratureRule lq = gauss_rule(4);
    const Mesh1D& fm = cfg.pair.fine;
    RVec load(fine_space.dim(), 0.0);
    for (std::size_t e = 0; e < fm.n_elements; ++e) {
      const double x0 = fm.node(e);
      const double h = fm.h();
      for (std::size_t q = 0; q < lq.points.size(); ++q) {
        const double x = x0 + lq.points[q] * h;
        const double fv = f(x);
        if (e > 0) load[e - 1] += h * lq.weights[q] * fv * (1.0 - lq.points[q]);
        if (e + 1 < fm.n_elements) load[e] += h * lq.weights[q] * fv * lq.points[q];
      }
    }

    SpdFactorization A_factor(A_h, "fine elliptic solve");
    const RVec v_h = A_factor.solve(load);

    const LodBasis basis = LodBasis::assemble(cfg);
    const RealCsr A_lod = reduce_matrix(basis, A_h);
    const RVec rhs = basis.apply_transpose(std::span<const double>(load));
    SpdFactorization R_factor(A_lod, "reduced elliptic solve");
    const RVec c = R_factor.solve(rhs);
    const RVec lift = basis.apply(std::span<const double>(c));

    RVec diff(v_h.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = v_h[i] - lift[i];
    const RVec sd = matvec(S_h, std::span<const double>(diff));
    const RVec md = matvec(M_h, std::span<const double>(diff));
    double err2 = 0;
    for (std::size_t i = 0; i < diff.size(); ++i)
      err2 += diff[i] * (sd[i] + md[i]);
    rows.push_back(RitzRow{cfg.pair.coarse.n_elements, cfg.pair.coarse.h(),
                           std::sqrt(std::max(0.0, err2))});
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

void write_le_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_le_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_le_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  write_le_u64(os, v);
}

double read_le_f64(std::istream& is) {
  const std::uint64_t v = read_le_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

std::uint64_t csr_checksum(const RealCsr& B) {
  std::uint64_t h = fnv1a(nullptr, 0);
  auto off = B.row_offsets();
  auto cols = B.col_indices();
  auto vals = B.values();
  for (std::size_t v : off) {
    const std::uint64_t x = v;
    h = fnv1a(&x, 8, h);
  }
  for (std::size_t v : cols) {
    const std::uint64_t x = v;
    h = fnv1a(&x, 8, h);
  }
  h = fnv1a(vals.data(), vals.size() * sizeof(double), h);
  return h;
}

} // namespace

void write_basis_cache(const std::string& path, const LodBasis& basis) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "write_basis_cache: cannot open '" + path + "'");
  const RealCsr& B = basis.matrix();
  char head[512];
  std::snprintf(head, sizeof(head),
                "gpelab-lod-basis v1\n"
                "a %.17g\n"
                "b %.17g\n"
                "coarse_elements %zu\n"
                "fine_elements %zu\n"
                "oversampling %zu\n"
                "potential %s\n"
                "checksum %016llx\n"
                "data %zu %zu %zu\n",
                basis.pair().coarse.a, basis.pair().coarse.b,
                basis.pair().coarse.n_elements, basis.pair().fine.n_elements,
                basis.oversampling(), basis.potential_id().c_str(),
                static_cast<unsigned long long>(csr_checksum(B)), B.n_rows(),
                B.n_cols(), B.nnz());
  os << head;
  for (std::size_t v : B.row_offsets()) write_le_u64(os, v);
  for (std::size_t v : B.col_indices()) write_le_u64(os, v);
  for (double v : B.values()) write_le_f64(os, v);
  require(os.good(), "write_basis_cache: write failed for '" + path + "'");
}

LodBasis read_basis_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "read_basis_cache: cannot open '" + path + "'");
  std::string magic;
  std::getline(is, magic);
  require(magic == "gpelab-lod-basis v1",
          "read_basis_cache: bad header in '" + path + "'");
  double a = 0, b = 0;
  std::size_t nc = 0, nfel = 0, ell = 0;
  std::string pot;
  std::uint64_t checksum = 0;
  std::size_t n_rows = 0, n_cols = 0, nnz = 0;
  std::string key;
  while (is >> key) {
    if (key == "a") is >> a;
    else if (key == "b") is >> b;
    else if (key == "coarse_elements") is >> nc;
    else if (key == "fine_elements") is >> nfel;
    else if (key == "oversampling") is >> ell;
    else if (key == "potential") is >> pot;
    else if (key == "checksum") is >> std::hex >> checksum >> std::dec;
    else if (key == "data") {
      is >> n_rows >> n_cols >> nnz;
      is.ignore(1); // trailing newline before the binary payload
      break;
    } else {
      throw Error("read_basis_cache: unknown header key '" + key + "'");
    }
  }
  require(is.good() && n_rows > 0, "read_basis_cache: truncated header");

  std::vector<std::size_t> offsets(n_rows + 1);
  for (auto& v : offsets) v = read_le_u64(is);
  std::vector<std::size_t> cols(nnz);
  for (auto& v : cols) v = read_le_u64(is);
  std::vector<double> vals(nnz);
  for (auto& v : vals) v = read_le_f64(is);
  require(is.good(), "read_basis_cache: truncated payload in '" + path + "'");

  std::vector<RealCsr::Entry> trip;
  trip.reserve(nnz);
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p)
      trip.push_back({i, cols[p], vals[p]});
  RealCsr B = RealCsr::from_triplets(std::move(trip), n_rows, n_cols);
  require(csr_checksum(B) == checksum,
          "read_basis_cache: checksum mismatch in '" + path + "'");

  // Rebuild contiguous columns from the row-major storage.
  std::vector<std::size_t> lo(n_cols, n_rows), hi(n_cols, 0);
  auto off = B.row_offsets();
  auto ci = B.col_indices();
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      lo[ci[p]] = std::min(lo[ci[p]], i);
      hi[ci[p]] = std::max(hi[ci[p]], i);
    }
  std::vector<CorrectorSegment> columns(n_cols);
  for (std::size_t j = 0; j < n_cols; ++j) {
    require(lo[j] <= hi[j], "read_basis_cache: empty basis column");
    columns[j] = CorrectorSegment{lo[j], RVec(hi[j] - lo[j] + 1, 0.0)};
  }
  auto vv = B.values();
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p)
      columns[ci[p]].values[i - columns[ci[p]].lo] = vv[p];

  const RefinementPair pair =
      refinement_pair(uniform_mesh(a, b, nc), uniform_mesh(a, b, nfel));
  return LodBasis::from_columns(pair, ell, pot, std::move(columns));
}

} // namespace gpelab
