#include "gpelab/timeint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gpelab/fem.hpp" // gauss_rule

namespace gpelab {

namespace {

double shifted_legendre(int n, double s) {
  const double x = 2.0 * s - 1.0;
  double p0 = 1.0, p1 = x;
  if (n == 0) return 1.0;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// Lagrange cardinal polynomial l_j of `nodes` evaluated at x.
double lagrange(const RVec& nodes, std::size_t j, double x) {
  double v = 1.0;
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    if (m == j) continue;
    v *= (x - nodes[m]) / (nodes[j] - nodes[m]);
  }
  return v;
}

// Derivative matrix D[m][j] = l_j'(nodes[m]) via barycentric weights.
std::vector<RVec> diff_matrix(const RVec& nodes) {
  const std::size_t n = nodes.size();
  RVec w(n, 1.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t m = 0; m < n; ++m)
      if (m != j) w[j] /= (nodes[j] - nodes[m]);
  std::vector<RVec> D(n, RVec(n, 0.0));
  for (std::size_t m = 0; m < n; ++m) {
    double diag = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == m) continue;
      D[m][j] = (w[j] / w[m]) / (nodes[m] - nodes[j]);
      diag -= D[m][j];
    }
    D[m][m] = diag;
  }
  return D;
}

} // namespace

struct StageOperator::Impl {
  int q = 0;
  double tau = 0;
  std::size_t dim = 0;

  RVec trial_nodes;            // {0, g_1..g_q}
  RVec gauss_pts, gauss_wts;   // q-point rule for the linear integrals
  std::vector<RVec> test_at_g; // psi_a(g_m), a x m
  std::vector<RVec> D;         // derivative matrix at the trial nodes

  // Nonlinear time quadrature (may coincide with the Gauss points).
  RVec nl_pts, nl_wts;
  std::vector<RVec> test_at_nl;   // psi_a(nl_m)
  std::vector<RVec> interp_at_nl; // l_j(nl_m), j = 0..q
  bool nl_at_stages = false;

  RVec eval_at_one; // l_j(1)

  // Block coefficients: K[(a,j)] = i E[a][j] M - tau G[a][j] A.
  std::vector<RVec> E, G;
  RVec E0; // coefficient of u_n in the time-derivative term, per test index

  std::unique_ptr<LuFactorization<cplx>> lu;
};

StageOperator::StageOperator(const SpatialSystem& system, const CgConfig& config)
    : impl_(std::make_unique<Impl>()) {
  Impl& im = *impl_;
  require(config.q >= 1 && config.q <= 4, "StageOperator: q must be in 1..4");
  require(config.tau > 0, "StageOperator: step size must be positive");
  const int q = config.q;
  im.q = q;
  im.tau = config.tau;
  im.dim = system.dim();

  const QuadratureRule g = gauss_rule(q);
  im.gauss_pts = g.points;
  im.gauss_wts = g.weights;
  im.trial_nodes.assign(1, 0.0);
  im.trial_nodes.insert(im.trial_nodes.end(), g.points.begin(), g.points.end());
  im.D = diff_matrix(im.trial_nodes);

  im.test_at_g.assign(q, RVec(q, 0.0));
  for (int a = 0; a < q; ++a)
    for (int m = 0; m < q; ++m)
      im.test_at_g[a][m] = shifted_legendre(a, g.points[m]);

  const int nl_pts = config.nl_time_points > 0 ? config.nl_time_points : q;
  require(nl_pts <= 10, "StageOperator: nonlinear time quadrature limited to 10 points");
  im.nl_at_stages = nl_pts == q;
  const QuadratureRule gn = gauss_rule(nl_pts);
  im.nl_pts = gn.points;
  im.nl_wts = gn.weights;
  im.test_at_nl.assign(q, RVec(nl_pts, 0.0));
  im.interp_at_nl.assign(nl_pts, RVec(q + 1, 0.0));
  for (int a = 0; a < q; ++a)
    for (int m = 0; m < nl_pts; ++m)
      im.test_at_nl[a][m] = shifted_legendre(a, gn.points[m]);
  for (int m = 0; m < nl_pts; ++m)
    for (int j = 0; j <= q; ++j)
      im.interp_at_nl[m][j] = lagrange(im.trial_nodes, j, gn.points[m]);

  im.eval_at_one.resize(q + 1);
  for (int j = 0; j <= q; ++j)
    im.eval_at_one[j] = lagrange(im.trial_nodes, j, 1.0);

  im.E.assign(q, RVec(q + 1, 0.0));
  im.G.assign(q, RVec(q + 1, 0.0));
  im.E0.assign(q, 0.0);
  for (int a = 0; a < q; ++a) {
    for (int j = 0; j <= q; ++j) {
      double e = 0;
      for (int m = 0; m < q; ++m)
        e += g.weights[m] * im.test_at_g[a][m] * im.D[m + 1][j];
      im.E[a][j] = e;
    }
    im.E0[a] = im.E[a][0];
    for (int m = 0; m < q; ++m)
      im.G[a][m + 1] = g.weights[m] * im.test_at_g[a][m];
  }

  // Assemble the q*dim complex block system in dof-major layout
  // (index = p*q + a) to keep the factorization banded.
  const RealCsr& M = system.mass();
  const RealCsr& A = system.hform();
  const std::size_t n = im.dim;
  std::vector<ComplexCsr::Entry> trip;
  trip.reserve(q * q * (M.nnz() + A.nnz()));
  const cplx iu(0.0, 1.0);
  auto add_block = [&](const RealCsr& X, int a, int j, cplx coef) {
    if (coef == cplx{}) return;
    auto off = X.row_offsets();
    auto cols = X.col_indices();
    auto vals = X.values();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t p = off[r]; p < off[r + 1]; ++p)
        trip.push_back({r * static_cast<std::size_t>(q) + a,
                        cols[p] * static_cast<std::size_t>(q) + j,
                        coef * vals[p]});
  };
  for (int a = 0; a < q; ++a)
    for (int j = 1; j <= q; ++j) {
      add_block(M, a, j - 1, iu * im.E[a][j]);
      add_block(A, a, j - 1, cplx(-im.tau * im.G[a][j], 0.0));
    }
  ComplexCsr K = ComplexCsr::from_triplets(std::move(trip), q * n, q * n);
  im.lu = std::make_unique<LuFactorization<cplx>>(K, "cG stage system");
}

StageOperator::~StageOperator() = default;
StageOperator::StageOperator(StageOperator&&) noexcept = default;

StepResult StageOperator::step(const SpatialSystem& system, const CgConfig& config,
                               std::span<const cplx> u_n,
                               std::size_t step_index) const {
  const Impl& im = *impl_;
  const int q = im.q;
  const std::size_t n = im.dim;
  require(u_n.size() == n, "step: state dimension mismatch");

  // Base right-hand side: -i E0[a] M u_n per test index.
  const CVec Mu = matvec(system.mass(), u_n);
  CVec base(q * n);
  const cplx iu(0.0, 1.0);
  for (int a = 0; a < q; ++a)
    for (std::size_t p = 0; p < n; ++p)
      base[p * q + a] = -iu * im.E0[a] * Mu[p];

  std::vector<CVec> stages(q, CVec(u_n.begin(), u_n.end()));
  CVec rhs(q * n);
  CVec packed;
  int iters = 0;
  const std::size_t n_nl = im.nl_pts.size();
  std::vector<CVec> nl_values(n_nl);

  while (true) {
    ++iters;
    rhs = base;
    if (!system.linear()) {
      for (std::size_t m = 0; m < n_nl; ++m) {
        if (im.nl_at_stages) {
          nl_values[m] = system.nonlinear(stages[m]);
        } else {
          CVec um(n, cplx{});
          for (int j = 0; j <= q; ++j) {
            const double c = im.interp_at_nl[m][j];
            const auto& src = j == 0 ? u_n : std::span<const cplx>(stages[j - 1]);
            for (std::size_t p = 0; p < n; ++p) um[p] += c * src[p];
          }
          nl_values[m] = system.nonlinear(um);
        }
      }
      for (int a = 0; a < q; ++a)
        for (std::size_t m = 0; m < n_nl; ++m) {
          const double c = im.tau * im.nl_wts[m] * im.test_at_nl[a][m];
          for (std::size_t p = 0; p < n; ++p)
            rhs[p * q + a] += c * nl_values[m][p];
        }
    }
    packed = im.lu->solve(rhs);

    // Mass-weighted norm of the stage change.
    double change2 = 0;
    for (int j = 0; j < q; ++j) {
      CVec delta(n);
      for (std::size_t p = 0; p < n; ++p)
        delta[p] = packed[p * q + j] - stages[j][p];
      const CVec md = matvec(system.mass(), delta);
      change2 += dot(delta, md).real();
    }
    for (int j = 0; j < q; ++j)
      for (std::size_t p = 0; p < n; ++p) stages[j][p] = packed[p * q + j];

    const double change = std::sqrt(std::max(0.0, change2));
    if (system.linear() || change <= config.fp_tol) break;
    if (iters >= config.max_fp_iters) {
      std::ostringstream os;
      os << "step " << step_index << ": fixed-point iteration did not reach "
         << config.fp_tol << " within " << config.max_fp_iters
         << " iterations (last change " << change << ")";
      throw Error(os.str());
    }
  }

  StepResult out;
  out.fp_iters = iters;
  out.u.assign(n, cplx{});
  for (std::size_t p = 0; p < n; ++p) {
    cplx v = im.eval_at_one[0] * u_n[p];
    for (int j = 1; j <= q; ++j) v += im.eval_at_one[j] * stages[j - 1][p];
    out.u[p] = v;
  }
  out.stages = std::move(stages);
  return out;
}

double Trajectory::energy_drift() const {
  double drift = 0;
  const double scale = std::abs(initial_energy);
  for (const auto& r : records)
    drift = std::max(drift, std::abs(r.energy - initial_energy));
  return scale > 0 ? drift / scale : drift;
}

double Trajectory::mass_drift() const {
  double drift = 0;
  const double scale = std::abs(initial_mass);
  for (const auto& r : records)
    drift = std::max(drift, std::abs(r.mass - initial_mass));
  return scale > 0 ? drift / scale : drift;
}

double Trajectory::mean_fp_iters() const {
  if (records.empty()) return 0;
  double s = 0;
  for (const auto& r : records) s += r.fp_iters;
  return s / static_cast<double>(records.size());
}

double Trajectory::online_seconds() const {
  if (records.empty()) return 0;
  if (records.size() == 1) return records[0].seconds;
  double rest = 0;
  for (std::size_t i = 1; i < records.size(); ++i) rest += records[i].seconds;
  const double mean = rest / static_cast<double>(records.size() - 1);
  return rest + mean;
}

Trajectory integrate(const SpatialSystem& system, const CVec& u0, double T,
                     const CgConfig& config, bool store_all,
                     const StepObserver& observer) {
  require(T >= 0, "integrate: negative final time");
  const double steps_real = T / config.tau;
  const auto N = static_cast<std::size_t>(std::llround(steps_real));
  require(std::abs(static_cast<double>(N) * config.tau - T) <=
              1e-9 * std::max(1.0, std::abs(T)),
          "integrate: T is not an integer multiple of the step size");

  Trajectory traj;
  traj.initial_energy = system.energy(u0);
  traj.initial_mass = [&] {
    const CVec mu = matvec(system.mass(), u0);
    return dot(std::span<const cplx>(u0), std::span<const cplx>(mu)).real();
  }();
  if (store_all) traj.snapshots.push_back(u0);
  if (observer) observer(0, 0.0, u0);
  if (N == 0) {
    traj.final_state = u0;
    return traj;
  }

  using clock = std::chrono::steady_clock;
  const auto setup0 = clock::now();
  StageOperator op(system, config);
  traj.setup_seconds = std::chrono::duration<double>(clock::now() - setup0).count();
  CVec u = u0;
  traj.records.reserve(N);
  for (std::size_t s = 1; s <= N; ++s) {
    const auto t0 = clock::now();
    StepResult res = op.step(system, config, u, s);
    u = std::move(res.u);
    const auto t1 = clock::now();
    StepRecord rec;
    rec.t = static_cast<double>(s) * config.tau;
    rec.energy = system.energy(u);
    const CVec mu = matvec(system.mass(), u);
    rec.mass = dot(std::span<const cplx>(u), std::span<const cplx>(mu)).real();
    rec.fp_iters = res.fp_iters;
    rec.seconds = std::chrono::duration<double>(t1 - t0).count();
    traj.records.push_back(rec);
    if (store_all) traj.snapshots.push_back(u);
    if (observer) observer(s, rec.t, u);
  }
  traj.final_state = std::move(u);
  return traj;
}

std::vector<TimeOrderRow> time_order_study(const SpatialSystem& system,
                                           const CVec& u0, double T,
                                           const CgConfig& base,
                                           const std::vector<double>& taus,
                                           double tau_ref) {
  require(!taus.empty(), "time_order_study: empty step list");
  const double tau_min = *std::min_element(taus.begin(), taus.end());
  require(tau_ref <= tau_min / 4.0 + 1e-15,
          "time_order_study: reference step must be at most min(tau)/4");

  CgConfig ref_cfg = base;
  ref_cfg.tau = tau_ref;
  const Trajectory ref = integrate(system, u0, T, ref_cfg);

  std::vector<TimeOrderRow> rows;
  rows.reserve(taus.size());
  for (double tau : taus) {
    CgConfig cfg = base;
    cfg.tau = tau;
    const Trajectory tr = integrate(system, u0, T, cfg);
    CVec diff(u0.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff[i] = tr.final_state[i] - ref.final_state[i];
    TimeOrderRow row;
    row.tau = tau;
    row.h1_error = system.h1_norm(diff);
    if (!rows.empty())
      row.eoc = std::log2(rows.back().h1_error / row.h1_error) /
                std::log2(rows.back().tau / tau);
    rows.push_back(row);
  }
  return rows;
}

} // namespace gpelab
