#include "gpelab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gpelab/groundstate.hpp"

namespace gpelab {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "gpelab 0.1.0";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    require(pos == v.size(), "trailing characters");
    return d;
  } catch (const std::exception&) {
    throw Error("config: cannot parse number '" + v + "' for key '" + key + "'");
  }
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int i = std::stoi(v, &pos);
    require(pos == v.size(), "trailing characters");
    return i;
  } catch (const std::exception&) {
    throw Error("config: cannot parse integer '" + v + "' for key '" + key + "'");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16g", v);
  return buf;
}

std::size_t level_elements(int level) {
  require(level >= 1 && level <= 24, "config: level out of range 1..24");
  return std::size_t{1} << level;
}

int method_rank(const std::string& m) {
  if (m == "lod") return 0;
  if (m == "p1") return 1;
  if (m == "p2") return 2;
  if (m == "p3") return 3;
  throw Error("config: unknown method '" + m + "'");
}

int method_order(const std::string& m) {
  if (m == "p1") return 1;
  if (m == "p2") return 2;
  if (m == "p3") return 3;
  throw Error("method_order: not a Lagrange method: '" + m + "'");
}

void require_dir(const std::string& dir) {
  require(fs::is_directory(dir),
          "output directory '" + dir + "' does not exist");
}

std::uint64_t string_hash(const std::string& s) { return fnv1a(s.data(), s.size()); }

void write_manifest(const ExperimentConfig& cfg, const std::string& name,
                    const std::vector<std::pair<std::string, std::string>>& items) {
  std::ofstream os(fs::path(cfg.outputs.dir) / ("manifest_" + name + ".txt"));
  if (!os.good()) return; // manifests are best effort
  os << "version " << kVersion << "\n";
  if (!cfg.source_path.empty()) {
    os << "config " << cfg.source_path << "\n";
    std::ifstream c(cfg.source_path, std::ios::binary);
    if (c.good()) {
      std::stringstream ss;
      ss << c.rdbuf();
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%016llx",
                    static_cast<unsigned long long>(string_hash(ss.str())));
      os << "config_checksum " << buf << "\n";
    }
  }
  for (const auto& [k, v] : items) os << k << " " << v << "\n";
}

std::string hash_of_file(const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(file_checksum(path)));
  return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// Config parsing

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', "config line " + std::to_string(lineno) +
                                      ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    if (qual == "problem.a") cfg.problem.a = parse_double(value, qual);
    else if (qual == "problem.b") cfg.problem.b = parse_double(value, qual);
    else if (qual == "problem.beta") cfg.problem.beta = parse_double(value, qual);
    else if (qual == "problem.T") cfg.problem.T = parse_double(value, qual);
    else if (qual == "problem.potential") cfg.problem.potential = value;
    else if (qual == "initial.snapshot") cfg.initial.snapshot = value;
    else if (qual == "initial.tolerance") cfg.initial.tolerance = parse_double(value, qual);
    else if (qual == "initial.max_iters") cfg.initial.max_iters = parse_int(value, qual);
    else if (qual == "initial.sigma") cfg.initial.sigma = parse_double(value, qual);
    else if (qual == "discretization.method") cfg.discretization.method = value;
    else if (qual == "discretization.coarse_level")
      cfg.discretization.coarse_level = parse_int(value, qual);
    else if (qual == "discretization.fine_level")
      cfg.discretization.fine_level = parse_int(value, qual);
    else if (qual == "discretization.oversampling")
      cfg.discretization.oversampling = value;
    else if (qual == "time.q") cfg.time.q = parse_int(value, qual);
    else if (qual == "time.tau") cfg.time.tau = parse_double(value, qual);
    else if (qual == "time.fp_tol") cfg.time.fp_tol = parse_double(value, qual);
    else if (qual == "time.max_fp_iters") cfg.time.max_fp_iters = parse_int(value, qual);
    else if (qual == "time.nl_quad_points")
      cfg.time.nl_quad_points = parse_int(value, qual);
    else if (qual == "outputs.dir") cfg.outputs.dir = value;
    else if (qual == "outputs.snapshot_cadence")
      cfg.outputs.snapshot_cadence = parse_int(value, qual);
    else if (qual == "outputs.reference") cfg.outputs.reference = value;
    else throw Error("config line " + std::to_string(lineno) + ": unknown key '" +
                     qual + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  ExperimentConfig cfg = parse_string(ss.str());
  cfg.source_path = path;
  return cfg;
}

void ExperimentConfig::validate() const {
  require(problem.b > problem.a, "config: problem.b must exceed problem.a");
  require(problem.beta >= 0, "config: problem.beta must be nonnegative");
  require(problem.T >= 0, "config: problem.T must be nonnegative");
  require(problem.potential == "V1" || problem.potential == "V2",
          "config: problem.potential must be V1 or V2");
  method_rank(discretization.method);
  require(discretization.coarse_level >= 1, "config: coarse_level must be positive");
  require(discretization.fine_level >= 1, "config: fine_level must be positive");
  if (discretization.method == "lod")
    require(discretization.fine_level > discretization.coarse_level,
            "config: fine_level must exceed coarse_level for the lod method");
  require(time.q >= 1 && time.q <= 4, "config: time.q must be in 1..4");
  require(time.tau > 0, "config: time.tau must be positive");
  require(time.fp_tol > 0, "config: time.fp_tol must be positive");
  if (discretization.oversampling != "auto")
    parse_int(discretization.oversampling, "discretization.oversampling");
}

std::string ExperimentConfig::reference_path() const {
  if (!outputs.reference.empty()) return outputs.reference;
  return (fs::path(outputs.dir) / ("reference_" + problem.potential + ".snap"))
      .string();
}

std::string ExperimentConfig::groundstate_path() const {
  if (!initial.snapshot.empty()) return initial.snapshot;
  return (fs::path(outputs.dir) / "groundstate.snap").string();
}

CgConfig ExperimentConfig::cg() const {
  CgConfig c;
  c.q = time.q;
  c.tau = time.tau;
  c.fp_tol = time.fp_tol;
  c.max_fp_iters = time.max_fp_iters;
  c.nl_time_points = time.nl_quad_points;
  return c;
}

Potential ExperimentConfig::make_potential() const {
  return Potential::by_id(problem.potential);
}

std::size_t ExperimentConfig::oversampling_layers(int coarse_level) const {
  const std::size_t n = level_elements(coarse_level);
  std::size_t ell;
  if (discretization.oversampling == "auto") {
    ell = static_cast<std::size_t>(coarse_level + 5);
  } else {
    const int v = parse_int(discretization.oversampling, "oversampling");
    require(v >= 1, "config: oversampling must be >= 1");
    ell = static_cast<std::size_t>(v);
  }
  return std::min(ell, n); // patches cannot grow past the whole domain
}

void apply_paper_scale(ExperimentConfig& cfg) {
  cfg.discretization.fine_level = 16;
  if (cfg.discretization.coarse_level < 7) cfg.discretization.coarse_level = 7;
}

// ---------------------------------------------------------------------------
// Reports

std::string StudyReport::to_csv() const {
  std::ostringstream os;
  os << "method,i,H,dofs,h1_error,l2_error,eoc_h1,online_seconds,"
        "offline_seconds,energy_drift,mean_fp_iters\n";
  for (const RunRow& r : rows) {
    os << r.method << ',' << r.level << ',' << fmt(r.H) << ',' << r.dofs << ','
       << fmt(r.h1_error) << ',' << fmt(r.l2_error) << ','
       << (r.eoc_h1 ? fmt(*r.eoc_h1) : std::string()) << ','
       << fmt(r.online_seconds) << ',' << fmt(r.offline_seconds) << ','
       << fmt(r.energy_drift) << ',' << fmt(r.mean_fp_iters) << '\n';
  }
  return os.str();
}

void StudyReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  require(os.good(), "write_csv: cannot open '" + path + "'");
  os << to_csv();
  require(os.good(), "write_csv: write failed");
}

double StudyReport::eoc_slope(const std::string& method, double floor) const {
  std::vector<double> x, y;
  for (const RunRow& r : rows) {
    if (r.method != method || r.failed) continue;
    if (!(r.h1_error > floor)) continue;
    x.push_back(static_cast<double>(r.level));
    y.push_back(std::log2(r.h1_error));
  }
  require(x.size() >= 2, "eoc_slope: fewer than two usable levels for " + method);
  return -least_squares_slope(x, y);
}

std::string LocalizationReport::to_csv() const {
  std::ostringstream os;
  os << "ell,h1_gap,ratio\n";
  for (const auto& r : rows)
    os << r.ell << ',' << fmt(r.h1_gap) << ','
       << (r.ratio > 0 ? fmt(r.ratio) : std::string()) << '\n';
  return os.str();
}

void LocalizationReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  require(os.good(), "write_csv: cannot open '" + path + "'");
  os << to_csv();
}

std::string TimeOrderReport::to_csv() const {
  std::ostringstream os;
  os << "tau,h1_error,eoc\n";
  for (const auto& r : rows)
    os << fmt(r.tau) << ',' << fmt(r.h1_error) << ','
       << (r.eoc != 0 ? fmt(r.eoc) : std::string()) << '\n';
  return os.str();
}

void TimeOrderReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  require(os.good(), "write_csv: cannot open '" + path + "'");
  os << to_csv();
}

// ---------------------------------------------------------------------------
// Commands

std::string cmd_groundstate(const ExperimentConfig& cfg) {
  require_dir(cfg.outputs.dir);
  const std::size_t n = level_elements(cfg.discretization.fine_level);
  const FESpace space(uniform_mesh(cfg.problem.a, cfg.problem.b, n), 1);
  GroundStateConfig gs(space);
  gs.beta = cfg.problem.beta;
  gs.tolerance = cfg.initial.tolerance;
  gs.max_iters = cfg.initial.max_iters;
  gs.sigma = cfg.initial.sigma;
  const GroundStateResult result = sobolev_gradient_descent(gs);

  Snapshot snap = make_snapshot(result.state, 0.0);
  snap.extras["kind"] = "groundstate";
  snap.extras["beta"] = fmt(cfg.problem.beta);
  snap.extras["energy"] = fmt(result.energy);
  snap.extras["lambda"] = fmt(result.lambda);
  snap.extras["iterations"] = std::to_string(result.iterations);
  snap.extras["tolerance"] = fmt(cfg.initial.tolerance);
  snap.extras["sigma"] = fmt(cfg.initial.sigma);
  const std::string path = cfg.groundstate_path();
  write_snapshot(path, snap);
  write_manifest(cfg, "groundstate",
                 {{"output", path}, {"output_checksum", hash_of_file(path)}});
  return path;
}

namespace {

FEFunction load_groundstate(const ExperimentConfig& cfg) {
  const std::string path = cfg.groundstate_path();
  const Snapshot snap = read_snapshot(path);
  require(snap.order == 1, "ground-state snapshot is not a P1 function");
  require(snap.n_elements == level_elements(cfg.discretization.fine_level),
          "ground-state snapshot mesh does not match fine_level");
  require(snap.a == cfg.problem.a && snap.b == cfg.problem.b,
          "ground-state snapshot interval does not match the problem");
  return snap.function();
}

StepObserver cadence_observer(const ExperimentConfig& cfg, const FESpace& space,
                              const std::string& tag) {
  if (cfg.outputs.snapshot_cadence <= 0) return {};
  const int cadence = cfg.outputs.snapshot_cadence;
  const std::string dir = cfg.outputs.dir;
  return [cadence, dir, space, tag](std::size_t step, double t, const CVec& u) {
    if (step % static_cast<std::size_t>(cadence) != 0) return;
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%06zu.snap", tag.c_str(), step);
    Snapshot s = make_snapshot(FEFunction(space, u), t);
    s.extras["kind"] = "state";
    write_snapshot((fs::path(dir) / name).string(), s);
  };
}

} // namespace

std::string cmd_reference(const ExperimentConfig& cfg) {
  require_dir(cfg.outputs.dir);
  const FEFunction u0 = load_groundstate(cfg);
  const Potential V = cfg.make_potential();
  PkSystem system(u0.space, V, cfg.problem.beta);

  const std::string path = cfg.reference_path();
  CVec last_state = u0.coefficients;
  double last_t = 0;
  StepObserver user_obs = cadence_observer(cfg, u0.space, "reference_state");
  StepObserver obs = [&](std::size_t step, double t, const CVec& u) {
    last_state = u;
    last_t = t;
    if (user_obs) user_obs(step, t, u);
  };

  Trajectory traj;
  try {
    traj = integrate(system, u0.coefficients, cfg.problem.T, cfg.cg(), false, obs);
  } catch (const Error& e) {
    Snapshot partial = make_snapshot(FEFunction(u0.space, last_state), last_t);
    partial.extras["kind"] = "partial_reference";
    partial.extras["error"] = "aborted";
    write_snapshot(path + ".partial", partial);
    throw Error(std::string(e.what()) + " (partial trajectory in '" + path +
                ".partial')");
  }

  Snapshot snap = make_snapshot(FEFunction(u0.space, traj.final_state),
                                cfg.problem.T);
  snap.extras["kind"] = "reference";
  snap.extras["potential"] = cfg.problem.potential;
  snap.extras["beta"] = fmt(cfg.problem.beta);
  snap.extras["tau"] = fmt(cfg.time.tau);
  snap.extras["q"] = std::to_string(cfg.time.q);
  snap.extras["energy_drift"] = fmt(traj.energy_drift());
  write_snapshot(path, snap);
  write_manifest(cfg, "reference",
                 {{"groundstate", cfg.groundstate_path()},
                  {"groundstate_checksum", hash_of_file(cfg.groundstate_path())},
                  {"output", path},
                  {"output_checksum", hash_of_file(path)}});
  return path;
}

namespace {

struct BuiltSystem {
  std::unique_ptr<SpatialSystem> system;
  CVec u0;
  double offline_seconds = 0;
  std::size_t dofs = 0;
  double H = 0;
  // Lifts method coefficients to a function comparable with the reference.
  std::function<FEFunction(const CVec&)> lift;
};

std::string basis_cache_path(const ExperimentConfig& cfg, std::size_t nc,
                             std::size_t nfel, std::size_t ell,
                             const std::string& pot) {
  const fs::path dir = fs::path(cfg.outputs.dir) / "cache";
  fs::create_directories(dir);
  std::ostringstream name;
  name << "basis_c" << nc << "_f" << nfel << "_l" << ell << "_" << pot << ".lodb";
  return (dir / name.str()).string();
}

BuiltSystem build_system(const ExperimentConfig& cfg, int level,
                         const FEFunction& u0_fine) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  BuiltSystem out;
  const std::string& method = cfg.discretization.method;
  const Potential V = cfg.make_potential();
  const double beta = cfg.problem.beta;

  if (method == "lod") {
    const std::size_t nc = level_elements(level);
    const std::size_t nfel = level_elements(cfg.discretization.fine_level);
    require(u0_fine.space.mesh().n_elements == nfel,
            "build_system: initial value is not on the lod fine mesh");
    const RefinementPair pair = refinement_pair(
        uniform_mesh(cfg.problem.a, cfg.problem.b, nc),
        uniform_mesh(cfg.problem.a, cfg.problem.b, nfel));
    const std::size_t ell = cfg.oversampling_layers(level);

    LodConfig lod_cfg(pair, ell, V);
    lod_cfg.threads = cfg.threads;

    std::shared_ptr<const LodBasis> basis;
    const std::string cache = basis_cache_path(cfg, nc, nfel, ell, V.id());
    if (fs::exists(cache)) {
      LodBasis loaded = read_basis_cache(cache);
      require(loaded.pair().coarse.n_elements == nc &&
                  loaded.pair().fine.n_elements == nfel &&
                  loaded.oversampling() == ell && loaded.potential_id() == V.id(),
              "basis cache '" + cache + "' does not match the requested basis");
      basis = std::make_shared<LodBasis>(std::move(loaded));
    } else {
      basis = std::make_shared<LodBasis>(LodBasis::assemble(lod_cfg));
      write_basis_cache(cache, *basis);
    }

    const FESpace fine_space(pair.fine, 1);
    const RealCsr M_h = assemble_mass(fine_space);
    const RealCsr A_h = assemble_hform(fine_space, V,
                                       default_linear_quadrature(1, V));
    const RealCsr S_h = assemble_stiffness(fine_space);
    std::vector<RealCsr::Entry> trip;
    {
      auto push_all = [&](const RealCsr& X) {
        auto off = X.row_offsets();
        auto cols = X.col_indices();
        auto vals = X.values();
        for (std::size_t i = 0; i < X.n_rows(); ++i)
          for (std::size_t p = off[i]; p < off[i + 1]; ++p)
            trip.push_back({i, cols[p], vals[p]});
      };
      push_all(S_h);
      push_all(M_h);
    }
    const RealCsr H1_h = RealCsr::from_triplets(std::move(trip), fine_space.dim(),
                                                fine_space.dim(), true);
    auto lod_system = std::make_shared<LodSystem>(basis, M_h, A_h, H1_h);

    const CVec Mu0 = matvec(M_h, std::span<const cplx>(u0_fine.coefficients));
    const CVec rhs = basis->apply_transpose(std::span<const cplx>(Mu0));
    out.u0 = lod_system->mass_factorization().solve(rhs);

    out.dofs = lod_system->dim();
    out.H = pair.coarse.h();
    auto basis_ref = basis;
    FESpace lift_space = fine_space;
    out.lift = [basis_ref, lift_space](const CVec& c) {
      return FEFunction(lift_space, basis_ref->apply(std::span<const cplx>(c)));
    };
    out.system = std::make_unique<LodSpatialSystem>(lod_system, beta);
  } else {
    const int k = method_order(method);
    const std::size_t n = level_elements(level);
    const FESpace space(uniform_mesh(cfg.problem.a, cfg.problem.b, n), k);
    FEFunction u0 = l2_project(space, u0_fine);
    out.u0 = u0.coefficients;
    out.dofs = space.dim();
    out.H = space.mesh().h();
    out.lift = [space](const CVec& c) { return FEFunction(space, c); };
    out.system = std::make_unique<PkSystem>(space, V, beta);
  }
  out.offline_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return out;
}

} // namespace

RunRow cmd_run(const ExperimentConfig& cfg, const std::string& reference_path) {
  using clock = std::chrono::steady_clock;
  const auto wall0 = clock::now();
  require_dir(cfg.outputs.dir);

  const Snapshot ref_snap = read_snapshot(reference_path);
  require(ref_snap.a == cfg.problem.a && ref_snap.b == cfg.problem.b,
          "reference snapshot interval does not match the problem");
  const FEFunction u_ref = ref_snap.function();

  const FEFunction u0_fine = load_groundstate(cfg);
  const int level = cfg.discretization.coarse_level;

  // The reference mesh must refine every mesh used by the run.
  {
    const std::size_t n_run =
        cfg.discretization.method == "lod"
            ? level_elements(cfg.discretization.fine_level)
            : level_elements(level);
    require(ref_snap.n_elements >= n_run && ref_snap.n_elements % n_run == 0,
            "reference mesh does not refine the run's mesh");
  }

  BuiltSystem built = build_system(cfg, level, u0_fine);

  StepObserver obs;
  Trajectory traj;
  if (cfg.outputs.snapshot_cadence > 0) {
    const int cadence = cfg.outputs.snapshot_cadence;
    const std::string dir = cfg.outputs.dir;
    auto lift = built.lift;
    const std::string tag = cfg.discretization.method + "_state";
    obs = [cadence, dir, lift, tag](std::size_t step, double t, const CVec& u) {
      if (step % static_cast<std::size_t>(cadence) != 0) return;
      char name[96];
      std::snprintf(name, sizeof(name), "%s_%06zu.snap", tag.c_str(), step);
      Snapshot s = make_snapshot(lift(u), t);
      s.extras["kind"] = "state";
      write_snapshot((fs::path(dir) / name).string(), s);
    };
  }

  traj = integrate(*built.system, built.u0, cfg.problem.T, cfg.cg(), false, obs);

  FEFunction lifted = built.lift(traj.final_state);
  // Lift further if the reference lives on a strictly finer mesh.
  FEFunction compare = lifted;
  if (lifted.space.order() == 1 &&
      ref_snap.n_elements > lifted.space.mesh().n_elements) {
    const RefinementPair pair =
        refinement_pair(lifted.space.mesh(), u_ref.space.mesh());
    compare = prolong(lifted, pair);
  }
  const ErrorPair err = fe_errors(compare, u_ref);

  RunRow row;
  row.method = cfg.discretization.method;
  row.level = level;
  row.H = built.H;
  row.dofs = built.dofs;
  row.h1_error = err.h1;
  row.l2_error = err.l2;
  row.online_seconds = traj.online_seconds();
  row.offline_seconds = built.offline_seconds + traj.setup_seconds;
  row.energy_drift = traj.energy_drift();
  row.mean_fp_iters = traj.mean_fp_iters();

  const double total = std::chrono::duration<double>(clock::now() - wall0).count();
  require(row.offline_seconds + row.online_seconds <= 1.05 * total + 1e-6,
          "timing accounting violated: offline + online exceeds total wall time");

  std::ostringstream tag;
  tag << "run_" << row.method << "_i" << level;
  write_manifest(cfg, tag.str(),
                 {{"reference", reference_path},
                  {"reference_checksum", hash_of_file(reference_path)},
                  {"groundstate", cfg.groundstate_path()},
                  {"groundstate_checksum", hash_of_file(cfg.groundstate_path())},
                  {"h1_error", fmt(row.h1_error)},
                  {"total_wall_seconds", fmt(total)}});
  return row;
}

StudyReport cmd_study(const ExperimentConfig& cfg, const std::vector<int>& levels,
                      const std::vector<std::string>& methods) {
  require(!levels.empty() && !methods.empty(), "cmd_study: empty schedule");
  require_dir(cfg.outputs.dir);
  std::vector<std::string> ms = methods;
  std::sort(ms.begin(), ms.end(),
            [](const auto& x, const auto& y) { return method_rank(x) < method_rank(y); });
  std::vector<int> ls = levels;
  std::sort(ls.begin(), ls.end());

  StudyReport report;
  for (const std::string& m : ms) {
    for (int i : ls) {
      ExperimentConfig run_cfg = cfg;
      run_cfg.discretization.method = m;
      run_cfg.discretization.coarse_level = i;
      RunRow row;
      try {
        row = cmd_run(run_cfg, cfg.reference_path());
      } catch (const Error& e) {
        row.method = m;
        row.level = i;
        row.H = (cfg.problem.b - cfg.problem.a) /
                static_cast<double>(level_elements(i));
        row.failed = true;
        row.note = e.what();
        row.h1_error = std::nan("");
        row.l2_error = std::nan("");
        row.energy_drift = std::nan("");
        std::cerr << "[study] run " << m << " i=" << i << " failed: " << e.what()
                  << "\n";
      }
      report.rows.push_back(std::move(row));
    }
    // EOC between consecutive levels of one method.
    RunRow* prev = nullptr;
    for (RunRow& r : report.rows) {
      if (r.method != m) continue;
      if (prev && !prev->failed && !r.failed && r.h1_error > 0)
        r.eoc_h1 = std::log2(prev->h1_error / r.h1_error) /
                   static_cast<double>(r.level - prev->level);
      prev = &r;
    }
  }
  const std::string csv =
      (fs::path(cfg.outputs.dir) / ("study_" + cfg.problem.potential + ".csv"))
          .string();
  report.write_csv(csv);
  write_manifest(cfg, "study_" + cfg.problem.potential,
                 {{"reference", cfg.reference_path()},
                  {"reference_checksum", hash_of_file(cfg.reference_path())},
                  {"csv", csv}});
  return report;
}

LocalizationReport cmd_localization_study(const ExperimentConfig& cfg,
                                          const std::vector<std::size_t>& ells) {
  require(!ells.empty(), "cmd_localization_study: empty layer list");
  require_dir(cfg.outputs.dir);
  const std::size_t nc = level_elements(cfg.discretization.coarse_level);
  const std::size_t nfel = level_elements(cfg.discretization.fine_level);
  const RefinementPair pair =
      refinement_pair(uniform_mesh(cfg.problem.a, cfg.problem.b, nc),
                      uniform_mesh(cfg.problem.a, cfg.problem.b, nfel));
  const Potential V = cfg.make_potential();

  const FESpace fine_space(pair.fine, 1);
  const RealCsr S = assemble_stiffness(fine_space);
  const RealCsr M = assemble_mass(fine_space);

  auto h1_of = [&](const RVec& d) {
    const RVec sd = matvec(S, std::span<const double>(d));
    const RVec md = matvec(M, std::span<const double>(d));
    double s = 0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d[i] * (sd[i] + md[i]);
    return std::sqrt(std::max(0.0, s));
  };

  const std::size_t ell_max = nc; // every patch covers the whole domain
  LodConfig full_cfg(pair, ell_max, V);
  full_cfg.threads = cfg.threads;
  const LodBasis full = LodBasis::assemble(full_cfg);

  double col_scale = 0;
  for (std::size_t j = 0; j < full.n_columns(); ++j) {
    RVec dense(fine_space.dim(), 0.0);
    const auto& c = full.column(j);
    for (std::size_t i = 0; i < c.values.size(); ++i) dense[c.lo + i] = c.values[i];
    col_scale = std::max(col_scale, h1_of(dense));
  }
  const double floor = 1e-11 * col_scale;

  LocalizationReport report;
  for (std::size_t ell : ells) {
    LodConfig lc(pair, std::min(ell, ell_max), V);
    lc.threads = cfg.threads;
    const LodBasis basis = LodBasis::assemble(lc);
    double gap = 0;
    for (std::size_t j = 0; j < basis.n_columns(); ++j) {
      RVec dense(fine_space.dim(), 0.0);
      const auto& c = basis.column(j);
      for (std::size_t i = 0; i < c.values.size(); ++i)
        dense[c.lo + i] += c.values[i];
      const auto& f = full.column(j);
      for (std::size_t i = 0; i < f.values.size(); ++i)
        dense[f.lo + i] -= f.values[i];
      gap = std::max(gap, h1_of(dense));
    }
    LocalizationRow row;
    row.ell = ell;
    row.h1_gap = gap;
    if (!report.rows.empty() && report.rows.back().h1_gap > 0)
      row.ratio = gap / report.rows.back().h1_gap;
    report.rows.push_back(row);
  }

  // Geometric-mean decay per layer over consecutive rows above the floor.
  double log_sum = 0;
  int count = 0;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i];
    if (a.h1_gap <= floor || b.h1_gap <= floor) continue;
    if (b.ell <= a.ell) continue;
    log_sum += std::log(b.h1_gap / a.h1_gap) /
               static_cast<double>(b.ell - a.ell);
    ++count;
  }
  report.fitted_ratio = count > 0 ? std::exp(log_sum / count) : 0.0;

  const std::string csv =
      (fs::path(cfg.outputs.dir) / "localization_study.csv").string();
  report.write_csv(csv);
  return report;
}

TimeOrderReport cmd_time_order(const ExperimentConfig& cfg,
                               const std::vector<double>& taus, double tau_ref) {
  require_dir(cfg.outputs.dir);
  const FEFunction u0_fine = load_groundstate(cfg);
  BuiltSystem built = build_system(cfg, cfg.discretization.coarse_level, u0_fine);
  TimeOrderReport report;
  report.rows = time_order_study(*built.system, built.u0, cfg.problem.T, cfg.cg(),
                                 taus, tau_ref);
  const std::string csv = (fs::path(cfg.outputs.dir) / "time_order.csv").string();
  report.write_csv(csv);
  return report;
}

} // namespace gpelab
