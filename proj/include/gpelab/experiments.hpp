#ifndef GPELAB_EXPERIMENTS_HPP
#define GPELAB_EXPERIMENTS_HPP

#include <optional>
#include <string>
#include <vector>

#include "gpelab/systems.hpp"
#include "gpelab/snapshot.hpp"

namespace gpelab {

/// Declarative run description, read from a sectioned key/value file whose
/// keys match these field names.
struct ExperimentConfig {
  struct Problem {
    double a = -15.0;
    double b = 15.0;
    double beta = 100.0;
    double T = 0.4;
    std::string potential = "V1"; // V1 | V2
  } problem;

  struct Initial {
    std::string snapshot;  // ground-state snapshot path (written/read)
    double tolerance = 1e-9;
    int max_iters = 20000;
    double sigma = 1.0;
  } initial;

  struct Discretization {
    std::string method = "lod"; // lod | p1 | p2 | p3
    int coarse_level = 6;       // 2^level elements
    int fine_level = 13;
    std::string oversampling = "auto"; // "auto" = level + 5, or an integer
  } discretization;

  struct Time {
    int q = 2;
    double tau = 2e-3;
    double fp_tol = 1e-10;
    int max_fp_iters = 200;
    int nl_quad_points = 0; // 0 = q Gauss points
  } time;

  struct Outputs {
    std::string dir = "out";
    int snapshot_cadence = 0; // 0 = final state only
    std::string reference;    // reference snapshot path (written/read)
  } outputs;

  unsigned threads = 1;      // set by the CLI, not by the config file
  std::string source_path;   // where the config was read from

  static ExperimentConfig parse_file(const std::string& path);
  static ExperimentConfig parse_string(const std::string& text);
  void validate() const;

  std::string reference_path() const;
  std::string groundstate_path() const;
  CgConfig cg() const;
  Potential make_potential() const;
  std::size_t oversampling_layers(int coarse_level) const;
};

/// Switches to the full schedule from the experiments this lab mirrors
/// (coarse levels 7..12 on a level-16 fine mesh).
void apply_paper_scale(ExperimentConfig& cfg);

struct RunRow {
  std::string method;
  int level = 0;
  double H = 0;
  std::size_t dofs = 0;
  double h1_error = 0;
  double l2_error = 0;
  std::optional<double> eoc_h1;
  double online_seconds = 0;
  double offline_seconds = 0;
  double energy_drift = 0;
  double mean_fp_iters = 0;
  bool failed = false;
  std::string note;
};

struct StudyReport {
  std::vector<RunRow> rows;

  std::string to_csv() const;
  void write_csv(const std::string& path) const;
  /// Least-squares slope of log2(error) against level for one method,
  /// excluding rows with h1_error below `floor`.
  double eoc_slope(const std::string& method, double floor = 0.0) const;
};

struct LocalizationRow {
  std::size_t ell = 0;
  double h1_gap = 0;   // max column gap to the widest-patch basis
  double ratio = 0;    // gap / previous gap (0 on the first row)
};

struct LocalizationReport {
  std::vector<LocalizationRow> rows;
  double fitted_ratio = 0; // geometric mean decay per layer above the floor
  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

struct TimeOrderReport {
  std::vector<TimeOrderRow> rows;
  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

// Commands (shared by the CLI and the acceptance suite).
std::string cmd_groundstate(const ExperimentConfig& cfg);
std::string cmd_reference(const ExperimentConfig& cfg);
RunRow cmd_run(const ExperimentConfig& cfg, const std::string& reference_path);
StudyReport cmd_study(const ExperimentConfig& cfg, const std::vector<int>& levels,
                      const std::vector<std::string>& methods);
LocalizationReport cmd_localization_study(const ExperimentConfig& cfg,
                                          const std::vector<std::size_t>& ells);
TimeOrderReport cmd_time_order(const ExperimentConfig& cfg,
                               const std::vector<double>& taus, double tau_ref);

} // namespace gpelab

#endif
