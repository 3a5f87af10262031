// Command-line driver: ground states, reference solutions, single runs and
// the convergence / localization / time-order studies, all driven by a
// sectioned key/value config file.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "gpelab/experiments.hpp"

namespace {

using namespace gpelab;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  bool paper_scale = false;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file path")->required();
  cmd->add_option("--out", opts.out_dir, "override the output directory");
  cmd->add_flag("--paper-scale", opts.paper_scale,
                "use the full schedule (fine level 16, coarse levels 7..12)");
  cmd->add_option("--threads", opts.threads, "worker threads for basis assembly");
}

ExperimentConfig load(const CommonOpts& opts) {
  ExperimentConfig cfg = ExperimentConfig::parse_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.outputs.dir = opts.out_dir;
  if (opts.paper_scale) apply_paper_scale(cfg);
  cfg.threads = opts.threads;
  return cfg;
}

void print_row(const RunRow& r) {
  std::printf("%-4s i=%d H=%.6g dofs=%zu h1=%.6e l2=%.6e online=%.3fs "
              "offline=%.3fs drift=%.3e iters=%.2f\n",
              r.method.c_str(), r.level, r.H, r.dofs, r.h1_error, r.l2_error,
              r.online_seconds, r.offline_seconds, r.energy_drift,
              r.mean_fp_iters);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"1D Gross-Pitaevskii solver lab: multiscale and Lagrange FEM "
               "with continuous Galerkin time stepping"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::vector<int> levels;
  std::vector<std::string> methods;
  std::vector<std::size_t> ells;
  std::vector<double> taus;
  double tau_ref = 2.5e-4;

  CLI::App* gs = app.add_subcommand("groundstate", "compute the initial value");
  add_common(gs, opts);

  CLI::App* ref = app.add_subcommand("reference", "fine-mesh reference solution");
  add_common(ref, opts);

  CLI::App* run = app.add_subcommand("run", "one method run against the reference");
  add_common(run, opts);

  CLI::App* study = app.add_subcommand("study", "convergence/timing sweep");
  add_common(study, opts);
  study->add_option("--levels", levels, "coarse levels (default 4..8)");
  study->add_option("--methods", methods, "methods (default lod p1 p2 p3)");

  CLI::App* loc = app.add_subcommand("localization-study",
                                     "basis decay vs oversampling layers");
  add_common(loc, opts);
  loc->add_option("--ells", ells, "layer counts (default 1..10)");

  CLI::App* torder = app.add_subcommand("time-order", "order study in the step size");
  add_common(torder, opts);
  torder->add_option("--taus", taus, "step sizes (default 8e-3 4e-3 2e-3 1e-3)");
  torder->add_option("--tau-ref", tau_ref, "reference step size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gs->parsed()) {
      const ExperimentConfig cfg = load(opts);
      const std::string path = cmd_groundstate(cfg);
      std::printf("groundstate written to %s\n", path.c_str());
    } else if (ref->parsed()) {
      const ExperimentConfig cfg = load(opts);
      const std::string path = cmd_reference(cfg);
      std::printf("reference written to %s\n", path.c_str());
    } else if (run->parsed()) {
      const ExperimentConfig cfg = load(opts);
      const RunRow row = cmd_run(cfg, cfg.reference_path());
      print_row(row);
    } else if (study->parsed()) {
      ExperimentConfig cfg = load(opts);
      if (levels.empty()) {
        if (opts.paper_scale)
          levels = {7, 8, 9, 10, 11, 12};
        else
          levels = {4, 5, 6, 7, 8};
      }
      if (methods.empty()) methods = {"lod", "p1", "p2", "p3"};
      const StudyReport report = cmd_study(cfg, levels, methods);
      for (const RunRow& r : report.rows) print_row(r);
    } else if (loc->parsed()) {
      const ExperimentConfig cfg = load(opts);
      if (ells.empty()) ells = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      const LocalizationReport report = cmd_localization_study(cfg, ells);
      for (const auto& r : report.rows)
        std::printf("ell=%zu gap=%.6e ratio=%.3f\n", r.ell, r.h1_gap, r.ratio);
      std::printf("fitted decay per layer: %.4f\n", report.fitted_ratio);
    } else if (torder->parsed()) {
      const ExperimentConfig cfg = load(opts);
      if (taus.empty()) taus = {8e-3, 4e-3, 2e-3, 1e-3};
      const TimeOrderReport report = cmd_time_order(cfg, taus, tau_ref);
      for (const auto& r : report.rows)
        std::printf("tau=%.4e h1=%.6e eoc=%.3f\n", r.tau, r.h1_error, r.eoc);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
