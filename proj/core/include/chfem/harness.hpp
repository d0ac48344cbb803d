#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chfem/io.hpp"

namespace chfem {

struct Scenario {
  ScenarioConfig config;
  State state;  // initial state on the (possibly pre-adapted) mesh
};

/// Materializes the config: mesh (generated rectangle with relabeled side
/// segments, or file), initial condition, and the initial mesh-adaptation
/// rounds (analytic profiles are re-evaluated on each adapted mesh; nodal
/// noise is transferred instead).
Scenario build_scenario(const ScenarioConfig& config);

struct ScenarioResult {
  State final_state;
  std::vector<RunRecord> records;
  long total_recalculations = 0;
  double wall_seconds = 0.0;
  std::filesystem::path csv_path;     // empty when CSV is disabled
  std::filesystem::path result_path;  // <prefix>.json summary
};

/// Full simulation with CSV/VTK/JSON outputs under config.output.directory.
ScenarioResult run_scenario(const ScenarioConfig& config);

struct NamedScheme {
  std::string name;
  SchemeParams scheme;
};

struct ConvergencePoint {
  double parameter = 0.0;  // dt or h
  double error = 0.0;      // L2 distance to the reference solution at T
};

struct ConvergenceResult {
  std::string variant;
  double reference = 0.0;  // dt* or h*
  std::vector<ConvergencePoint> points;
  double order = 0.0;  // least-squares slope in log-log
};

/// Log-log least-squares slope of error vs parameter (zero-error points are
/// skipped; fewer than two usable points give order 0).
double fit_order(const std::vector<ConvergencePoint>& points);

/// Fixed-mesh self-convergence in dt: each variant is run at every dt and at
/// dt_ref, errors are ||phi_dt(T) - phi_ref(T)||_L2 on the shared mesh.
/// Writes <out_dir>/converge_time.json.
std::vector<ConvergenceResult> converge_time(const ScenarioConfig& base,
                                             const std::vector<double>& dts, double dt_ref,
                                             const std::vector<NamedScheme>& variants,
                                             const std::filesystem::path& out_dir);

/// Uniform-mesh convergence in h at a shared fixed dt; the coarse solutions
/// are interpolated onto the h_ref mesh for the L2 distance.
/// Writes <out_dir>/converge_space.json.
ConvergenceResult converge_space(const ScenarioConfig& base, const std::vector<double>& hs,
                                 double h_ref, const std::filesystem::path& out_dir);

struct AnglePoint {
  double theta = 0.0;
  double theta_star = 0.0;
  double ratio = 0.0;
  long steps = 0;
  double final_time = 0.0;
  bool equilibrated = false;  // rate threshold reached before the T budget
};

/// Sessile-droplet equilibrium angles: runs the base scenario once per theta
/// until max|delta phi|/dt falls under rate_threshold (or time T runs out),
/// then measures the isoline angle. Writes <out_dir>/angle_test.json.
std::vector<AnglePoint> angle_test(const ScenarioConfig& base,
                                   const std::vector<double>& thetas,
                                   const std::filesystem::path& out_dir,
                                   double rate_threshold = 1e-6);

}  // namespace chfem
