#pragma once

#include <functional>
#include <vector>

#include "chfem/scheme.hpp"

namespace chfem {

/// Energy-driven step-size controller. A trial step is redone with dt/factor
/// while its dissipation exceeds dE_max (and dt is still above dt_min) or
/// its energy rises by more than dE_max/100; after an accepted step whose
/// dissipation fell below dE_min the next step is stretched by factor, never
/// beyond dt_max.
struct TimeAdaptParams {
  double dt_min = 0.0;
  double dt_max = 0.32;
  double dE_min = 1e-4;
  double dE_max = 2e-4;
  double factor = 1.4142135623730951;
  double dt0 = 0.02;
  int max_recalculations = 60;

  void validate() const;
};

struct StepOutcome {
  State state;
  EnergyReport report;
  int recalculations = 0;
  double dt_used = 0.0;
  double next_dt = 0.0;
};

/// One accepted step starting from state.dt as the trial size. Throws when
/// the recalculation cap is hit.
StepOutcome adaptive_step(Stepper& stepper, const State& state,
                          const TimeAdaptParams& adapt);

StepOutcome adaptive_step(const State& state, const PhysicsParams& physics,
                          const SchemeParams& scheme, const LinearSolveConfig& solver,
                          const TimeAdaptParams& adapt);

/// Per-step summary kept by run_to_time (full states are only streamed
/// through the callback, not stored).
struct RunRecord {
  EnergyReport report;
  double dt = 0.0;
  int recalculations = 0;
  int dof_count = 0;
};

struct RunResult {
  State final_state;
  std::vector<RunRecord> records;
  long total_recalculations = 0;
};

struct RunOptions {
  bool adapt_time = true;
  /// Step size when adapt_time is false.
  double fixed_dt = 0.0;
  /// Called after every accepted step.
  std::function<void(const StepOutcome&)> on_step;
  /// Mesh-reshaping hook, called every reshape_every accepted steps, after
  /// on_step. It must carry time/dt/step over to the returned state; the
  /// stepper is rebuilt when the returned space differs.
  std::function<State(const State&)> reshape;
  int reshape_every = 10;
  /// Early-out predicate checked after each accepted step.
  std::function<bool(const StepOutcome&)> stop;
};

/// Marches from initial.time to at least T (no final-step truncation: the
/// final time lands in [T, T + dt)).
RunResult run_to_time(const PhysicsParams& physics, const SchemeParams& scheme,
                      const LinearSolveConfig& solver, State initial,
                      const TimeAdaptParams& adapt, double T,
                      const RunOptions& options = {});

}  // namespace chfem
