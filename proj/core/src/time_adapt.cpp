#include "chfem/time_adapt.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace chfem {

void TimeAdaptParams::validate() const {
  if (!(dt_min >= 0.0) || !(dt_min < dt_max))
    throw std::invalid_argument("time_adapt: need 0 <= dt_min < dt_max");
  if (!(dE_min > 0.0) || !(dE_min < dE_max))
    throw std::invalid_argument("time_adapt: need 0 < dE_min < dE_max");
  if (!(factor > 1.0)) throw std::invalid_argument("time_adapt: factor must exceed 1");
  if (!(dt0 > 0.0)) throw std::invalid_argument("time_adapt: dt0 must be positive");
  if (max_recalculations < 1)
    throw std::invalid_argument("time_adapt: max_recalculations must be positive");
}

StepOutcome adaptive_step(Stepper& stepper, const State& state,
                          const TimeAdaptParams& adapt) {
  adapt.validate();
  auto [e_mix_old, e_wall_old] = free_energy(state.phi, stepper.physics());
  const double e_old = e_mix_old + e_wall_old;

  double dt = state.dt;
  if (!(dt > 0.0)) throw std::invalid_argument("adaptive_step: state.dt must be positive");

  int recalculations = 0;
  for (;;) {
    State trial = state;
    trial.dt = dt;
    auto [next, report] = stepper.step(trial);
    const double dissipated = report.dissipation;  // |Delta*E| of the trial
    const double rise = report.E_total - e_old;

    bool too_dissipative = dissipated > adapt.dE_max && dt > adapt.dt_min;
    bool energy_rose = rise > adapt.dE_max / 100.0;
    if (too_dissipative || energy_rose) {
      ++recalculations;
      if (recalculations > adapt.max_recalculations) {
        std::ostringstream msg;
        msg << "adaptive_step: " << recalculations << " recalculations at t = "
            << state.time << " without acceptance (dt = " << dt
            << ", |Delta*E| = " << dissipated << " vs dE_max = " << adapt.dE_max
            << ", energy rise = " << rise << ")";
        throw std::runtime_error(msg.str());
      }
      dt /= adapt.factor;
      continue;
    }

    StepOutcome out;
    out.state = std::move(next);
    out.report = report;
    out.recalculations = recalculations;
    out.dt_used = dt;
    out.next_dt = dt;
    if (dissipated < adapt.dE_min && dt < adapt.dt_max) {
      double stretched = adapt.factor * dt;
      // Growing is worthwhile only while dt_max stays reachable by whole
      // factors; the tiny slack lets dt land exactly on dt_max when
      // dt_max/dt0 is a power of the factor.
      if (stretched <= adapt.dt_max * (1.0 + 1e-12))
        out.next_dt = std::min(stretched, adapt.dt_max);
    }
    return out;
  }
}

StepOutcome adaptive_step(const State& state, const PhysicsParams& physics,
                          const SchemeParams& scheme, const LinearSolveConfig& solver,
                          const TimeAdaptParams& adapt) {
  Stepper stepper(state.phi.space, physics, scheme, solver);
  return adaptive_step(stepper, state, adapt);
}

RunResult run_to_time(const PhysicsParams& physics, const SchemeParams& scheme,
                      const LinearSolveConfig& solver, State initial,
                      const TimeAdaptParams& adapt, double T,
                      const RunOptions& options) {
  if (!(T > initial.time))
    throw std::invalid_argument("run_to_time: T must exceed the initial time");
  if (options.adapt_time) {
    adapt.validate();
  } else if (!(options.fixed_dt > 0.0)) {
    throw std::invalid_argument("run_to_time: fixed_dt must be positive when "
                                "time adaptation is off");
  }

  RunResult result;
  State state = std::move(initial);
  if (options.adapt_time && !(state.dt > 0.0)) state.dt = adapt.dt0;
  if (!options.adapt_time) state.dt = options.fixed_dt;

  auto stepper = std::make_unique<Stepper>(state.phi.space, physics, scheme, solver);
  const double t_tol = 1e-12 * std::max(1.0, std::abs(T));
  long accepted = 0;
  while (state.time < T - t_tol) {
    StepOutcome outcome;
    if (options.adapt_time) {
      outcome = adaptive_step(*stepper, state, adapt);
      state = outcome.state;
      state.dt = outcome.next_dt;
    } else {
      auto [next, report] = stepper->step(state);
      outcome.report = report;
      outcome.dt_used = state.dt;
      outcome.next_dt = state.dt;
      outcome.state = next;
      state = std::move(next);
      state.dt = options.fixed_dt;
    }
    ++accepted;
    result.total_recalculations += outcome.recalculations;
    RunRecord rec;
    rec.report = outcome.report;
    rec.dt = outcome.dt_used;
    rec.recalculations = outcome.recalculations;
    rec.dof_count = outcome.state.phi.space->dof_count();
    result.records.push_back(rec);
    if (options.on_step) options.on_step(outcome);
    if (options.stop && options.stop(outcome)) break;

    if (options.reshape && options.reshape_every > 0 &&
        accepted % options.reshape_every == 0) {
      State reshaped = options.reshape(state);
      if (reshaped.phi.space.get() != state.phi.space.get())
        stepper = std::make_unique<Stepper>(reshaped.phi.space, physics, scheme, solver);
      state = std::move(reshaped);
    }
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace chfem
