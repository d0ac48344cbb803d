#include <cmath>
#include <memory>

#include <doctest.h>

#include "chfem/time_adapt.hpp"

using chfem::Field;
using chfem::FemSpace;
using chfem::Mesh;
using chfem::PhysicsParams;
using chfem::SchemeParams;
using chfem::State;
using chfem::ThetaField;
using chfem::TimeAdaptParams;
using chfem::Vec2;
using chfem::Vector;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<const FemSpace> droplet_space() {
  auto mesh = std::make_shared<Mesh>(chfem::generate_rectangle(2.0, 0.5, 16, 4));
  return std::make_shared<FemSpace>(mesh, 1);
}

PhysicsParams smooth_physics() {
  PhysicsParams p;
  p.epsilon = 0.1;
  p.theta = ThetaField::make_uniform(kPi / 4.0);
  return p;
}

State droplet_state(double dt) {
  auto space = droplet_space();
  chfem::InitialCondition ic;
  ic.kind = chfem::InitialCondition::Kind::TwoDroplets;
  ic.x1 = 0.65;
  ic.x2 = 1.35;
  ic.r = 0.25;
  State s;
  s.phi = chfem::initial_condition(ic, space, 0.1);
  s.mu = Field(space);
  s.dt = dt;
  return s;
}

State pure_state(double dt) {
  auto space = droplet_space();
  State s;
  s.phi = Field(space, Vector::Ones(space->dof_count()));
  s.mu = Field(space);
  s.dt = dt;
  return s;
}

}  // namespace

TEST_SUITE("time_adapt") {

TEST_CASE("parameter validation") {
  TimeAdaptParams a;
  CHECK_NOTHROW(a.validate());
  a.dt_min = 0.5;
  a.dt_max = 0.4;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = {};
  a.dE_min = 2e-4;
  a.dE_max = 1e-4;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = {};
  a.factor = 1.0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = {};
  a.dt0 = 0.0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = {};
  a.max_recalculations = 0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
}

TEST_CASE("a quiet state lets dt grow by the factor up to dt_max and no further") {
  TimeAdaptParams adapt;
  adapt.dt0 = 0.01;
  adapt.factor = 2.0;
  adapt.dt_max = 0.08;
  adapt.dE_min = 1e-6;
  adapt.dE_max = 2e-6;

  State s = pure_state(0.0);
  auto result = chfem::run_to_time(smooth_physics(), SchemeParams::od2w(), {}, s,
                                   adapt, 0.5);
  REQUIRE(result.records.size() >= 6);
  CHECK(result.records[0].dt == doctest::Approx(0.01));
  CHECK(result.records[1].dt == doctest::Approx(0.02));
  CHECK(result.records[2].dt == doctest::Approx(0.04));
  for (std::size_t k = 3; k < result.records.size(); ++k)
    CHECK(result.records[k].dt == doctest::Approx(0.08));
  CHECK(result.total_recalculations == 0);
  CHECK(result.final_state.time >= 0.5);
  CHECK(result.final_state.time < 0.5 + 0.08 + 1e-12);
}

TEST_CASE("an oversized trial step is recalculated down by whole factors") {
  TimeAdaptParams adapt;
  adapt.dt0 = 0.32;
  adapt.factor = std::sqrt(2.0);
  adapt.dt_max = 0.32;
  adapt.dE_min = 1e-5;
  adapt.dE_max = 2e-5;

  State s = droplet_state(adapt.dt0);
  chfem::Stepper stepper(s.phi.space, smooth_physics(), SchemeParams::od2w());
  auto out = chfem::adaptive_step(stepper, s, adapt);
  CHECK(out.recalculations >= 1);
  CHECK(out.dt_used ==
        doctest::Approx(adapt.dt0 / std::pow(adapt.factor, out.recalculations))
            .epsilon(1e-12));
  CHECK(out.report.dissipation <= adapt.dE_max);
}

TEST_CASE("no growth happens at dt_max even when dissipation is small") {
  TimeAdaptParams adapt;
  adapt.dt_max = 0.08;
  adapt.dt0 = 0.08;
  adapt.dE_min = 1e-6;
  adapt.dE_max = 2e-6;
  State s = pure_state(0.08);
  auto out = chfem::adaptive_step(s, smooth_physics(), SchemeParams::od2w(), {}, adapt);
  CHECK(out.dt_used == doctest::Approx(0.08));
  CHECK(out.next_dt == doctest::Approx(0.08));
}

TEST_CASE("growth is skipped when one stretch would overshoot dt_max") {
  // dt_max/dt0 is not a power of the factor: stretching 0.05 by 2 would pass
  // 0.08, so the controller holds at 0.05 instead of clipping.
  TimeAdaptParams adapt;
  adapt.dt_max = 0.08;
  adapt.dt0 = 0.05;
  adapt.factor = 2.0;
  adapt.dE_min = 1e-6;
  adapt.dE_max = 2e-6;
  State s = pure_state(0.05);
  auto out = chfem::adaptive_step(s, smooth_physics(), SchemeParams::od2w(), {}, adapt);
  CHECK(out.next_dt == doctest::Approx(0.05));
}

TEST_CASE("fixed-step mode takes exactly the requested steps") {
  chfem::RunOptions options;
  options.adapt_time = false;
  options.fixed_dt = 0.05;
  State s = droplet_state(0.0);
  auto result = chfem::run_to_time(smooth_physics(), SchemeParams::od2w(), {}, s,
                                   {}, 0.05, options);
  CHECK(result.records.size() == 1);
  CHECK(result.final_state.time == doctest::Approx(0.05));
  CHECK(result.final_state.step == 1);
}

TEST_CASE("accepted steps never raise the energy beyond the tolerated sliver") {
  TimeAdaptParams adapt;
  adapt.dt0 = 0.02;
  adapt.dt_max = 0.32;
  adapt.dE_min = 1e-4;
  adapt.dE_max = 2e-4;

  State s = droplet_state(0.0);
  auto [m0, w0] = chfem::free_energy(s.phi, smooth_physics());
  double prev = m0 + w0;
  auto result = chfem::run_to_time(smooth_physics(), SchemeParams::od2w(), {}, s,
                                   adapt, 0.6);
  for (const auto& rec : result.records) {
    CHECK(rec.report.E_total - prev <= adapt.dE_max / 100.0 + 1e-12);
    prev = rec.report.E_total;
  }
  CHECK(result.records.size() >= 3);
}

TEST_CASE("consecutive step sizes are related by integer powers of the factor") {
  TimeAdaptParams adapt;
  adapt.dt0 = 0.02;
  adapt.dt_max = 0.32;  // dt_max/dt0 = 16 = factor^8
  adapt.dE_min = 1e-4;
  adapt.dE_max = 2e-4;

  State s = droplet_state(0.0);
  auto result = chfem::run_to_time(smooth_physics(), SchemeParams::od2w(), {}, s,
                                   adapt, 1.0);
  const double logf = std::log(adapt.factor);
  for (std::size_t k = 1; k < result.records.size(); ++k) {
    const double m = std::log(result.records[k].dt / result.records[k - 1].dt) / logf;
    CHECK(std::abs(m - std::round(m)) <= 1e-9);
  }
}

TEST_CASE("the recalculation cap aborts with diagnostics") {
  TimeAdaptParams adapt;
  adapt.dt0 = 0.1;
  adapt.dt_max = 0.32;
  adapt.dE_min = 1e-18;
  adapt.dE_max = 1e-17;  // unreachable for any real step
  adapt.max_recalculations = 2;
  State s = droplet_state(adapt.dt0);
  CHECK_THROWS_WITH_AS(
      chfem::adaptive_step(s, smooth_physics(), SchemeParams::od2w(), {}, adapt),
      doctest::Contains("recalculations"), std::runtime_error);
}

TEST_CASE("run_to_time honors stop predicates and reshape cadence") {
  TimeAdaptParams adapt;
  adapt.dt0 = 0.01;
  adapt.dt_max = 0.01 + 1e-15;  // hold dt fixed so counting is simple
  adapt.dE_min = 1e-7;
  adapt.dE_max = 1.0;

  chfem::RunOptions options;
  int reshapes = 0;
  options.reshape = [&](const State& st) {
    ++reshapes;
    return st;
  };
  options.reshape_every = 3;
  int steps_seen = 0;
  options.stop = [&](const chfem::StepOutcome&) { return ++steps_seen >= 7; };

  State s = droplet_state(0.0);
  auto result = chfem::run_to_time(smooth_physics(), SchemeParams::od2w(), {}, s,
                                   adapt, 10.0, options);
  CHECK(result.records.size() == 7);
  CHECK(reshapes == 2);  // after accepted steps 3 and 6
}

TEST_CASE("runs are deterministic") {
  TimeAdaptParams adapt;
  adapt.dt0 = 0.02;
  adapt.dt_max = 0.08;
  adapt.dE_min = 1e-4;
  adapt.dE_max = 2e-4;
  auto run = [&] {
    State s = droplet_state(0.0);
    return chfem::run_to_time(smooth_physics(), SchemeParams::od2w(), {}, s, adapt, 0.3);
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].report.E_total == b.records[k].report.E_total);
    CHECK(a.records[k].dt == b.records[k].dt);
  }
  CHECK((a.final_state.phi.values - b.final_state.phi.values)
            .lpNorm<Eigen::Infinity>() == 0.0);
}

}  // TEST_SUITE
