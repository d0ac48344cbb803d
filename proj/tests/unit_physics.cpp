#include <cmath>
#include <memory>
#include <random>

#include <doctest.h>

#include "chfem/fem.hpp"
#include "chfem/physics.hpp"
#include "support/frozen.hpp"
#include "support/oracles.hpp"

using chfem::BoundaryLabel;
using chfem::BoundaryTag;
using chfem::Field;
using chfem::FemSpace;
using chfem::Mesh;
using chfem::ThetaField;
using chfem::Vec2;
using chfem::Vector;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.41421356237309504880;

std::shared_ptr<const FemSpace> unit_square_space(int n, bool all_solid = false) {
  chfem::RectangleLabels labels;
  if (all_solid) labels.right = labels.top = labels.left = {BoundaryTag::Solid, 0};
  auto mesh = std::make_shared<Mesh>(chfem::generate_rectangle(1.0, 1.0, n, n, labels));
  return std::make_shared<FemSpace>(mesh, 1);
}

Field fill(const std::shared_ptr<const FemSpace>& space,
           const std::function<double(Vec2)>& f) {
  Vector v(space->dof_count());
  for (int i = 0; i < space->dof_count(); ++i) v[i] = f(space->dof_coordinates()[i]);
  return Field(space, std::move(v));
}

}  // namespace

TEST_SUITE("physics") {

TEST_CASE("double well basics") {
  CHECK(chfem::f_m(0.0) == 0.0);
  CHECK(chfem::f_m(1.0) == 0.0);
  CHECK(chfem::f_m(-1.0) == 0.0);
  CHECK(chfem::f_m(2.0) == doctest::Approx(6.0));
  CHECK(chfem::F_m(0.0) == doctest::Approx(0.25));
  CHECK(chfem::F_m(1.0) == 0.0);
  CHECK(chfem::F_m(-1.0) == 0.0);
}

TEST_CASE("wall energy vanishes at the neutral angle and at phi = 0") {
  for (double phi : {-2.0, -1.0, -0.3, 0.0, 0.8, 1.0, 1.7})
    CHECK(chfem::wall_energy(phi, kPi / 2.0) == doctest::Approx(0.0));
  for (double theta : {0.2, 1.0, 2.5}) CHECK(chfem::wall_energy(0.0, theta) == 0.0);
}

TEST_CASE("wall energy is continuous and C2 across the branch joints") {
  const double theta = kPi / 3.0;
  const double c = (kSqrt2 / 2.0) * std::cos(theta);
  for (double joint : {-1.0, 1.0}) {
    const double h = 1e-7;
    CHECK(chfem::wall_energy(joint - h, theta) ==
          doctest::Approx(chfem::wall_energy(joint + h, theta)).epsilon(1e-6));
    CHECK(chfem::f_w(joint - h, theta) ==
          doctest::Approx(chfem::f_w(joint + h, theta)).epsilon(1e-5));
  }
  // Second derivative from both sides of phi = -1 is -2c; at +1 it is +2c.
  const double h = 1e-5;
  auto d2_left = (chfem::f_w(-1.0, theta) - chfem::f_w(-1.0 - h, theta)) / h;
  auto d2_right = (chfem::f_w(-1.0 + h, theta) - chfem::f_w(-1.0, theta)) / h;
  CHECK(d2_left == doctest::Approx(-2.0 * c).epsilon(1e-4));
  CHECK(d2_right == doctest::Approx(-2.0 * c).epsilon(1e-4));
  auto d2p_left = (chfem::f_w(1.0, theta) - chfem::f_w(1.0 - h, theta)) / h;
  auto d2p_right = (chfem::f_w(1.0 + h, theta) - chfem::f_w(1.0, theta)) / h;
  CHECK(d2p_left == doctest::Approx(2.0 * c).epsilon(1e-4));
  CHECK(d2p_right == doctest::Approx(2.0 * c).epsilon(1e-4));
}

TEST_CASE("wall derivative pins the documented values") {
  CHECK(chfem::f_w(1.0, 0.7) == doctest::Approx(0.0));
  CHECK(chfem::f_w(-1.0, 0.7) == doctest::Approx(0.0));
  CHECK(chfem::f_w(0.0, 0.0) == doctest::Approx(-kSqrt2 / 2.0));
  CHECK(chfem::f_w(-2.0, 0.0) == doctest::Approx(kSqrt2));
}

TEST_CASE("f_w is the derivative of wall_energy") {
  const double h = 1e-5;
  for (double theta : {0.4, kPi / 3.0, 2.2}) {
    for (double phi : {-1.8, -1.3, -0.6, 0.0, 0.5, 0.9, 1.4, 2.0}) {
      double fd = (chfem::wall_energy(phi + h, theta) -
                   chfem::wall_energy(phi - h, theta)) / (2.0 * h);
      CHECK(chfem::f_w(phi, theta) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("fhat_m is consistent, pins its documented values, and is affine in the new value") {
  for (double phi : {-1.0, 0.0, 0.5, 1.0})
    CHECK(chfem::fhat_m(phi, phi) == doctest::Approx(chfem::f_m(phi)).epsilon(1e-14));
  CHECK(chfem::fhat_m(0.0, 1.0) == doctest::Approx(-0.5));
  CHECK(chfem::fhat_m(1.0, -1.0) == doctest::Approx(-2.0));
  const double a = 0.37;
  double mid = 0.5 * (chfem::fhat_m(a, -0.9) + chfem::fhat_m(a, 1.3));
  CHECK(chfem::fhat_m(a, 0.5 * (-0.9 + 1.3)) == doctest::Approx(mid).epsilon(1e-14));
}

TEST_CASE("fhat_w is consistent on every branch and affine in the new value") {
  for (double theta : {0.3, kPi / 4.0, 2.0}) {
    for (double phi : {-2.0, -1.5, -1.0, -0.5, 0.0, 0.7, 1.0, 1.5})
      CHECK(chfem::fhat_w(phi, phi, theta) ==
            doctest::Approx(chfem::f_w(phi, theta)).epsilon(1e-13));
  }
  CHECK(chfem::fhat_w(0.0, 1.0, 0.0) == doctest::Approx(-kSqrt2 / 2.0));
  CHECK(chfem::fhat_w(-2.0, 0.0, 0.0) == doctest::Approx(0.0));
  for (double phi : {-2.0, -0.4, 1.5}) {
    double mid = 0.5 * (chfem::fhat_w(phi, -1.0, 0.9) + chfem::fhat_w(phi, 2.0, 0.9));
    CHECK(chfem::fhat_w(phi, 0.5, 0.9) == doctest::Approx(mid).epsilon(1e-13));
    CHECK(chfem::fhat_w(phi, 0.77, kPi / 2.0) == doctest::Approx(0.0));
  }
}

TEST_CASE("fhat_w splits into old part plus coefficient times the new value") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  std::uniform_real_distribution<double> t(0.1, 3.0);
  for (int k = 0; k < 200; ++k) {
    double a = u(rng), b = u(rng), theta = t(rng);
    double split = chfem::fhat_w_old_part(a, theta) +
                   chfem::fhat_w_new_coefficient(a, theta) * b;
    CHECK(split == doctest::Approx(chfem::fhat_w(a, b, theta)).epsilon(1e-13));
  }
}

TEST_CASE("free energy of the pure phase at the neutral angle is zero") {
  auto space = unit_square_space(3, true);
  Field one = fill(space, [](Vec2) { return 1.0; });
  chfem::PhysicsParams params;
  params.epsilon = 0.1;
  params.theta = ThetaField::make_uniform(kPi / 2.0);
  auto [mix, wall] = chfem::free_energy(one, params);
  CHECK(mix == doctest::Approx(0.0));
  CHECK(wall == doctest::Approx(0.0));
}

TEST_CASE("free energy of phi = 0 is the frozen well height over epsilon") {
  auto space = unit_square_space(2);
  Field zero(space);
  chfem::PhysicsParams params;
  params.epsilon = 0.1;
  params.theta = ThetaField::make_uniform(kPi / 2.0);
  auto [mix, wall] = chfem::free_energy(zero, params);
  CHECK(mix == doctest::Approx(frozen::fm_zero_unit_square / params.epsilon).epsilon(1e-13));
  CHECK(wall == doctest::Approx(0.0));
}

TEST_CASE("wall term of the pure phase matches the frozen value and the oracle") {
  auto space = unit_square_space(4, true);
  Field one = fill(space, [](Vec2) { return 1.0; });
  chfem::PhysicsParams params;
  params.epsilon = 0.05;
  params.theta = ThetaField::make_uniform(kPi / 4.0);
  auto [mix, wall] = chfem::free_energy(one, params);
  CHECK(mix == doctest::Approx(0.0));
  CHECK(wall ==
        doctest::Approx(frozen::wall_energy_pure_phase_theta_quarter_pi).epsilon(1e-12));
  auto [omix, owall] = oracle::free_energy(one, params);
  CHECK(owall ==
        doctest::Approx(frozen::wall_energy_pure_phase_theta_quarter_pi).epsilon(1e-10));
  CHECK(omix == doctest::Approx(0.0));
}

TEST_CASE("library free energy agrees with the oracle on a smooth field") {
  auto space = unit_square_space(6, true);
  chfem::PhysicsParams params;
  params.epsilon = 0.2;
  params.theta = ThetaField::make_uniform(kPi / 3.0);
  Field phi = fill(space, [](Vec2 p) {
    return 0.8 * std::tanh((p.x - 0.5) / 0.3) + 0.1 * p.y;
  });
  auto [mix, wall] = chfem::free_energy(phi, params);
  auto [omix, owall] = oracle::free_energy(phi, params);
  CHECK(mix == doctest::Approx(omix).epsilon(1e-10));
  CHECK(wall == doctest::Approx(owall).epsilon(1e-10));
}

TEST_CASE("mass integrates the field exactly") {
  auto space = unit_square_space(4);
  Field c = fill(space, [](Vec2) { return 0.7; });
  CHECK(chfem::mass(c) == doctest::Approx(0.7).epsilon(1e-14));
  Field x = fill(space, [](Vec2 p) { return p.x; });
  CHECK(chfem::mass(x) == doctest::Approx(0.5).epsilon(1e-14));
  Field anti = fill(space, [](Vec2 p) { return p.x - 0.5; });
  CHECK(chfem::mass(anti) == doctest::Approx(0.0));
}

TEST_CASE("two-droplet profile takes the documented value at a droplet center") {
  auto mesh = std::make_shared<Mesh>(chfem::generate_rectangle(2.0, 0.5, 40, 10));
  auto space = std::make_shared<FemSpace>(mesh, 1);
  chfem::InitialCondition ic;
  ic.kind = chfem::InitialCondition::Kind::TwoDroplets;
  ic.x1 = 0.65;
  ic.x2 = 1.35;
  ic.r = 0.25;
  const double eps = 0.1;
  Field phi = chfem::initial_condition(ic, space, eps);
  int at = -1;
  for (int i = 0; i < space->dof_count(); ++i) {
    Vec2 p = space->dof_coordinates()[i];
    if (std::abs(p.x - 0.65) < 1e-12 && std::abs(p.y) < 1e-12) at = i;
  }
  REQUIRE(at >= 0);
  const double s2w = kSqrt2 * eps;
  const double want = 1.0 - std::tanh(-0.25 / s2w) - std::tanh((0.7 - 0.25) / s2w);
  CHECK(phi.values[at] == doctest::Approx(want).epsilon(1e-14));
  CHECK(phi.values[at] > 0.9);
  CHECK(phi.values.maxCoeff() < 1.0);
  CHECK(phi.values.minCoeff() > -1.0);
}

TEST_CASE("random normal initial data is seed-deterministic") {
  auto space = unit_square_space(5);
  chfem::InitialCondition ic;
  ic.kind = chfem::InitialCondition::Kind::RandomNormal;
  ic.variance = 0.1;
  ic.seed = 12345;
  Field a = chfem::initial_condition(ic, space, 0.01);
  Field b = chfem::initial_condition(ic, space, 0.01);
  CHECK((a.values - b.values).lpNorm<Eigen::Infinity>() == 0.0);
  ic.seed = 54321;
  Field c = chfem::initial_condition(ic, space, 0.01);
  CHECK((a.values - c.values).lpNorm<Eigen::Infinity>() > 0.0);
  // Sample variance in the right ballpark.
  double mean = a.values.mean();
  double var = (a.values.array() - mean).square().sum() / (a.values.size() - 1);
  CHECK(var == doctest::Approx(0.1).epsilon(0.5));
}

TEST_CASE("theta field variants") {
  ThetaField uni = ThetaField::make_uniform(kPi / 3.0);
  CHECK(uni.value({0.3, 0.0}, {BoundaryTag::Solid, 7}) == doctest::Approx(kPi / 3.0));
  CHECK(uni.value({0.3, 0.0}, {BoundaryTag::Open, 0}) == doctest::Approx(kPi / 2.0));

  ThetaField per = ThetaField::make_per_label({{0, kPi / 3.0}, {1, 2.0 * kPi / 3.0}});
  CHECK(per.value({0, 0}, {BoundaryTag::Solid, 0}) == doctest::Approx(kPi / 3.0));
  CHECK(per.value({0, 0}, {BoundaryTag::Solid, 1}) == doctest::Approx(2.0 * kPi / 3.0));
  CHECK_THROWS_AS(per.value({0, 0}, {BoundaryTag::Solid, 9}), std::runtime_error);
  CHECK(per.value({0, 0}, {BoundaryTag::Open, 9}) == doctest::Approx(kPi / 2.0));

  ThetaField ana = ThetaField::make_analytic(kPi / 2.0, 0.3, 2.0, 0.0);
  CHECK(ana.value({0.0, 0.0}, {BoundaryTag::Solid, 0}) == doctest::Approx(kPi / 2.0 + 0.3));
  CHECK(ana.value({0.5, 0.0}, {BoundaryTag::Solid, 0}) ==
        doctest::Approx(kPi / 2.0 + 0.3 * std::cos(kPi)));

  CHECK_THROWS_AS(ThetaField::make_uniform(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ThetaField::make_uniform(kPi), std::invalid_argument);
  CHECK_THROWS_AS(ThetaField::make_analytic(0.2, 0.5, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("the tanh interface is a convergent stationary profile") {
  // eps * K phi + (1/eps) * load(f_m) is the weak residual of the stationary
  // equation for the neutral angle; it should shrink with the mesh at first
  // order or better in the max norm.
  const double eps = 0.05;
  auto residual = [&](int n) {
    chfem::RectangleLabels labels;  // angles neutral: no wall term
    auto mesh = std::make_shared<Mesh>(chfem::generate_rectangle(1.0, 0.25, n, n / 4, labels));
    auto space = std::make_shared<FemSpace>(mesh, 1);
    Field phi = fill(space, [&](Vec2 p) { return std::tanh((p.x - 0.5) / (kSqrt2 * eps)); });
    chfem::SparseMatrix K = chfem::assemble_stiffness(*space);
    Vector load = chfem::assemble_load(*space, phi, chfem::f_m, 4);
    Vector r = eps * (K * phi.values) + load / eps;
    return r.lpNorm<Eigen::Infinity>();
  };
  const double r1 = residual(24);
  const double r2 = residual(48);
  CHECK(r2 < r1);
  CHECK(std::log2(r1 / r2) >= 1.0);
}

}  // TEST_SUITE
