#include "chfem/physics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace chfem {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfSqrt2 = 0.70710678118654752440;  // sqrt(2)/2
constexpr double kSqrt2 = 1.41421356237309504880;
}  // namespace

double ThetaField::value(Vec2 x, BoundaryLabel label) const {
  if (label.tag == BoundaryTag::Open) return kPi / 2.0;
  switch (kind) {
    case Kind::Uniform:
      return uniform;
    case Kind::PerLabel: {
      auto it = per_label.find(label.sub_id);
      if (it == per_label.end())
        throw std::runtime_error("ThetaField: no angle for solid sub_id " +
                                 std::to_string(label.sub_id));
      return it->second;
    }
    case Kind::Analytic:
      return theta0 + amplitude * std::cos(fx * kPi * x.x) * std::cos(fy * kPi * x.y);
  }
  throw std::logic_error("ThetaField: bad kind");
}

void ThetaField::validate() const {
  auto check = [](double th, const char* what) {
    if (!(th > 0.0 && th < kPi))
      throw std::invalid_argument(std::string("ThetaField: ") + what +
                                  " must lie in (0, pi)");
  };
  switch (kind) {
    case Kind::Uniform:
      check(uniform, "theta");
      break;
    case Kind::PerLabel:
      if (per_label.empty())
        throw std::invalid_argument("ThetaField: per-label map is empty");
      for (const auto& [id, th] : per_label) check(th, "per-label theta");
      break;
    case Kind::Analytic:
      check(theta0 - std::abs(amplitude), "theta0 - |amplitude|");
      check(theta0 + std::abs(amplitude), "theta0 + |amplitude|");
      break;
  }
}

ThetaField ThetaField::make_uniform(double theta) {
  ThetaField t;
  t.kind = Kind::Uniform;
  t.uniform = theta;
  t.validate();
  return t;
}

ThetaField ThetaField::make_per_label(std::map<int, double> m) {
  ThetaField t;
  t.kind = Kind::PerLabel;
  t.per_label = std::move(m);
  t.validate();
  return t;
}

ThetaField ThetaField::make_analytic(double theta0, double amplitude, double fx,
                                     double fy) {
  ThetaField t;
  t.kind = Kind::Analytic;
  t.theta0 = theta0;
  t.amplitude = amplitude;
  t.fx = fx;
  t.fy = fy;
  t.validate();
  return t;
}

void PhysicsParams::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("physics.epsilon must be positive");
  if (!(mobility > 0.0)) throw std::invalid_argument("physics.mobility must be positive");
  theta.validate();
}

double F_m(double phi) {
  double s = phi * phi - 1.0;
  return 0.25 * s * s;
}

double f_m(double phi) { return phi * (phi * phi - 1.0); }

double wall_energy(double phi, double theta) {
  double c = kHalfSqrt2 * std::cos(theta);
  if (phi < -1.0) {
    double d = phi + 1.0;
    return c * (2.0 / 3.0 - d * d);
  }
  if (phi > 1.0) {
    double d = phi - 1.0;
    return c * (-2.0 / 3.0 + d * d);
  }
  return c * (phi * phi * phi - 3.0 * phi) / 3.0;
}

double f_w(double phi, double theta) {
  double ct = std::cos(theta);
  if (phi < -1.0) return -kSqrt2 * ct * (phi + 1.0);
  if (phi > 1.0) return kSqrt2 * ct * (phi - 1.0);
  return kHalfSqrt2 * ct * (phi * phi - 1.0);
}

double fhat_m(double phi_old, double phi_new) {
  return 1.5 * phi_old * phi_old * phi_new - 0.5 * phi_old * phi_old * phi_old -
         0.5 * (phi_old + phi_new);
}

double fhat_w_new_coefficient(double phi_old, double theta) {
  double clamped = std::min(1.0, std::max(-1.0, phi_old));
  return kHalfSqrt2 * std::cos(theta) * clamped;
}

double fhat_w_old_part(double phi_old, double theta) {
  double c = kHalfSqrt2 * std::cos(theta);
  if (phi_old < -1.0) return -c * (2.0 + phi_old);
  if (phi_old > 1.0) return -c * (2.0 - phi_old);
  return -c;
}

double fhat_w(double phi_old, double phi_new, double theta) {
  return fhat_w_old_part(phi_old, theta) +
         fhat_w_new_coefficient(phi_old, theta) * phi_new;
}

std::pair<double, double> free_energy(const Field& phi, const PhysicsParams& params) {
  const FemSpace& space = *phi.space;
  const double eps = params.epsilon;
  const Field* fields[1] = {&phi};

  double e_mix = integrate_functional(
      space, fields,
      [eps](std::span<const double> v, std::span<const Vec2> g, Vec2) {
        return F_m(v[0]) / eps + 0.5 * eps * g[0].norm2();
      },
      4);

  std::vector<BoundaryLabel> solid =
      distinct_boundary_labels(space.mesh(), BoundaryTag::Solid);
  double e_wall = 0.0;
  if (!solid.empty()) {
    e_wall = integrate_boundary_functional(
        space, solid, fields,
        [&params](std::span<const double> v, Vec2 x, BoundaryLabel l) {
          return wall_energy(v[0], params.theta.value(x, l));
        },
        3);
  }
  return {e_mix, e_wall};
}

double mass(const Field& phi) {
  const Field* fields[1] = {&phi};
  return integrate_functional(
      *phi.space, fields,
      [](std::span<const double> v, std::span<const Vec2>, Vec2) { return v[0]; },
      std::max(2, phi.space->degree()));
}

namespace {

// Deterministic standard normal (Box-Muller on the raw 64-bit stream), so
// seeded fields do not depend on the standard library's distribution.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : gen_(seed) {}
  double next(double stddev) {
    if (have_spare_) {
      have_spare_ = false;
      return spare_ * stddev;
    }
    double u1 = uniform(), u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a) * stddev;
  }

 private:
  double uniform() {
    // (0,1]: avoids log(0).
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

Field initial_condition(const InitialCondition& ic,
                        std::shared_ptr<const FemSpace> space, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("initial_condition: epsilon must be positive");
  Field f(space);
  const auto& xs = space->dof_coordinates();
  const double s2e = kSqrt2 * epsilon;

  switch (ic.kind) {
    case InitialCondition::Kind::TanhInterface: {
      Vec2 u{std::sin(ic.angle), -std::cos(ic.angle)};
      Vec2 anchor{ic.anchor_x, ic.anchor_y};
      for (int i = 0; i < space->dof_count(); ++i)
        f.values[i] = std::tanh((xs[i] - anchor).dot(u) / s2e);
      break;
    }
    case InitialCondition::Kind::Droplet: {
      for (int i = 0; i < space->dof_count(); ++i) {
        double d = (xs[i] - ic.center).norm() - ic.radius;
        f.values[i] = -std::tanh(d / s2e);
      }
      break;
    }
    case InitialCondition::Kind::TwoDroplets: {
      double w = ic.smoothing > 0.0 ? ic.smoothing : epsilon;
      double s2w = kSqrt2 * w;
      for (int i = 0; i < space->dof_count(); ++i) {
        double d1 = (xs[i] - Vec2{ic.x1, 0.0}).norm() - ic.r;
        double d2 = (xs[i] - Vec2{ic.x2, 0.0}).norm() - ic.r;
        f.values[i] = 1.0 - std::tanh(d1 / s2w) - std::tanh(d2 / s2w);
      }
      break;
    }
    case InitialCondition::Kind::RandomNormal: {
      NormalStream rng(ic.seed);
      double sd = std::sqrt(ic.variance);
      for (int i = 0; i < space->dof_count(); ++i) f.values[i] = rng.next(sd);
      break;
    }
    case InitialCondition::Kind::Constant:
      f.values.setConstant(ic.value);
      break;
  }
  return f;
}

}  // namespace chfem
