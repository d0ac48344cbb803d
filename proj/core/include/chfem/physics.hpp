#pragma once

#include <map>
#include <memory>
#include <utility>

#include "chfem/fem.hpp"

namespace chfem {

/// Contact angle theta(x) on the substrate. Open-tagged edges are always
/// neutral (pi/2, zero wetting), whatever the variant says; the variants
/// describe Solid-tagged edges only.
struct ThetaField {
  enum class Kind { Uniform, PerLabel, Analytic };
  Kind kind = Kind::Uniform;

  double uniform = 1.5707963267948966;

  /// sub_id -> angle, for Solid edges. A Solid edge whose sub_id is missing
  /// is an error at evaluation time.
  std::map<int, double> per_label;

  // theta0 + amplitude * cos(fx*pi*x) * cos(fy*pi*y)
  double theta0 = 1.5707963267948966;
  double amplitude = 0.0;
  double fx = 0.0, fy = 0.0;

  double value(Vec2 x, BoundaryLabel label) const;
  /// Angles must stay inside (0, pi).
  void validate() const;

  static ThetaField make_uniform(double theta);
  static ThetaField make_per_label(std::map<int, double> m);
  static ThetaField make_analytic(double theta0, double amplitude, double fx, double fy);
};

struct PhysicsParams {
  double epsilon = 0.01;   // interface width
  double mobility = 1.0;   // b
  ThetaField theta;
  /// Prescribed boundary mass flux (value of b grad(mu).n) per Open sub_id.
  std::map<int, double> mdot;
  /// Strong phi constraints per Open sub_id (pore inflow).
  std::map<int, double> phi_dirichlet;

  void validate() const;
};

/// Per-step energy bookkeeping. The discrete energy law reads
///   E(new) - E(old) = -dissipation - dt*(eps*nd_philic + nd_phobic/eps + nd_wall)
///                     + boundary_work
/// whenever no boundary quadrature point crosses a wall-energy branch joint
/// (branch_crossings counts the edges where one does).
struct EnergyReport {
  double time = 0.0;
  double E_mix = 0.0;
  double E_wall = 0.0;
  double E_total = 0.0;
  double mass = 0.0;
  double dissipation = 0.0;   // dt * b * ||grad mu||^2
  double nd_philic = 0.0;
  double nd_phobic = 0.0;
  double nd_wall = 0.0;
  double boundary_work = 0.0; // dt * Int mdot * mu
  int branch_crossings = 0;
};

// Double well and its derivative.
double F_m(double phi);
double f_m(double phi);

/// Wall energy density, extended quadratically outside [-1,1] so it stays
/// C^2 and bounded below.
double wall_energy(double phi, double theta);
/// d(wall_energy)/dphi.
double f_w(double phi, double theta);

/// Second-order surrogate of f_m, linear in the new value:
/// 1.5*old^2*new - 0.5*old^3 - (old+new)/2.
double fhat_m(double phi_old, double phi_new);
/// Second-order surrogate of f_w, linear in the new value; the branch is
/// selected by the old value.
double fhat_w(double phi_old, double phi_new, double theta);
/// Coefficient of phi_new in fhat_w (boundary weighted-mass weight).
double fhat_w_new_coefficient(double phi_old, double theta);
/// The part of fhat_w independent of phi_new.
double fhat_w_old_part(double phi_old, double theta);

/// (E_mix, E_wall) of a field: Int (1/eps) F_m + (eps/2)|grad phi|^2 over the
/// interior plus Int wall_energy(phi, theta) over Solid boundary edges.
std::pair<double, double> free_energy(const Field& phi, const PhysicsParams& params);

/// Int phi dx (exact for the space's degree).
double mass(const Field& phi);

struct InitialCondition {
  enum class Kind { TanhInterface, Droplet, TwoDroplets, RandomNormal, Constant };
  Kind kind = Kind::Constant;

  // TanhInterface: plane interface through (anchor_x, anchor_y) meeting the
  // bottom wall at the given angle; phi=+1 fills the wedge on the +x side.
  double angle = 1.5707963267948966;
  double anchor_x = 0.0, anchor_y = 0.0;

  // Droplet: phi=+1 inside the circle.
  Vec2 center{};
  double radius = 0.0;

  // TwoDroplets: 1 - tanh(d1/(sqrt(2) w)) - tanh(d2/(sqrt(2) w)), centers on
  // the bottom wall. smoothing < 0 means "use the physics epsilon"; a tiny
  // value gives the sharp half-circle variant.
  double x1 = 0.0, x2 = 0.0, r = 0.0;
  double smoothing = -1.0;

  // RandomNormal: i.i.d. N(0, variance) nodal values.
  double variance = 0.1;
  std::uint64_t seed = 0;

  double value = 0.0;  // Constant
};

/// Nodal interpolant of the chosen profile.
Field initial_condition(const InitialCondition& ic,
                        std::shared_ptr<const FemSpace> space, double epsilon);

}  // namespace chfem
