#pragma once

// Expected values that were produced by the oracles in support/oracles.hpp
// and then frozen here. Tests compare the library against these constants
// AND re-run the producing oracle, so a drift in either side is caught.

namespace frozen {

// oracle::integrate_mesh of x^2 over any triangulation of the unit square
// (weighted-mass check 1^T W 1 with weight phi^2, phi = x).
inline constexpr double weighted_mass_x2_unit_square = 1.0 / 3.0;

// oracle::integrate_mesh of F_m(0) = 1/4 over the unit square.
inline constexpr double fm_zero_unit_square = 0.25;

// Wall energy of the pure phase phi = 1 at theta = pi/4 around the unit
// square (perimeter 4): 4 * (sqrt(2)/2) cos(pi/4) * (-2/3).
inline constexpr double wall_energy_pure_phase_theta_quarter_pi = -4.0 / 3.0;

// oracle::dense_symmetric_eigenvalues floor for the stiffness matrix.
inline constexpr double stiffness_eigenvalue_floor = -1e-12;

// Bisecting one triangle of the 2-triangle unit square: the refinement edge
// of both initial triangles is the shared diagonal, so closure splits the
// neighbour too (verified conforming by oracle::conformity_violation).
inline constexpr int bisect_single_mark_triangles = 4;

// Analytic Hessians behind the recovery checks: d2/dx2 of x^2 and the
// mixed derivative of x*y.
inline constexpr double hessian_x2_xx = 2.0;
inline constexpr double hessian_xy_offdiag = 1.0;

}  // namespace frozen
