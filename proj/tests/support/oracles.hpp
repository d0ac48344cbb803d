#pragma once

// Independent reference implementations used to derive expected values
// before they are frozen into the test suite. Nothing here may call into
// the library's quadrature, assembly, or solver code paths: the interior
// rule is a Duffy-mapped tensor Gauss-Legendre product built from scratch,
// edge integrals use adaptive Simpson, and the dense solves go through
// Eigen's dense factorizations.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "chfem/fem.hpp"
#include "chfem/physics.hpp"
#include "chfem/scheme.hpp"

namespace oracle {

using chfem::Vec2;

struct GaussRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

/// Gauss-Legendre nodes by Newton iteration on the Legendre recurrence.
GaussRule gauss_legendre(int n);

/// Integral of f over the triangle (a, b, c) with an n x n Duffy-mapped
/// tensor Gauss-Legendre grid. The Duffy substitution doubles polynomial
/// degrees along one axis, so the grid is exact for total degree <= n - 1;
/// the default covers degree 11 with margin over the degree-10 contract.
double integrate_triangle(Vec2 a, Vec2 b, Vec2 c,
                          const std::function<double(Vec2)>& f, int n = 12);

double integrate_mesh(const chfem::Mesh& mesh, const std::function<double(Vec2)>& f,
                      int n = 12);

/// Adaptive Simpson along the segment p -> q (integral of f ds).
double integrate_segment(Vec2 p, Vec2 q, const std::function<double(Vec2)>& f,
                         double tol = 1e-13);

/// P1 evaluation helpers that read nodal values directly off the vertex
/// numbering, bypassing the library's interpolation code.
double p1_value(const chfem::Mesh& mesh, const Eigen::VectorXd& values, int tri, Vec2 x);
Vec2 p1_gradient(const chfem::Mesh& mesh, const Eigen::VectorXd& values, int tri);

/// (E_mix, E_wall) of a P1 field by the oracle rules above.
std::pair<double, double> free_energy(const chfem::Field& phi,
                                      const chfem::PhysicsParams& physics);

/// Residual of the two-block variational form at a candidate pair
/// (phi_new, mu), laid out like the assembled system: rows [0, N) are the
/// mass balance, rows [N, 2N) the chemical-potential definition.
Eigen::VectorXd vf_residual(const chfem::Field& phi_old, const Eigen::VectorXd& phi_new,
                            const Eigen::VectorXd& mu, const chfem::PhysicsParams& physics,
                            const chfem::SchemeParams& scheme, double dt);

/// Dense LU solve (Eigen FullPivLU).
Eigen::VectorXd dense_solve(const chfem::SparseMatrix& A, const Eigen::VectorXd& rhs);

/// Eigenvalues of a symmetric sparse matrix via dense self-adjoint solve.
Eigen::VectorXd dense_symmetric_eigenvalues(const chfem::SparseMatrix& A);

/// Brute-force conformity check by edge-incidence counting: every edge is
/// shared by exactly two triangles or is listed (once) as a boundary edge,
/// triangle orientations are CCW, and the boundary list has no extras.
/// Returns an empty string when the mesh conforms, else a description.
std::string conformity_violation(const chfem::Mesh& mesh);

}  // namespace oracle
