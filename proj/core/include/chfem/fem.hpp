#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "chfem/mesh.hpp"
#include "chfem/quadrature.hpp"

namespace chfem {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Continuous Lagrange space on a triangulation, degree 1 or 2. Degree-1
/// dofs are the vertices; degree 2 adds one dof per edge (midpoint).
class FemSpace {
 public:
  FemSpace(std::shared_ptr<const Mesh> mesh, int degree);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int dof_count() const { return dof_count_; }
  int dofs_per_element() const { return degree_ == 1 ? 3 : 6; }

  /// Element connectivity; first three entries are the vertex dofs.
  std::span<const int> element_dofs(int t) const {
    return {element_dofs_.data() + static_cast<std::size_t>(t) * 6,
            static_cast<std::size_t>(dofs_per_element())};
  }
  /// Dofs supported on boundary edge be (2 for P1, 3 for P2; the edge dof
  /// comes last).
  std::span<const int> boundary_edge_dofs(int be) const {
    return {boundary_edge_dofs_.data() + static_cast<std::size_t>(be) * 3,
            static_cast<std::size_t>(degree_ == 1 ? 2 : 3)};
  }

  /// All dofs lying on boundary edges with the given label, sorted.
  std::vector<int> boundary_dofs(const BoundaryLabel& label) const;
  std::vector<int> boundary_dofs(BoundaryTag tag) const;

  /// Physical coordinates of every dof (vertices, then edge midpoints).
  const std::vector<Vec2>& dof_coordinates() const { return dof_coords_; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  int degree_;
  int dof_count_;
  std::vector<int> element_dofs_;        // 6 slots per element
  std::vector<int> boundary_edge_dofs_;  // 3 slots per boundary edge
  std::vector<Vec2> dof_coords_;
};

struct Field {
  std::shared_ptr<const FemSpace> space;
  Vector values;

  Field() = default;
  Field(std::shared_ptr<const FemSpace> s, Vector v)
      : space(std::move(s)), values(std::move(v)) {}
  explicit Field(std::shared_ptr<const FemSpace> s)
      : space(std::move(s)), values(Vector::Zero(space->dof_count())) {}
};

/// Basis values / gradients of one element at one barycentric point.
struct ElementBasis {
  double value[6];
  Vec2 grad[6];
  int count;
};

/// Geometry of one element reused across quadrature points.
struct ElementGeometry {
  Vec2 p[3];
  Vec2 grad_lambda[3];
  double area;
};

ElementGeometry element_geometry(const Mesh& mesh, int t);
void basis_at(int degree, const ElementGeometry& g, double l0, double l1, double l2,
              ElementBasis& out);

/// phi * psi_i * psi_j mass matrix (exact for the space's polynomial degree).
SparseMatrix assemble_mass(const FemSpace& space);
/// grad psi_i . grad psi_j stiffness matrix.
SparseMatrix assemble_stiffness(const FemSpace& space);

/// Weighted mass: W_ij = Int w(phi(x)) psi_i psi_j with the weight evaluated
/// at quadrature points of the stated order. quad_order must cover at least
/// the psi_i psi_j product (2*degree), otherwise invalid-argument.
SparseMatrix assemble_weighted_mass(const FemSpace& space, const Field& phi,
                                    const std::function<double(double)>& weight,
                                    int quad_order);

/// Boundary mass over edges with the given labels:
/// B_ij = Int_bnd w(phi(x), x, label) psi_i psi_j dsigma.
SparseMatrix assemble_boundary_mass(
    const FemSpace& space, const std::vector<BoundaryLabel>& labels,
    const Field* phi,
    const std::function<double(double, Vec2, BoundaryLabel)>& weight,
    int quad_order);

/// Load vector Int f(phi(x)) psi_i.
Vector assemble_load(const FemSpace& space, const Field& phi,
                     const std::function<double(double)>& f, int quad_order);

/// Boundary load Int_bnd f(phi(x), x, label) psi_i dsigma over labeled edges.
Vector assemble_boundary_load(
    const FemSpace& space, const std::vector<BoundaryLabel>& labels,
    const Field* phi,
    const std::function<double(double, Vec2, BoundaryLabel)>& f, int quad_order);

/// Integrand arguments at an interior quadrature point: one value and one
/// gradient per supplied field, plus the physical point.
using InteriorIntegrand = std::function<double(
    std::span<const double>, std::span<const Vec2>, Vec2)>;
/// Boundary integrand: field traces, point, label of the edge.
using BoundaryIntegrand = std::function<double(
    std::span<const double>, Vec2, BoundaryLabel)>;

/// Quadrature of a pointwise functional of one or more fields over the
/// interior. Throws if the integrand produces a non-finite value, naming the
/// triangle.
double integrate_functional(const FemSpace& space,
                            std::span<const Field* const> fields,
                            const InteriorIntegrand& f, int quad_order);

/// Same over the boundary edges carrying one of the given labels.
double integrate_boundary_functional(const FemSpace& space,
                                     const std::vector<BoundaryLabel>& labels,
                                     std::span<const Field* const> fields,
                                     const BoundaryIntegrand& f, int quad_order);

/// Piecewise-constant gradient of a P1 field, one Vec2 per triangle.
std::vector<Vec2> gradient_field(const Field& phi);

/// Point location by uniform binning; evaluate() returns the P1/P2 value at
/// an arbitrary point (points within `snap` of the mesh are snapped to the
/// nearest element).
class MeshLocator {
 public:
  explicit MeshLocator(std::shared_ptr<const Mesh> mesh);
  /// Triangle containing p plus its barycentric coordinates; nullopt when p
  /// lies further than `snap` outside the triangulation.
  std::optional<std::pair<int, std::array<double, 3>>> locate(
      Vec2 p, double snap = 1e-9) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  Vec2 lo_, hi_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> bins_;
};

double evaluate(const Field& f, Vec2 p, const MeshLocator& locator);

}  // namespace chfem
