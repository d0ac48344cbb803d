#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace chfem {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  friend Vec2 operator*(double s, const Vec2& v) { return v * s; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm2() const { return x * x + y * y; }
  double norm() const;
};

enum class BoundaryTag : std::uint8_t { Solid, Open };

/// Boundary classification; sub_id distinguishes regions that share a tag
/// (piecewise contact angle, pore segments, ...).
struct BoundaryLabel {
  BoundaryTag tag = BoundaryTag::Solid;
  int sub_id = 0;
  friend bool operator==(const BoundaryLabel&, const BoundaryLabel&) = default;
};

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  BoundaryLabel label;
};

/// How a vertex of this mesh relates to the mesh it was derived from.
/// Refinement midpoints carry their parent endpoints (in the new numbering,
/// ordered by creation so a linear transfer can run front to back).
struct VertexOrigin {
  int old_index = -1;   // index in the predecessor mesh, -1 if newly created
  int parent_a = -1;    // midpoint parents, -1 for kept vertices
  int parent_b = -1;
};

/// Bisection history node. Triangles of the current mesh are exactly the
/// leaves. Vertex triples follow the newest-vertex convention: the
/// refinement edge is (v[1], v[2]) and v[0] is the peak.
struct ForestNode {
  std::array<int, 3> v{-1, -1, -1};
  int parent = -1;
  std::array<int, 2> child{-1, -1};
  int midpoint = -1;  // vertex created when this node was bisected
};

/// Immutable conforming triangulation. Refinement and coarsening return new
/// meshes; the bisection forest travels with the mesh so coarsening can undo
/// refinement but never descends past the original triangles.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec2> vertices,
       std::vector<std::array<int, 3>> triangles,
       std::vector<BoundaryEdge> boundary_edges);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
  const std::vector<ForestNode>& forest() const { return forest_; }
  const std::vector<VertexOrigin>& vertex_origins() const { return origins_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }

  double triangle_area(int t) const;
  double total_area() const;
  /// Longest edge length of triangle t.
  double triangle_h(int t) const;
  Vec2 centroid(int t) const;

  /// Checks all structural invariants (index ranges, positive CCW areas,
  /// edge conformity, boundary closure). Throws std::runtime_error with a
  /// description of the first violation.
  void validate() const;

 private:
  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<ForestNode> forest_;    // empty until the first bisect
  std::vector<int> tri_node_;         // forest node per triangle, parallel to triangles_
  std::vector<VertexOrigin> origins_;

  friend Mesh bisect(const Mesh&, const std::vector<int>&);
  friend Mesh coarsen(const Mesh&, const std::vector<int>&);
};

struct RectangleLabels {
  BoundaryLabel bottom{BoundaryTag::Solid, 0};
  BoundaryLabel right{BoundaryTag::Open, 0};
  BoundaryLabel top{BoundaryTag::Open, 0};
  BoundaryLabel left{BoundaryTag::Open, 0};
};

/// Structured triangulation of [0,lx] x [0,ly] with nx*ny cells, each split
/// along its up-right diagonal. (nx+1)*(ny+1) vertices, 2*nx*ny triangles.
Mesh generate_rectangle(double lx, double ly, int nx, int ny,
                        const RectangleLabels& labels = {});

enum class MeshFileFormat { Text };

/// Reads the plain-text mesh format (see docs/formats.md). Throws on parse
/// failure or any structural invariant violation.
Mesh import_mesh(const std::filesystem::path& path,
                 MeshFileFormat format = MeshFileFormat::Text);
/// Stream variant; consumes exactly the three mesh sections.
Mesh import_mesh(std::istream& in, MeshFileFormat format = MeshFileFormat::Text);

void export_mesh(const Mesh& mesh, const std::filesystem::path& path);
void export_mesh(const Mesh& mesh, std::ostream& out);

/// Newest-vertex bisection of the marked triangles plus whatever closure
/// needs, so the result conforms. Marked ids refer to mesh.triangles().
/// Existing vertices keep their indices; midpoints are appended.
Mesh bisect(const Mesh& mesh, const std::vector<int>& marked);

/// Merges sibling pairs whose children are both marked, cascading while the
/// merged parents remain marked pairs. Conformity is preserved (a bisection
/// vertex is removed only when all leaves around it coarsen together) and
/// the original triangles are never merged away. Vertices are compacted;
/// vertex_origins() of the result maps new indices to old ones.
Mesh coarsen(const Mesh& mesh, const std::vector<int>& marked);

/// Distinct labels carried by boundary edges with the given tag, in order of
/// first appearance.
std::vector<BoundaryLabel> distinct_boundary_labels(const Mesh& mesh, BoundaryTag tag);

}  // namespace chfem
