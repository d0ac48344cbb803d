#pragma once

#include <vector>

namespace chfem {

/// Symmetric triangle rule in barycentric coordinates; weights sum to one,
/// so integrals are weight * value * element_area.
struct TriangleRule {
  struct Point { double l0, l1, l2, w; };
  std::vector<Point> points;
  int exact_degree = 0;
};

/// Rule on [0,1]; weights sum to one.
struct EdgeRule {
  struct Point { double t, w; };
  std::vector<Point> points;
  int exact_degree = 0;
};

/// Smallest stocked rule exact for polynomials of the given total degree.
/// Stocked degrees reach 5 (triangles) and 9 (edges); beyond that an
/// invalid-argument error is thrown.
const TriangleRule& triangle_rule(int degree);
const EdgeRule& edge_rule(int degree);

}  // namespace chfem
