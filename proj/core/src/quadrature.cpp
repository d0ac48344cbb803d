#include "chfem/quadrature.hpp"

#include <stdexcept>
#include <string>

namespace chfem {

namespace {

TriangleRule make_centroid() {
  return {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0}}, 1};
}

TriangleRule make_degree2() {
  TriangleRule r;
  r.exact_degree = 2;
  const double a = 2.0 / 3.0, b = 1.0 / 6.0, w = 1.0 / 3.0;
  r.points = {{a, b, b, w}, {b, a, b, w}, {b, b, a, w}};
  return r;
}

void push_sym3(TriangleRule& r, double a, double b, double w) {
  r.points.push_back({a, b, b, w});
  r.points.push_back({b, a, b, w});
  r.points.push_back({b, b, a, w});
}

TriangleRule make_degree4() {
  TriangleRule r;
  r.exact_degree = 4;
  push_sym3(r, 0.108103018168070, 0.445948490915965, 0.223381589678011);
  push_sym3(r, 0.816847572980459, 0.091576213509771, 0.109951743655322);
  return r;
}

TriangleRule make_degree5() {
  TriangleRule r;
  r.exact_degree = 5;
  r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225});
  push_sym3(r, 0.059715871789770, 0.470142064105115, 0.132394152788506);
  push_sym3(r, 0.797426985353087, 0.101286507323456, 0.125939180544827);
  return r;
}

EdgeRule gauss_legendre(int n) {
  // Nodes/weights on [-1,1], mapped to [0,1] with weights summing to one.
  struct NW { double x, w; };
  std::vector<NW> nw;
  switch (n) {
    case 1: nw = {{0.0, 2.0}}; break;
    case 2: nw = {{-0.5773502691896258, 1.0}, {0.5773502691896258, 1.0}}; break;
    case 3:
      nw = {{-0.7745966692414834, 5.0 / 9.0},
            {0.0, 8.0 / 9.0},
            {0.7745966692414834, 5.0 / 9.0}};
      break;
    case 4:
      nw = {{-0.8611363115940526, 0.3478548451374538},
            {-0.3399810435848563, 0.6521451548625461},
            {0.3399810435848563, 0.6521451548625461},
            {0.8611363115940526, 0.3478548451374538}};
      break;
    case 5:
      nw = {{-0.9061798459386640, 0.2369268850561891},
            {-0.5384693101056831, 0.4786286704993665},
            {0.0, 0.5688888888888889},
            {0.5384693101056831, 0.4786286704993665},
            {0.9061798459386640, 0.2369268850561891}};
      break;
    default:
      throw std::logic_error("edge rule table");
  }
  EdgeRule r;
  r.exact_degree = 2 * n - 1;
  for (const auto& p : nw) r.points.push_back({0.5 * (p.x + 1.0), 0.5 * p.w});
  return r;
}

}  // namespace

const TriangleRule& triangle_rule(int degree) {
  static const TriangleRule d1 = make_centroid();
  static const TriangleRule d2 = make_degree2();
  static const TriangleRule d4 = make_degree4();
  static const TriangleRule d5 = make_degree5();
  if (degree <= 1) return d1;
  if (degree == 2) return d2;
  if (degree <= 4) return d4;
  if (degree == 5) return d5;
  throw std::invalid_argument("triangle_rule: no stocked rule of degree " +
                              std::to_string(degree));
}

const EdgeRule& edge_rule(int degree) {
  static const EdgeRule rules[5] = {gauss_legendre(1), gauss_legendre(2),
                                    gauss_legendre(3), gauss_legendre(4),
                                    gauss_legendre(5)};
  if (degree < 1) degree = 1;
  if (degree > 9)
    throw std::invalid_argument("edge_rule: no stocked rule of degree " +
                                std::to_string(degree));
  return rules[degree / 2];  // n-point Gauss is exact to degree 2n-1
}

}  // namespace chfem
