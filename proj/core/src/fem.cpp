#include "chfem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace chfem {

namespace {

std::uint64_t ekey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

FemSpace::FemSpace(std::shared_ptr<const Mesh> mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree) {
  if (!mesh_) throw std::invalid_argument("FemSpace: null mesh");
  if (degree_ != 1 && degree_ != 2)
    throw std::invalid_argument("FemSpace: degree must be 1 or 2");

  const auto& tris = mesh_->triangles();
  element_dofs_.assign(tris.size() * 6, -1);
  dof_coords_ = mesh_->vertices();

  std::unordered_map<std::uint64_t, int> edge_dof;
  int next = mesh_->vertex_count();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (int k = 0; k < 3; ++k) element_dofs_[t * 6 + k] = tris[t][k];
    if (degree_ == 2) {
      // Edge dof k sits on the edge opposite vertex k.
      for (int k = 0; k < 3; ++k) {
        int a = tris[t][(k + 1) % 3], b = tris[t][(k + 2) % 3];
        auto [it, fresh] = edge_dof.try_emplace(ekey(a, b), next);
        if (fresh) {
          ++next;
          dof_coords_.push_back((mesh_->vertices()[a] + mesh_->vertices()[b]) * 0.5);
        }
        element_dofs_[t * 6 + 3 + k] = it->second;
      }
    }
  }
  dof_count_ = (degree_ == 1) ? mesh_->vertex_count() : next;

  const auto& bedges = mesh_->boundary_edges();
  boundary_edge_dofs_.assign(bedges.size() * 3, -1);
  for (std::size_t i = 0; i < bedges.size(); ++i) {
    boundary_edge_dofs_[i * 3 + 0] = bedges[i].a;
    boundary_edge_dofs_[i * 3 + 1] = bedges[i].b;
    if (degree_ == 2) {
      auto it = edge_dof.find(ekey(bedges[i].a, bedges[i].b));
      if (it == edge_dof.end())
        throw std::logic_error("FemSpace: boundary edge without edge dof");
      boundary_edge_dofs_[i * 3 + 2] = it->second;
    }
  }
}

std::vector<int> FemSpace::boundary_dofs(const BoundaryLabel& label) const {
  std::vector<int> dofs;
  const auto& bedges = mesh_->boundary_edges();
  for (std::size_t i = 0; i < bedges.size(); ++i) {
    if (!(bedges[i].label == label)) continue;
    for (int d : boundary_edge_dofs(static_cast<int>(i))) dofs.push_back(d);
  }
  std::sort(dofs.begin(), dofs.end());
  dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
  return dofs;
}

std::vector<int> FemSpace::boundary_dofs(BoundaryTag tag) const {
  std::vector<int> dofs;
  const auto& bedges = mesh_->boundary_edges();
  for (std::size_t i = 0; i < bedges.size(); ++i) {
    if (bedges[i].label.tag != tag) continue;
    for (int d : boundary_edge_dofs(static_cast<int>(i))) dofs.push_back(d);
  }
  std::sort(dofs.begin(), dofs.end());
  dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
  return dofs;
}

ElementGeometry element_geometry(const Mesh& mesh, int t) {
  ElementGeometry g;
  const auto& tri = mesh.triangles()[t];
  for (int k = 0; k < 3; ++k) g.p[k] = mesh.vertices()[tri[k]];
  double a2 = (g.p[1] - g.p[0]).cross(g.p[2] - g.p[0]);
  g.area = 0.5 * a2;
  // grad lambda_k is the inward normal of the opposite edge over 2A.
  g.grad_lambda[0] = Vec2{g.p[1].y - g.p[2].y, g.p[2].x - g.p[1].x} * (1.0 / a2);
  g.grad_lambda[1] = Vec2{g.p[2].y - g.p[0].y, g.p[0].x - g.p[2].x} * (1.0 / a2);
  g.grad_lambda[2] = Vec2{g.p[0].y - g.p[1].y, g.p[1].x - g.p[0].x} * (1.0 / a2);
  return g;
}

void basis_at(int degree, const ElementGeometry& g, double l0, double l1, double l2,
              ElementBasis& out) {
  const double l[3] = {l0, l1, l2};
  if (degree == 1) {
    out.count = 3;
    for (int k = 0; k < 3; ++k) {
      out.value[k] = l[k];
      out.grad[k] = g.grad_lambda[k];
    }
    return;
  }
  out.count = 6;
  for (int k = 0; k < 3; ++k) {
    out.value[k] = l[k] * (2.0 * l[k] - 1.0);
    out.grad[k] = g.grad_lambda[k] * (4.0 * l[k] - 1.0);
  }
  for (int k = 0; k < 3; ++k) {
    int i = (k + 1) % 3, j = (k + 2) % 3;
    out.value[3 + k] = 4.0 * l[i] * l[j];
    out.grad[3 + k] = g.grad_lambda[i] * (4.0 * l[j]) + g.grad_lambda[j] * (4.0 * l[i]);
  }
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(int n, Triplets& trip) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

// Shared element-loop core for mass-like matrices.
template <typename WeightAt>
SparseMatrix assemble_mass_like(const FemSpace& space, int quad_order, WeightAt&& w) {
  const Mesh& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule(quad_order);
  Triplets trip;
  trip.reserve(mesh.triangle_count() * 36);
  ElementBasis basis;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    auto dofs = space.element_dofs(t);
    double local[6][6] = {};
    for (const auto& q : rule.points) {
      basis_at(space.degree(), g, q.l0, q.l1, q.l2, basis);
      double wq = w(t, g, basis, q) * q.w * g.area;
      for (int i = 0; i < basis.count; ++i)
        for (int j = 0; j < basis.count; ++j)
          local[i][j] += wq * basis.value[i] * basis.value[j];
    }
    for (int i = 0; i < basis.count; ++i)
      for (int j = 0; j < basis.count; ++j)
        trip.emplace_back(dofs[i], dofs[j], local[i][j]);
  }
  return from_triplets(space.dof_count(), trip);
}

double field_value_at(const Field& f, std::span<const int> dofs,
                      const ElementBasis& basis) {
  double v = 0.0;
  for (int i = 0; i < basis.count; ++i) v += f.values[dofs[i]] * basis.value[i];
  return v;
}

}  // namespace

SparseMatrix assemble_mass(const FemSpace& space) {
  return assemble_mass_like(space, 2 * space.degree(),
                            [](int, const ElementGeometry&, const ElementBasis&,
                               const TriangleRule::Point&) { return 1.0; });
}

SparseMatrix assemble_stiffness(const FemSpace& space) {
  const Mesh& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule(std::max(2 * (space.degree() - 1), 1));
  Triplets trip;
  trip.reserve(mesh.triangle_count() * 36);
  ElementBasis basis;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    auto dofs = space.element_dofs(t);
    double local[6][6] = {};
    for (const auto& q : rule.points) {
      basis_at(space.degree(), g, q.l0, q.l1, q.l2, basis);
      double wq = q.w * g.area;
      for (int i = 0; i < basis.count; ++i)
        for (int j = 0; j < basis.count; ++j)
          local[i][j] += wq * basis.grad[i].dot(basis.grad[j]);
    }
    for (int i = 0; i < basis.count; ++i)
      for (int j = 0; j < basis.count; ++j)
        trip.emplace_back(dofs[i], dofs[j], local[i][j]);
  }
  return from_triplets(space.dof_count(), trip);
}

SparseMatrix assemble_weighted_mass(const FemSpace& space, const Field& phi,
                                    const std::function<double(double)>& weight,
                                    int quad_order) {
  if (quad_order < 2 * space.degree())
    throw std::invalid_argument(
        "assemble_weighted_mass: quad_order below basis product degree");
  if (phi.space.get() != &space)
    throw std::invalid_argument("assemble_weighted_mass: field lives on another space");
  return assemble_mass_like(
      space, quad_order,
      [&](int t, const ElementGeometry&, const ElementBasis& basis,
          const TriangleRule::Point&) {
        return weight(field_value_at(phi, space.element_dofs(t), basis));
      });
}

namespace {

// Edge trace of the basis: P1 has (1-t, t), P2 adds the edge bubble.
void edge_basis(int degree, double t, double out[3], int& count) {
  if (degree == 1) {
    count = 2;
    out[0] = 1.0 - t;
    out[1] = t;
    return;
  }
  count = 3;
  out[0] = (1.0 - t) * (1.0 - 2.0 * t);
  out[1] = t * (2.0 * t - 1.0);
  out[2] = 4.0 * t * (1.0 - t);
}

bool label_selected(const std::vector<BoundaryLabel>& labels, const BoundaryLabel& l) {
  for (const auto& sel : labels)
    if (sel == l) return true;
  return false;
}

}  // namespace

SparseMatrix assemble_boundary_mass(
    const FemSpace& space, const std::vector<BoundaryLabel>& labels,
    const Field* phi,
    const std::function<double(double, Vec2, BoundaryLabel)>& weight,
    int quad_order) {
  if (quad_order < 2 * space.degree())
    throw std::invalid_argument(
        "assemble_boundary_mass: quad_order below basis product degree");
  const Mesh& mesh = space.mesh();
  const EdgeRule& rule = edge_rule(quad_order);
  Triplets trip;
  const auto& bedges = mesh.boundary_edges();
  for (std::size_t be = 0; be < bedges.size(); ++be) {
    if (!label_selected(labels, bedges[be].label)) continue;
    auto dofs = space.boundary_edge_dofs(static_cast<int>(be));
    Vec2 pa = mesh.vertices()[bedges[be].a];
    Vec2 pb = mesh.vertices()[bedges[be].b];
    double len = (pb - pa).norm();
    double local[3][3] = {};
    for (const auto& q : rule.points) {
      double bval[3];
      int count;
      edge_basis(space.degree(), q.t, bval, count);
      Vec2 x = pa + (pb - pa) * q.t;
      double pv = 0.0;
      if (phi) {
        for (int i = 0; i < count; ++i) pv += phi->values[dofs[i]] * bval[i];
      }
      double wq = weight(pv, x, bedges[be].label) * q.w * len;
      for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j)
          local[i][j] += wq * bval[i] * bval[j];
    }
    int count = space.degree() == 1 ? 2 : 3;
    for (int i = 0; i < count; ++i)
      for (int j = 0; j < count; ++j)
        trip.emplace_back(dofs[i], dofs[j], local[i][j]);
  }
  return from_triplets(space.dof_count(), trip);
}

Vector assemble_load(const FemSpace& space, const Field& phi,
                     const std::function<double(double)>& f, int quad_order) {
  if (phi.space.get() != &space)
    throw std::invalid_argument("assemble_load: field lives on another space");
  const Mesh& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule(quad_order);
  Vector load = Vector::Zero(space.dof_count());
  ElementBasis basis;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    auto dofs = space.element_dofs(t);
    for (const auto& q : rule.points) {
      basis_at(space.degree(), g, q.l0, q.l1, q.l2, basis);
      double fq = f(field_value_at(phi, dofs, basis)) * q.w * g.area;
      for (int i = 0; i < basis.count; ++i) load[dofs[i]] += fq * basis.value[i];
    }
  }
  return load;
}

Vector assemble_boundary_load(
    const FemSpace& space, const std::vector<BoundaryLabel>& labels,
    const Field* phi,
    const std::function<double(double, Vec2, BoundaryLabel)>& f, int quad_order) {
  const Mesh& mesh = space.mesh();
  const EdgeRule& rule = edge_rule(quad_order);
  Vector load = Vector::Zero(space.dof_count());
  const auto& bedges = mesh.boundary_edges();
  for (std::size_t be = 0; be < bedges.size(); ++be) {
    if (!label_selected(labels, bedges[be].label)) continue;
    auto dofs = space.boundary_edge_dofs(static_cast<int>(be));
    Vec2 pa = mesh.vertices()[bedges[be].a];
    Vec2 pb = mesh.vertices()[bedges[be].b];
    double len = (pb - pa).norm();
    for (const auto& q : rule.points) {
      double bval[3];
      int count;
      edge_basis(space.degree(), q.t, bval, count);
      Vec2 x = pa + (pb - pa) * q.t;
      double pv = 0.0;
      if (phi) {
        for (int i = 0; i < count; ++i) pv += phi->values[dofs[i]] * bval[i];
      }
      double fq = f(pv, x, bedges[be].label) * q.w * len;
      for (int i = 0; i < count; ++i) load[dofs[i]] += fq * bval[i];
    }
  }
  return load;
}

double integrate_functional(const FemSpace& space,
                            std::span<const Field* const> fields,
                            const InteriorIntegrand& f, int quad_order) {
  for (const Field* fld : fields)
    if (!fld || fld->space.get() != &space)
      throw std::invalid_argument("integrate_functional: field lives on another space");
  const Mesh& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule(quad_order);
  double total = 0.0;
  ElementBasis basis;
  std::vector<double> vals(fields.size());
  std::vector<Vec2> grads(fields.size());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    auto dofs = space.element_dofs(t);
    for (const auto& q : rule.points) {
      basis_at(space.degree(), g, q.l0, q.l1, q.l2, basis);
      Vec2 x = g.p[0] * q.l0 + g.p[1] * q.l1 + g.p[2] * q.l2;
      for (std::size_t k = 0; k < fields.size(); ++k) {
        vals[k] = 0.0;
        grads[k] = Vec2{0.0, 0.0};
        for (int i = 0; i < basis.count; ++i) {
          double c = fields[k]->values[dofs[i]];
          vals[k] += c * basis.value[i];
          grads[k] += basis.grad[i] * c;
        }
      }
      double fq = f(vals, grads, x);
      if (!std::isfinite(fq))
        throw std::runtime_error("integrate_functional: non-finite integrand on triangle " +
                                 std::to_string(t));
      total += fq * q.w * g.area;
    }
  }
  return total;
}

double integrate_boundary_functional(const FemSpace& space,
                                     const std::vector<BoundaryLabel>& labels,
                                     std::span<const Field* const> fields,
                                     const BoundaryIntegrand& f, int quad_order) {
  for (const Field* fld : fields)
    if (!fld || fld->space.get() != &space)
      throw std::invalid_argument("integrate_boundary_functional: field on another space");
  const Mesh& mesh = space.mesh();
  const EdgeRule& rule = edge_rule(quad_order);
  double total = 0.0;
  std::vector<double> vals(fields.size());
  const auto& bedges = mesh.boundary_edges();
  for (std::size_t be = 0; be < bedges.size(); ++be) {
    if (!label_selected(labels, bedges[be].label)) continue;
    auto dofs = space.boundary_edge_dofs(static_cast<int>(be));
    Vec2 pa = mesh.vertices()[bedges[be].a];
    Vec2 pb = mesh.vertices()[bedges[be].b];
    double len = (pb - pa).norm();
    for (const auto& q : rule.points) {
      double bval[3];
      int count;
      edge_basis(space.degree(), q.t, bval, count);
      Vec2 x = pa + (pb - pa) * q.t;
      for (std::size_t k = 0; k < fields.size(); ++k) {
        vals[k] = 0.0;
        for (int i = 0; i < count; ++i) vals[k] += fields[k]->values[dofs[i]] * bval[i];
      }
      double fq = f(vals, x, bedges[be].label);
      if (!std::isfinite(fq))
        throw std::runtime_error(
            "integrate_boundary_functional: non-finite integrand on boundary edge " +
            std::to_string(be));
      total += fq * q.w * len;
    }
  }
  return total;
}

std::vector<Vec2> gradient_field(const Field& phi) {
  const FemSpace& space = *phi.space;
  if (space.degree() != 1)
    throw std::invalid_argument("gradient_field: only P1 fields have per-element gradients");
  const Mesh& mesh = space.mesh();
  std::vector<Vec2> grads(mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    const auto& tri = mesh.triangles()[t];
    Vec2 gr{0.0, 0.0};
    for (int k = 0; k < 3; ++k) gr += g.grad_lambda[k] * phi.values[tri[k]];
    grads[t] = gr;
  }
  return grads;
}

MeshLocator::MeshLocator(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
  const auto& verts = mesh_->vertices();
  lo_ = hi_ = verts.at(0);
  for (const auto& v : verts) {
    lo_.x = std::min(lo_.x, v.x);
    lo_.y = std::min(lo_.y, v.y);
    hi_.x = std::max(hi_.x, v.x);
    hi_.y = std::max(hi_.y, v.y);
  }
  int n = mesh_->triangle_count();
  int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n) / 2.0)));
  nx_ = ny_ = side;
  bins_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  auto bin_of = [&](double v, double lo, double hi, int n_) {
    if (hi <= lo) return 0;
    int b = static_cast<int>((v - lo) / (hi - lo) * n_);
    return std::clamp(b, 0, n_ - 1);
  };
  for (int t = 0; t < n; ++t) {
    const auto& tri = mesh_->triangles()[t];
    Vec2 tlo = verts[tri[0]], thi = verts[tri[0]];
    for (int k = 1; k < 3; ++k) {
      tlo.x = std::min(tlo.x, verts[tri[k]].x);
      tlo.y = std::min(tlo.y, verts[tri[k]].y);
      thi.x = std::max(thi.x, verts[tri[k]].x);
      thi.y = std::max(thi.y, verts[tri[k]].y);
    }
    int bx0 = bin_of(tlo.x, lo_.x, hi_.x, nx_), bx1 = bin_of(thi.x, lo_.x, hi_.x, nx_);
    int by0 = bin_of(tlo.y, lo_.y, hi_.y, ny_), by1 = bin_of(thi.y, lo_.y, hi_.y, ny_);
    for (int by = by0; by <= by1; ++by)
      for (int bx = bx0; bx <= bx1; ++bx)
        bins_[static_cast<std::size_t>(by) * nx_ + bx].push_back(t);
  }
}

std::optional<std::pair<int, std::array<double, 3>>> MeshLocator::locate(
    Vec2 p, double snap) const {
  auto bin_of = [&](double v, double lo, double hi, int n_) {
    if (hi <= lo) return 0;
    int b = static_cast<int>((v - lo) / (hi - lo) * n_);
    return std::clamp(b, 0, n_ - 1);
  };
  int bx = bin_of(p.x, lo_.x, hi_.x, nx_);
  int by = bin_of(p.y, lo_.y, hi_.y, ny_);

  int best_t = -1;
  std::array<double, 3> best_l{};
  double best_violation = std::numeric_limits<double>::max();

  auto consider = [&](int t) {
    ElementGeometry g = element_geometry(*mesh_, t);
    double l0 = (g.p[1] - p).cross(g.p[2] - p) / (2.0 * g.area);
    double l1 = (g.p[2] - p).cross(g.p[0] - p) / (2.0 * g.area);
    double l2 = 1.0 - l0 - l1;
    double violation = std::max({-l0, -l1, -l2, 0.0}) * std::sqrt(std::abs(g.area));
    if (violation < best_violation) {
      best_violation = violation;
      best_t = t;
      best_l = {l0, l1, l2};
    }
  };

  // Search the point's bin first, then grow the ring until a hit.
  for (int ring = 0; ring < std::max(nx_, ny_); ++ring) {
    for (int dy = -ring; dy <= ring; ++dy) {
      for (int dx = -ring; dx <= ring; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
        int cx = bx + dx, cy = by + dy;
        if (cx < 0 || cx >= nx_ || cy < 0 || cy >= ny_) continue;
        for (int t : bins_[static_cast<std::size_t>(cy) * nx_ + cx]) consider(t);
      }
    }
    if (best_t != -1 && best_violation <= snap) break;
  }
  if (best_t == -1 || best_violation > snap) return std::nullopt;
  for (auto& l : best_l) l = std::clamp(l, 0.0, 1.0);
  double s = best_l[0] + best_l[1] + best_l[2];
  for (auto& l : best_l) l /= s;
  return std::make_pair(best_t, best_l);
}

double evaluate(const Field& f, Vec2 p, const MeshLocator& locator) {
  auto hit = locator.locate(p);
  if (!hit)
    throw std::runtime_error("evaluate: point outside the triangulation");
  auto [t, l] = *hit;
  const FemSpace& space = *f.space;
  ElementGeometry g = element_geometry(space.mesh(), t);
  ElementBasis basis;
  basis_at(space.degree(), g, l[0], l[1], l[2], basis);
  auto dofs = space.element_dofs(t);
  double v = 0.0;
  for (int i = 0; i < basis.count; ++i) v += f.values[dofs[i]] * basis.value[i];
  return v;
}

}  // namespace chfem
