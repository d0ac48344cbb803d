#include "chfem/mesh_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chfem/physics.hpp"

namespace chfem {

void MetricParams::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("mesh_adapt.gamma must be positive");
  if (!(h_min > 0.0) || !(h_min < h_max))
    throw std::invalid_argument("mesh_adapt: need 0 < h_min < h_max");
  if (adapt_every < 1)
    throw std::invalid_argument("mesh_adapt.adapt_every must be positive");
  if (!(c_coarse > 0.0) || !(c_coarse < 1.0) || !(c_ref > 1.0))
    throw std::invalid_argument("mesh_adapt: need 0 < c_coarse < 1 < c_ref");
  if (max_passes < 1) throw std::invalid_argument("mesh_adapt.max_passes must be positive");
}

namespace {

// Eigenvalues of a symmetric 2x2, larger first.
std::array<double, 2> sym_eigenvalues(const Sym2& s) {
  double mean = 0.5 * (s.xx + s.yy);
  double d = std::hypot(0.5 * (s.xx - s.yy), s.xy);
  return {mean + d, mean - d};
}

double clamp_lambda(double lambda, const MetricParams& p) {
  double lo = 1.0 / (p.h_max * p.h_max);
  double hi = 1.0 / (p.h_min * p.h_min);
  return std::min(std::max(std::abs(lambda) / p.gamma, lo), hi);
}

// Area-weighted average of per-triangle vectors onto vertices.
std::vector<Vec2> average_to_vertices(const Mesh& mesh, const std::vector<Vec2>& per_tri) {
  std::vector<Vec2> acc(mesh.vertices().size(), Vec2{0.0, 0.0});
  std::vector<double> wsum(mesh.vertices().size(), 0.0);
  for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
    double a = mesh.triangle_area(static_cast<int>(t));
    for (int v : mesh.triangles()[t]) {
      acc[v] += per_tri[t] * a;
      wsum[v] += a;
    }
  }
  for (std::size_t v = 0; v < acc.size(); ++v) acc[v] = acc[v] * (1.0 / wsum[v]);
  return acc;
}

}  // namespace

double MetricField::target_h(int v) const {
  return 1.0 / std::sqrt(std::max(lambda[v][0], lambda[v][1]));
}

std::vector<Sym2> recover_hessian(const Field& phi) {
  if (phi.space->degree() != 1)
    throw std::invalid_argument("recover_hessian: degree-1 fields only");
  const Mesh& mesh = phi.space->mesh();
  std::vector<Vec2> grad_tri = gradient_field(phi);
  std::vector<Vec2> grad_vtx = average_to_vertices(mesh, grad_tri);

  std::size_t nt = mesh.triangles().size();
  std::vector<Vec2> hx_tri(nt), hy_tri(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    ElementGeometry g = element_geometry(mesh, static_cast<int>(t));
    Vec2 hx{0.0, 0.0}, hy{0.0, 0.0};
    const auto& tri = mesh.triangles()[t];
    for (int k = 0; k < 3; ++k) {
      hx += g.grad_lambda[k] * grad_vtx[tri[k]].x;
      hy += g.grad_lambda[k] * grad_vtx[tri[k]].y;
    }
    hx_tri[t] = hx;
    hy_tri[t] = hy;
  }
  std::vector<Vec2> hx_vtx = average_to_vertices(mesh, hx_tri);
  std::vector<Vec2> hy_vtx = average_to_vertices(mesh, hy_tri);

  std::vector<Sym2> out(mesh.vertices().size());
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v].xx = hx_vtx[v].x;
    out[v].yy = hy_vtx[v].y;
    out[v].xy = 0.5 * (hx_vtx[v].y + hy_vtx[v].x);
  }
  return out;
}

MetricField compute_metric(const std::vector<Sym2>& hessian, const MetricParams& params) {
  params.validate();
  MetricField out;
  out.tensor.resize(hessian.size());
  out.lambda.resize(hessian.size());
  for (std::size_t v = 0; v < hessian.size(); ++v) {
    const Sym2& h = hessian[v];
    auto [l1, l2] = sym_eigenvalues(h);
    double c1 = clamp_lambda(l1, params);
    double c2 = clamp_lambda(l2, params);
    out.lambda[v] = {c1, c2};

    // Eigenvector of l1; fall back to the axes when the tensor is already
    // diagonal.
    double ex, ey;
    if (std::abs(h.xy) > 1e-300) {
      ex = l1 - h.yy;
      ey = h.xy;
    } else if (h.xx >= h.yy) {
      ex = 1.0;
      ey = 0.0;
    } else {
      ex = 0.0;
      ey = 1.0;
    }
    double n = std::hypot(ex, ey);
    ex /= n;
    ey /= n;
    // G = c1 e e^T + c2 e_perp e_perp^T
    out.tensor[v].xx = c1 * ex * ex + c2 * ey * ey;
    out.tensor[v].yy = c1 * ey * ey + c2 * ex * ex;
    out.tensor[v].xy = (c1 - c2) * ex * ey;
  }
  return out;
}

namespace {

double longest_edge(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles()[t];
  double best = 0.0;
  for (int e = 0; e < 3; ++e) {
    Vec2 d = mesh.vertices()[tri[(e + 1) % 3]] - mesh.vertices()[tri[e]];
    best = std::max(best, d.norm());
  }
  return best;
}

// Per-vertex target h from (possibly interpolated) tensors, re-clamped.
std::vector<double> target_h_field(const std::vector<Sym2>& tensors,
                                   const MetricParams& params) {
  std::vector<double> h(tensors.size());
  double lo = 1.0 / (params.h_max * params.h_max);
  double hi = 1.0 / (params.h_min * params.h_min);
  for (std::size_t v = 0; v < tensors.size(); ++v) {
    auto [l1, l2] = sym_eigenvalues(tensors[v]);
    double lmax = std::min(std::max(std::max(l1, l2), lo), hi);
    h[v] = 1.0 / std::sqrt(lmax);
  }
  return h;
}

// Linear transfer across one bisection: kept vertices copy, midpoints
// average their refinement-edge endpoints (exact P1 interpolation).
template <class Value, class Average>
std::vector<Value> transfer_bisect(const Mesh& fine, const std::vector<Value>& old,
                                   const Average& avg) {
  const auto& origins = fine.vertex_origins();
  std::vector<Value> out(origins.size());
  for (std::size_t v = 0; v < origins.size(); ++v) {
    if (origins[v].old_index >= 0)
      out[v] = old[origins[v].old_index];
    else
      out[v] = avg(out[origins[v].parent_a], out[origins[v].parent_b]);
  }
  return out;
}

template <class Value>
std::vector<Value> transfer_coarsen(const Mesh& coarse, const std::vector<Value>& old) {
  const auto& origins = coarse.vertex_origins();
  std::vector<Value> out(origins.size());
  for (std::size_t v = 0; v < origins.size(); ++v) out[v] = old[origins[v].old_index];
  return out;
}

}  // namespace

AdaptResult adapt(const std::shared_ptr<const FemSpace>& space,
                  const std::vector<const Field*>& fields, const MetricField& metric,
                  const MetricParams& params) {
  params.validate();
  if (space->degree() != 1)
    throw std::invalid_argument("adapt: degree-1 spaces only");
  if (metric.tensor.size() != space->mesh().vertices().size())
    throw std::invalid_argument("adapt: metric does not match the mesh");
  for (const Field* f : fields)
    if (f->space.get() != space.get())
      throw std::invalid_argument("adapt: field lives on a different space");

  double mass_before = 0.0;
  if (!fields.empty()) mass_before = mass(*fields[0]);

  Mesh mesh = space->mesh();
  std::vector<std::vector<double>> values(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const Vector& v = fields[i]->values;
    values[i].assign(v.data(), v.data() + v.size());
  }
  std::vector<Sym2> tensors = metric.tensor;

  auto avg_scalar = [](double a, double b) { return 0.5 * (a + b); };
  auto avg_sym = [](const Sym2& a, const Sym2& b) {
    return Sym2{0.5 * (a.xx + b.xx), 0.5 * (a.xy + b.xy), 0.5 * (a.yy + b.yy)};
  };

  int passes = 0;
  while (passes < params.max_passes) {
    std::vector<double> h = target_h_field(tensors, params);
    std::vector<int> marks;
    for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
      const auto& tri = mesh.triangles()[t];
      double target = std::min({h[tri[0]], h[tri[1]], h[tri[2]]});
      if (longest_edge(mesh, static_cast<int>(t)) > params.c_ref * target)
        marks.push_back(static_cast<int>(t));
    }
    if (!marks.empty()) {
      Mesh finer = bisect(mesh, marks);
      for (auto& vals : values) vals = transfer_bisect(finer, vals, avg_scalar);
      tensors = transfer_bisect(finer, tensors, avg_sym);
      mesh = std::move(finer);
      ++passes;
      continue;
    }

    for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
      const auto& tri = mesh.triangles()[t];
      double target = std::min({h[tri[0]], h[tri[1]], h[tri[2]]});
      if (longest_edge(mesh, static_cast<int>(t)) < params.c_coarse * target)
        marks.push_back(static_cast<int>(t));
    }
    if (marks.empty()) break;
    Mesh coarser = coarsen(mesh, marks);
    if (coarser.triangles().size() == mesh.triangles().size()) break;
    for (auto& vals : values) vals = transfer_coarsen(coarser, vals);
    tensors = transfer_coarsen(coarser, tensors);
    mesh = std::move(coarser);
    ++passes;
  }

  AdaptResult result;
  result.passes = passes;
  auto new_space = std::make_shared<FemSpace>(
      std::make_shared<const Mesh>(std::move(mesh)), 1);
  result.space = new_space;
  result.fields.reserve(fields.size());
  for (auto& vals : values) {
    Vector v = Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    result.fields.emplace_back(new_space, std::move(v));
  }

  if (!fields.empty()) {
    double mass_after = mass(result.fields[0]);
    result.mass_drift = mass_after - mass_before;
    if (params.conserve_mass && result.mass_drift != 0.0) {
      double area = result.space->mesh().total_area();
      result.fields[0].values.array() -= result.mass_drift / area;
      result.mass_drift = mass(result.fields[0]) - mass_before;
    }
  }
  return result;
}

AdaptResult adapt_to_field(const Field& phi, const std::vector<const Field*>& extra,
                           const MetricParams& params) {
  MetricField metric = compute_metric(recover_hessian(phi), params);
  std::vector<const Field*> fields;
  fields.reserve(extra.size() + 1);
  fields.push_back(&phi);
  for (const Field* f : extra) fields.push_back(f);
  return adapt(phi.space, fields, metric, params);
}

}  // namespace chfem
