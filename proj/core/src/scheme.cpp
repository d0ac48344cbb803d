#include "chfem/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace chfem {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double SchemeParams::beta_at(double dt) const {
  return beta_mode == BetaMode::Fixed ? beta : beta_coeff * dt;
}

void SchemeParams::validate(double dt) const {
  if (alpha != 1 && alpha != 2)
    throw std::invalid_argument("scheme.alpha must be 1 or 2");
  double b = beta_at(dt);
  double bound = 1.0 - 1.0 / alpha;
  if (!(b >= -1e-15 && b <= bound + 1e-12)) {
    std::ostringstream msg;
    msg << "scheme.beta = " << b << " outside [0, " << bound << "] (alpha = " << alpha
        << ", dt = " << dt << ")";
    throw std::invalid_argument(msg.str());
  }
}

SchemeParams SchemeParams::od1w() { return {1, BetaMode::Fixed, 0.0, 0.0}; }
SchemeParams SchemeParams::od2w() { return {2, BetaMode::Fixed, 0.0, 0.0}; }
SchemeParams SchemeParams::od2modw(double beta_coeff) {
  return {2, BetaMode::ProportionalToDt, 0.0, beta_coeff};
}

NdTerms numerical_dissipation(const Field& phi_n, const Field& phi_np1,
                              const PhysicsParams& physics, const SchemeParams& scheme,
                              double dt) {
  if (phi_n.space.get() != phi_np1.space.get())
    throw std::invalid_argument("numerical_dissipation: fields live on different spaces");
  if (!(dt > 0.0)) throw std::invalid_argument("numerical_dissipation: dt must be positive");
  const FemSpace& space = *phi_n.space;
  const Field* fields[2] = {&phi_n, &phi_np1};

  NdTerms nd;

  double bracket = scheme.kappa(dt) - 0.5;  // 1/alpha - 1/2 + beta
  if (bracket != 0.0) {
    double grad_incr = integrate_functional(
        space, fields,
        [](std::span<const double>, std::span<const Vec2> g, Vec2) {
          return (g[1] - g[0]).norm2();
        },
        2);
    nd.philic = bracket * grad_incr / dt;
  }

  nd.phobic = integrate_functional(
                  space, fields,
                  [](std::span<const double> v, std::span<const Vec2>, Vec2) {
                    return fhat_m(v[0], v[1]) * (v[1] - v[0]) - (F_m(v[1]) - F_m(v[0]));
                  },
                  4) /
              dt;

  std::vector<BoundaryLabel> solid =
      distinct_boundary_labels(space.mesh(), BoundaryTag::Solid);
  if (!solid.empty()) {
    const ThetaField& theta = physics.theta;
    nd.wall = integrate_boundary_functional(
                  space, solid, fields,
                  [&theta](std::span<const double> v, Vec2 x, BoundaryLabel l) {
                    double th = theta.value(x, l);
                    return fhat_w(v[0], v[1], th) * (v[1] - v[0]) -
                           (wall_energy(v[1], th) - wall_energy(v[0], th));
                  },
                  3) /
              dt;

    auto crosses = [](double a, double b, double level) {
      return (a - level) * (b - level) < 0.0;
    };
    const auto& bedges = space.mesh().boundary_edges();
    for (std::size_t be = 0; be < bedges.size(); ++be) {
      if (bedges[be].label.tag != BoundaryTag::Solid) continue;
      auto dofs = space.boundary_edge_dofs(static_cast<int>(be));
      double a0 = phi_n.values[dofs[0]], a1 = phi_n.values[dofs[1]];
      double b0 = phi_np1.values[dofs[0]], b1 = phi_np1.values[dofs[1]];
      if (crosses(a0, a1, 1.0) || crosses(a0, a1, -1.0) || crosses(b0, b1, 1.0) ||
          crosses(b0, b1, -1.0))
        ++nd.branch_crossings;
    }
  }
  return nd;
}

Stepper::Stepper(std::shared_ptr<const FemSpace> space, PhysicsParams physics,
                 SchemeParams scheme, LinearSolveConfig solver)
    : space_(std::move(space)),
      physics_(std::move(physics)),
      scheme_(scheme),
      solver_(solver) {
  physics_.validate();
  if (space_->degree() != 1)
    throw std::invalid_argument(
        "Stepper: only degree-1 spaces are supported (the quadrature orders of the "
        "step assembly are tuned to piecewise-linear fields)");

  M_ = assemble_mass(*space_);
  K_ = assemble_stiffness(*space_);
  solid_labels_ = distinct_boundary_labels(space_->mesh(), BoundaryTag::Solid);

  mdot_load_ = Vector::Zero(space_->dof_count());
  if (!physics_.mdot.empty()) {
    std::vector<BoundaryLabel> labels;
    for (const auto& [sub_id, value] : physics_.mdot)
      labels.push_back({BoundaryTag::Open, sub_id});
    const auto& mdot = physics_.mdot;
    mdot_load_ = assemble_boundary_load(
        *space_, labels, nullptr,
        [&mdot](double, Vec2, BoundaryLabel l) { return mdot.at(l.sub_id); }, 3);
  }

  for (const auto& [sub_id, value] : physics_.phi_dirichlet)
    for (int dof : space_->boundary_dofs(BoundaryLabel{BoundaryTag::Open, sub_id}))
      dirichlet_.emplace_back(dof, value);
  std::sort(dirichlet_.begin(), dirichlet_.end());
}

std::pair<SparseMatrix, Vector> Stepper::assemble(const State& state) const {
  if (state.phi.space.get() != space_.get())
    throw std::invalid_argument("Stepper::assemble: state lives on a different space");
  const double dt = state.dt;
  if (!(dt > 0.0)) throw std::invalid_argument("Stepper::assemble: dt must be positive");
  scheme_.validate(dt);

  const double eps = physics_.epsilon;
  const double mob = physics_.mobility;
  const double kap = scheme_.kappa(dt);
  const int n = space_->dof_count();

  SparseMatrix W = assemble_weighted_mass(
      *space_, state.phi, [](double a) { return 1.5 * a * a - 0.5; }, 4);
  Vector g_m = assemble_load(
      *space_, state.phi, [](double a) { return -0.5 * a * a * a - 0.5 * a; }, 4);

  SparseMatrix B(n, n);
  Vector g_w = Vector::Zero(n);
  if (!solid_labels_.empty()) {
    const ThetaField& theta = physics_.theta;
    B = assemble_boundary_mass(
        *space_, solid_labels_, &state.phi,
        [&theta](double a, Vec2 x, BoundaryLabel l) {
          return fhat_w_new_coefficient(a, theta.value(x, l));
        },
        3);
    g_w = assemble_boundary_load(
        *space_, solid_labels_, &state.phi,
        [&theta](double a, Vec2 x, BoundaryLabel l) {
          return fhat_w_old_part(a, theta.value(x, l));
        },
        3);
  }

  std::vector<char> is_dirichlet(n, 0);
  for (const auto& [dof, value] : dirichlet_) is_dirichlet[dof] = 1;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(2 * M_.nonZeros() + 2 * K_.nonZeros() +
                                         W.nonZeros() + B.nonZeros() + n));
  auto add_block = [&](const SparseMatrix& S, int row_off, int col_off, double scale,
                       bool skip_dirichlet) {
    for (int k = 0; k < S.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(S, k); it; ++it) {
        if (skip_dirichlet && is_dirichlet[it.row()]) continue;
        trips.emplace_back(row_off + static_cast<int>(it.row()),
                           col_off + static_cast<int>(it.col()), scale * it.value());
      }
  };
  // Mass balance rows: (1/dt) M phi + b K mu = (1/dt) M phi_old + flux load.
  add_block(M_, 0, 0, 1.0 / dt, true);
  add_block(K_, 0, n, mob, true);
  // Potential rows: -eps kap K phi - (1/eps) W phi - B phi + M mu
  //               = eps (1-kap) K phi_old + (1/eps) g_m + g_w.
  add_block(K_, n, 0, -eps * kap, false);
  add_block(W, n, 0, -1.0 / eps, false);
  if (B.nonZeros() > 0) add_block(B, n, 0, -1.0, false);
  add_block(M_, n, n, 1.0, false);
  for (const auto& [dof, value] : dirichlet_) trips.emplace_back(dof, dof, 1.0);

  SparseMatrix A(2 * n, 2 * n);
  A.setFromTriplets(trips.begin(), trips.end());

  Vector rhs(2 * n);
  rhs.head(n) = M_ * state.phi.values / dt + mdot_load_;
  rhs.tail(n) =
      eps * (1.0 - kap) * (K_ * state.phi.values) + g_m / eps + g_w;
  for (const auto& [dof, value] : dirichlet_) rhs[dof] = value;
  return {std::move(A), std::move(rhs)};
}

std::pair<State, EnergyReport> Stepper::step(const State& state) {
  auto [A, rhs] = assemble(state);
  const int n = space_->dof_count();
  Vector x = solver_.solve(A, rhs);

  State out;
  out.phi = Field(space_, x.head(n));
  out.mu = Field(space_, x.tail(n));
  out.time = state.time + state.dt;
  out.dt = state.dt;
  out.step = state.step + 1;

  EnergyReport rep;
  rep.time = out.time;
  auto [e_mix, e_wall] = free_energy(out.phi, physics_);
  rep.E_mix = e_mix;
  rep.E_wall = e_wall;
  rep.E_total = e_mix + e_wall;
  rep.mass = mass(out.phi);
  rep.dissipation = state.dt * physics_.mobility * out.mu.values.dot(K_ * out.mu.values);
  NdTerms nd = numerical_dissipation(state.phi, out.phi, physics_, scheme_, state.dt);
  rep.nd_philic = nd.philic;
  rep.nd_phobic = nd.phobic;
  rep.nd_wall = nd.wall;
  rep.branch_crossings = nd.branch_crossings;
  rep.boundary_work = state.dt * mdot_load_.dot(out.mu.values);
  return {std::move(out), rep};
}

std::pair<SparseMatrix, Vector> assemble_step_system(const State& state,
                                                     const PhysicsParams& physics,
                                                     const SchemeParams& scheme) {
  Stepper stepper(state.phi.space, physics, scheme);
  return stepper.assemble(state);
}

std::pair<State, EnergyReport> step(const State& state, const PhysicsParams& physics,
                                    const SchemeParams& scheme,
                                    const LinearSolveConfig& solver) {
  Stepper stepper(state.phi.space, physics, scheme, solver);
  return stepper.step(state);
}

namespace {

struct IsolinePoints {
  std::vector<Vec2> points;
  double y_wall = 0.0;
};

// phi = 0 crossings of the P1 field on triangle edges, deduplicated across
// neighbouring triangles, restricted to the band [y_wall, y_wall + window].
IsolinePoints isoline_near_wall(const Field& phi, const BoundaryLabel& substrate,
                                double window) {
  const FemSpace& space = *phi.space;
  const Mesh& mesh = space.mesh();

  double y_sum = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
  int wall_edges = 0;
  for (const BoundaryEdge& be : mesh.boundary_edges()) {
    if (!(be.label == substrate)) continue;
    for (int v : {be.a, be.b}) {
      double y = mesh.vertices()[v].y;
      if (wall_edges == 0 && v == be.a) y_lo = y_hi = y;
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
      y_sum += y;
    }
    ++wall_edges;
  }
  if (wall_edges == 0)
    throw std::invalid_argument("equilibrium_angle: no boundary edge carries the substrate label");
  double y_wall = y_sum / (2 * wall_edges);
  if (y_hi - y_lo > 1e-9 * (1.0 + std::abs(y_wall)))
    throw std::invalid_argument("equilibrium_angle: substrate is not horizontal");

  IsolinePoints out;
  out.y_wall = y_wall;
  std::unordered_set<std::uint64_t> seen;
  const double band_lo = y_wall - 1e-12 * (1.0 + std::abs(y_wall));
  const double band_hi = y_wall + window;
  for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
    auto dofs = space.element_dofs(static_cast<int>(t));
    for (int e = 0; e < 3; ++e) {
      int i = dofs[e], j = dofs[(e + 1) % 3];
      double vi = phi.values[i], vj = phi.values[j];
      bool pos_i = vi > 0.0, pos_j = vj > 0.0;
      if (pos_i == pos_j) continue;
      std::uint64_t key = (static_cast<std::uint64_t>(std::min(i, j)) << 32) |
                          static_cast<std::uint64_t>(std::max(i, j));
      if (!seen.insert(key).second) continue;
      double s = vi / (vi - vj);
      Vec2 pi = mesh.vertices()[i], pj = mesh.vertices()[j];
      Vec2 p{pi.x + s * (pj.x - pi.x), pi.y + s * (pj.y - pi.y)};
      if (p.y >= band_lo && p.y <= band_hi) out.points.push_back(p);
    }
  }
  return out;
}

}  // namespace

double equilibrium_angle(const Field& phi, const BoundaryLabel& substrate,
                         double window) {
  if (!(window > 0.0))
    throw std::invalid_argument("equilibrium_angle: window must be positive");
  if (phi.space->degree() != 1)
    throw std::invalid_argument("equilibrium_angle: degree-1 fields only");

  IsolinePoints iso = isoline_near_wall(phi, substrate, window);
  if (iso.points.empty())
    throw std::runtime_error(
        "equilibrium_angle: the phi = 0 isoline does not reach the substrate window");

  std::sort(iso.points.begin(), iso.points.end(),
            [](Vec2 a, Vec2 b) { return a.x < b.x; });

  // Contact regions are separated by at least the droplet body; points inside
  // one region are a mesh spacing apart.
  const double gap = 2.0 * window;
  std::vector<std::pair<std::size_t, std::size_t>> clusters;
  std::size_t begin = 0;
  for (std::size_t k = 1; k <= iso.points.size(); ++k) {
    if (k == iso.points.size() || iso.points[k].x - iso.points[k - 1].x > gap) {
      clusters.emplace_back(begin, k);
      begin = k;
    }
  }

  MeshLocator locator(phi.space->mesh_ptr());
  double angle_sum = 0.0;
  int used = 0;
  for (auto [lo, hi] : clusters) {
    std::size_t count = hi - lo;
    if (count < 2) continue;
    double my = 0.0, mx = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      my += iso.points[k].y;
      mx += iso.points[k].x;
    }
    my /= count;
    mx /= count;
    double cov = 0.0, var = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      cov += (iso.points[k].y - my) * (iso.points[k].x - mx);
      var += (iso.points[k].y - my) * (iso.points[k].y - my);
    }
    if (var <= 0.0) continue;
    double slope = cov / var;  // x = slope * y + intercept, through (mx, my)
    double x_mid = mx;

    // Which side of the isoline holds phi = +1 decides the measuring
    // direction. Probe symmetric points beside the fitted line, shrinking
    // the offset while they fall outside the triangulation.
    double offset = window;
    bool phase_on_right = true;
    bool decided = false;
    for (int attempt = 0; attempt < 6 && !decided; ++attempt, offset *= 0.5) {
      auto left = locator.locate({x_mid - offset, my});
      auto right = locator.locate({x_mid + offset, my});
      if (!left || !right) continue;
      auto value = [&phi](const std::pair<int, std::array<double, 3>>& loc) {
        auto dofs = phi.space->element_dofs(loc.first);
        return phi.values[dofs[0]] * loc.second[0] + phi.values[dofs[1]] * loc.second[1] +
               phi.values[dofs[2]] * loc.second[2];
      };
      double vl = value(*left), vr = value(*right);
      if (vl == vr) continue;
      phase_on_right = vr > vl;
      decided = true;
    }
    if (!decided) continue;

    double raw = std::atan2(1.0, slope);  // angle against +x, in (0, pi)
    angle_sum += phase_on_right ? raw : kPi - raw;
    ++used;
  }
  if (used == 0)
    throw std::runtime_error("equilibrium_angle: no contact cluster admits a line fit");
  return angle_sum / used;
}

double equilibrium_angle(const Field& phi, const BoundaryLabel& substrate,
                         const PhysicsParams& physics) {
  return equilibrium_angle(phi, substrate, 5.0 * physics.epsilon);
}

}  // namespace chfem
