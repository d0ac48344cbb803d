#pragma once

#include <memory>
#include <utility>

#include "chfem/linalg.hpp"
#include "chfem/physics.hpp"

namespace chfem {

/// Time discretization family. kappa = 1/alpha + beta is the interpolation
/// weight of the new iterate in the stiffness term; alpha = 2 gives the
/// second-order member, alpha = 1 the first-order one, and a beta
/// proportional to dt adds O(dt) numerical diffusion on top of alpha = 2.
struct SchemeParams {
  enum class BetaMode { Fixed, ProportionalToDt };

  int alpha = 2;
  BetaMode beta_mode = BetaMode::Fixed;
  double beta = 0.0;        // Fixed mode
  double beta_coeff = 0.0;  // ProportionalToDt mode: beta = beta_coeff * dt

  double beta_at(double dt) const;
  double kappa(double dt) const { return 1.0 / alpha + beta_at(dt); }

  /// alpha must be 1 or 2 and beta(dt) must lie in [0, 1 - 1/alpha].
  void validate(double dt) const;

  static SchemeParams od1w();
  static SchemeParams od2w();
  static SchemeParams od2modw(double beta_coeff);
};

struct State {
  Field phi;   // phi^n
  Field mu;    // last computed chemical potential (zero before any step)
  double time = 0.0;
  double dt = 0.0;
  long step = 0;
};

/// The 2N x 2N linear system of one step: unknown blocks (phi^{n+1}, mu).
/// Row block 1 is the mass balance, row block 2 the chemical-potential
/// definition with the surrogate potentials linearized about phi^n. Strong
/// Dirichlet phi constraints replace the corresponding block-1 rows.
std::pair<SparseMatrix, Vector> assemble_step_system(const State& state,
                                                     const PhysicsParams& physics,
                                                     const SchemeParams& scheme);

struct NdTerms {
  double philic = 0.0;
  double phobic = 0.0;
  double wall = 0.0;
  /// Boundary edges where phi^n or phi^{n+1} crosses a wall-energy branch
  /// joint (phi = +-1) strictly inside the edge. On such edges the edge
  /// quadrature is no longer exact for the wall terms.
  int branch_crossings = 0;
};

/// The three numerical-dissipation integrals of the discrete energy law,
/// evaluated with the same quadrature the assembly uses. The step's energy
/// drop decomposes as
///   E(new) - E(old) = -dt*b*||grad mu||^2
///                     - dt*(eps*philic + phobic/eps + wall) + boundary work.
NdTerms numerical_dissipation(const Field& phi_n, const Field& phi_np1,
                              const PhysicsParams& physics, const SchemeParams& scheme,
                              double dt);

/// Reusable per-mesh stepper: caches the mass and stiffness matrices, the
/// boundary label lists, the Dirichlet dof set, and the solver's symbolic
/// factorization. Build a fresh one after mesh adaptation.
class Stepper {
 public:
  Stepper(std::shared_ptr<const FemSpace> space, PhysicsParams physics,
          SchemeParams scheme, LinearSolveConfig solver = {});

  const FemSpace& space() const { return *space_; }
  const std::shared_ptr<const FemSpace>& space_ptr() const { return space_; }
  const PhysicsParams& physics() const { return physics_; }
  const SchemeParams& scheme_params() const { return scheme_; }

  /// The assembled block system and right-hand side for one step of length
  /// state.dt, Dirichlet rows already replaced.
  std::pair<SparseMatrix, Vector> assemble(const State& state) const;

  /// Advances state by state.dt and reports energy, mass, dissipation, the
  /// ND terms and the boundary work of the step.
  std::pair<State, EnergyReport> step(const State& state);

 private:
  std::shared_ptr<const FemSpace> space_;
  PhysicsParams physics_;
  SchemeParams scheme_;
  SparseMatrix M_, K_;
  std::vector<BoundaryLabel> solid_labels_;
  Vector mdot_load_;                            // (mdot, psi) over Open edges
  std::vector<std::pair<int, double>> dirichlet_;  // dof -> imposed phi
  LinearSolver solver_;
};

/// One-shot convenience wrapper around Stepper.
std::pair<State, EnergyReport> step(const State& state, const PhysicsParams& physics,
                                    const SchemeParams& scheme,
                                    const LinearSolveConfig& solver = {});

/// Contact angle of the phi = 0 isoline where it meets a horizontal
/// substrate, measured through the phi = +1 phase. Isoline points within
/// `window` above the wall are clustered by x and fitted with least-squares
/// lines; the mean angle over the contact clusters is returned. Throws when
/// the isoline misses the substrate region.
double equilibrium_angle(const Field& phi, const BoundaryLabel& substrate,
                         double window);

/// Same with the default window of 5*epsilon.
double equilibrium_angle(const Field& phi, const BoundaryLabel& substrate,
                         const PhysicsParams& physics);

}  // namespace chfem
