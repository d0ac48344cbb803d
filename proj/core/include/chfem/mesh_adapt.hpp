#pragma once

#include <array>
#include <memory>
#include <vector>

#include "chfem/fem.hpp"

namespace chfem {

/// Sizing-field parameters. gamma scales the recovered curvature into an
/// interpolation-error budget; the target edge length is clamped into
/// [h_min, h_max]. c_ref and c_coarse put a hysteresis band around the
/// target so meshes do not flip-flop between passes.
struct MetricParams {
  double gamma = 0.01;
  double h_min = 1e-3;
  double h_max = 0.05;
  int adapt_every = 10;  // accepted steps between adaptations
  double c_ref = 1.4;
  double c_coarse = 0.6;
  int max_passes = 12;
  /// Shift the first transferred field by a constant after adaptation so its
  /// integral is preserved exactly (coarsening interpolation loses mass at
  /// second order).
  bool conserve_mass = false;

  void validate() const;
};

struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
};

/// Per-vertex sizing tensor: the recovered Hessian with eigenvalues mapped
/// through lambda -> min(max(|lambda|/gamma, 1/h_max^2), 1/h_min^2).
struct MetricField {
  std::vector<Sym2> tensor;
  std::vector<std::array<double, 2>> lambda;

  /// Target edge length at vertex v: 1/sqrt(max lambda).
  double target_h(int v) const;
};

/// Double gradient recovery of a P1 field: per-triangle gradients are
/// area-averaged to the vertices, differentiated again per triangle,
/// averaged back and symmetrized.
std::vector<Sym2> recover_hessian(const Field& phi);

MetricField compute_metric(const std::vector<Sym2>& hessian, const MetricParams& params);

struct AdaptResult {
  std::shared_ptr<const FemSpace> space;
  std::vector<Field> fields;
  int passes = 0;
  /// Integral change of fields[0] across the transfer (0 after a
  /// conserve_mass shift, and 0 to round-off for refinement-only events).
  double mass_drift = 0.0;
};

/// Bisection/coarsening passes toward edge lengths c_coarse*h .. c_ref*h,
/// transferring the given P1 fields (and the metric) by linear interpolation
/// each pass. Stops when no triangle is marked or max_passes is reached.
AdaptResult adapt(const std::shared_ptr<const FemSpace>& space,
                  const std::vector<const Field*>& fields, const MetricField& metric,
                  const MetricParams& params);

/// recover_hessian + compute_metric + adapt in one call, with fields[0]
/// driving the metric.
AdaptResult adapt_to_field(const Field& phi, const std::vector<const Field*>& extra,
                           const MetricParams& params);

}  // namespace chfem
