#pragma once

#include <memory>

#include "chfem/fem.hpp"

namespace chfem {

struct LinearSolveConfig {
  enum class Method { Direct, Krylov };
  enum class Preconditioner { None, IncompleteLU };

  Method method = Method::Direct;
  double rel_tolerance = 1e-10;          // residual contract, (0, 1e-4] for Krylov
  int max_iterations = 2000;             // Krylov only
  Preconditioner preconditioner = Preconditioner::IncompleteLU;

  void validate() const;
};

/// Solves A x = rhs for a general sparse unsymmetric A. Guarantees
/// ||A x - rhs|| <= rel_tolerance * ||rhs|| on return; failure to converge
/// (Krylov) or a singular factorization (Direct) throws with the achieved
/// residual in the message. Direct solves are deterministic.
Vector solve(const SparseMatrix& A, const Vector& rhs, const LinearSolveConfig& config);

/// Same contract, but keeps the symbolic factorization across calls when the
/// sparsity pattern repeats (the usual case while the mesh is unchanged).
class LinearSolver {
 public:
  explicit LinearSolver(LinearSolveConfig config);
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  Vector solve(const SparseMatrix& A, const Vector& rhs);
  const LinearSolveConfig& config() const { return config_; }

 private:
  LinearSolveConfig config_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace chfem
