#pragma once

#include <Eigen/SparseCholesky>

#include "spll/integrators.hpp"
#include "spll/pde_bench.hpp"

namespace spll {

/// Implicit midpoint for the benchmark FOMs. The momentum-like unknowns are
/// eliminated so Newton runs on the position block only:
///   wave: z_q - h^2 (D z_q - f(z_q)) = x_q + h x_p,   h = dt/2,
/// with the sparse symmetric Jacobian I - h^2 D + h^2 diag(f'(z_q)).
/// KGZ eliminates p1, p2 and phi and iterates on (q1, q2, varphi) with the
/// factorized linear part as a frozen Jacobian; the nonlinear coupling is
/// O(h^2) so the iteration contracts fast at benchmark step sizes.
/// Both variants stop on the max-norm of the full midpoint residual.
class FomMidpoint {
 public:
  FomMidpoint(const ConservativeFOM& model, double dt, NewtonOptions opts = {});

  Vector operator()(const Vector& x);

  [[nodiscard]] int last_iterations() const { return last_iterations_; }

 private:
  Vector step_wave(const Vector& x);
  Vector step_kgz(const Vector& x);
  [[nodiscard]] double full_residual(const Vector& x, const Vector& x_next) const;

  const ConservativeFOM& model_;
  double dt_;
  NewtonOptions opts_;
  SparseMatrix identity_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_phi_;  // KGZ varphi block
  SparseMatrix pattern_;
  int last_iterations_ = 0;
};

}  // namespace spll
