#pragma once

#include <Eigen/LU>
#include <Eigen/SparseCore>
#include <functional>
#include <vector>
#include <memory>
#include <utility>

#include "spll/common.hpp"

namespace spll {

enum class JacobianMode { Analytic, FiniteDifference };

struct NewtonOptions {
  double tolerance = 1e-12;  // max-norm of the step residual
  int max_iterations = 50;
  JacobianMode jacobian = JacobianMode::Analytic;

  void validate() const {
    require(tolerance > 0.0, "Newton tolerance must be positive");
    require(max_iterations >= 1, "Newton needs at least one iteration");
  }
};

/// Symmetric bilinear map B(u, v) = B(v, u) on R^m.
class BilinearForm {
 public:
  virtual ~BilinearForm() = default;
  [[nodiscard]] virtual Index dim() const = 0;
  [[nodiscard]] virtual Vector apply(const Vector& u, const Vector& v) const = 0;
  /// out += scale * (matrix of v -> B(x, v)).
  virtual void add_partial(const Vector& x, double scale, Matrix& out) const = 0;
  /// Rows of B(u, v) that can be nonzero. Default: all of them.
  [[nodiscard]] virtual std::vector<Index> active_rows() const;

  [[nodiscard]] Matrix partial(const Vector& x) const {
    Matrix m = Matrix::Zero(dim(), dim());
    add_partial(x, 1.0, m);
    return m;
  }
};

/// x' = c + A x + B(x, x).
struct QuadraticSystem {
  Vector c;
  Matrix A;
  std::shared_ptr<const BilinearForm> B;

  [[nodiscard]] Index dim() const { return A.rows(); }
  [[nodiscard]] Vector rhs(const Vector& x) const;
  [[nodiscard]] Matrix jacobian(const Vector& x) const;
};

/// Bilinear form given by a dense symmetric tensor T[i][j][l] = T[i][l][j];
/// mostly for tests and small systems.
class DenseBilinear final : public BilinearForm {
 public:
  /// `slices[i]` is the symmetric matrix of the i-th output component.
  explicit DenseBilinear(std::vector<Matrix> slices);
  [[nodiscard]] Index dim() const override { return static_cast<Index>(slices_.size()); }
  [[nodiscard]] Vector apply(const Vector& u, const Vector& v) const override;
  void add_partial(const Vector& x, double scale, Matrix& out) const override;

 private:
  std::vector<Matrix> slices_;
};

using RhsFn = std::function<Vector(const Vector&)>;
using JacFn = std::function<Matrix(const Vector&)>;

/// One implicit midpoint step x' = x + dt f((x + x')/2), solved by Newton on
/// the midpoint z = (x + x')/2. An empty `jac` means finite differences.
Vector implicit_midpoint_step(const RhsFn& rhs, const JacFn& jac, const Vector& x, double dt,
                              const NewtonOptions& opts = {});

Vector implicit_midpoint_step(const QuadraticSystem& sys, const Vector& x, double dt,
                              const NewtonOptions& opts = {});

/// Kahan's linearly implicit step for quadratic fields:
/// (I - dt B(x,.) - dt/2 A) x' = x + dt/2 A x + dt c.
Vector kahan_step(const QuadraticSystem& sys, const Vector& x, double dt);

/// Reusable Kahan stepper that keeps its factorization workspace.
class KahanStepper {
 public:
  KahanStepper(const QuadraticSystem& sys, double dt);
  Vector operator()(const Vector& x);

 private:
  const QuadraticSystem& sys_;
  double dt_;
  Matrix base_;  // I - dt/2 A
  Eigen::SparseMatrix<double> half_a_;  // dt/2 A; mostly zero blocks
  Matrix step_matrix_;
  Vector rhs_;
  Eigen::PartialPivLU<Matrix> lu_;

  // Rows without quadratic terms keep their step-matrix rows fixed. They are
  // factored once; each step then only factors the Schur complement on the
  // remaining rows. Empty `fixed_` means the plain dense solve.
  std::vector<Index> fixed_;
  std::vector<Index> active_;
  // the same index sets as contiguous (start, length) runs, for block copies
  std::vector<std::pair<Index, Index>> fixed_runs_;
  std::vector<std::pair<Index, Index>> active_runs_;
  Eigen::PartialPivLU<Matrix> lu_fixed_;
  Eigen::SparseMatrix<double> couple_;  // M_ff^{-1} M_fa, mostly structural zeros
  Matrix schur_;
  Matrix m_af_;
};

using Stepper = std::function<Vector(const Vector&)>;

struct Trajectory {
  Matrix states;  // m x (columns)
  Vector times;
};

/// Column k holds the state after k * stride steps; column 0 is x0.
/// Stepper exceptions are rethrown as StepFailure carrying the step index.
Trajectory integrate(const Stepper& step, const Vector& x0, double dt, long n_steps,
                     long stride = 1);

/// Calls `observe(k, state)` for k = 0..n_steps without storing anything.
void integrate_observe(const Stepper& step, const Vector& x0, long n_steps,
                       const std::function<void(long, const Vector&)>& observe);

struct Derivative {
  Matrix values;      // m x (K - 8)
  Index first = 4;    // first retained sample index
  Index last = 0;     // last retained sample index (inclusive)
};

/// Nine-point eighth-order central difference in time; drops four samples
/// at each end so derivative column j aligns with sample j + 4.
Derivative central_diff_8(const Matrix& series, double dt);

}  // namespace spll
