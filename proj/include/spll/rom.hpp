#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spll/fom_stepper.hpp"
#include "spll/opinf.hpp"

namespace spll {

enum class Method { SpLiftLearn, HOpInf, StandardLiftLearn, IntrusiveLifting };
enum class StepperKind { Kahan, Midpoint };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::string_view to_string(StepperKind s);
StepperKind parse_stepper(std::string_view name);

/// One quadratic contribution scale-free tensor(x[left], x[right]) into x'[out].
struct TensorTerm {
  std::shared_ptr<const QuadraticTensor> tensor;
  Index out_block = 0;
  Index left_block = 0;
  Index right_block = 0;
};

/// Symmetrized bilinear form of a sum of block tensor terms:
/// B(u, v) = sum 1/2 [H(u_l, v_r) + H(v_l, u_r)].
class TensorBilinear final : public BilinearForm {
 public:
  TensorBilinear(Index block_size, Index num_blocks, std::vector<TensorTerm> terms);
  [[nodiscard]] Index dim() const override { return block_ * blocks_; }
  [[nodiscard]] Vector apply(const Vector& u, const Vector& v) const override;
  void add_partial(const Vector& x, double scale, Matrix& out) const override;
  [[nodiscard]] std::vector<Index> active_rows() const override;

 private:
  Index block_;
  Index blocks_;
  std::vector<TensorTerm> terms_;
  // per distinct tensor, coefficients reordered to (left, out * right) so the
  // left contraction is one matrix-vector product
  std::map<const QuadraticTensor*, RowMajorMatrix> by_left_;
};

/// Symmetrized bilinear form of y -> B s(y) with s the non-redundant
/// quadratic features (i <= j).
class CompressedQuadratic final : public BilinearForm {
 public:
  explicit CompressedQuadratic(Matrix b);
  [[nodiscard]] Index dim() const override { return m_; }
  [[nodiscard]] Vector apply(const Vector& u, const Vector& v) const override;
  void add_partial(const Vector& x, double scale, Matrix& out) const override;
  [[nodiscard]] std::vector<Index> active_rows() const override;

 private:
  Index m_;
  Matrix b_;
};

/// Learned structure-preserving quadratic ROM (also used for the intrusive
/// lifting reference, where the linear blocks are Phi^T D Phi).
struct QuadraticROM {
  LiftingSpec spec;
  Index r = 0;
  std::map<std::string, Matrix> operators;
  std::map<std::string, std::shared_ptr<const QuadraticTensor>> tensors;
  std::shared_ptr<const ReducedBasis> basis;
  std::vector<std::string> field_names;
  QuadraticSystem system;
  Vector initial_state;

  [[nodiscard]] Index dim() const { return system.dim(); }
  [[nodiscard]] Index offset(const std::string& field) const;
  [[nodiscard]] Vector rhs(const Vector& x) const { return system.rhs(x); }
};

/// Per-equation ROM right-hand side written out term by term (independent
/// of the stacked QuadraticSystem); used to cross-check assembly.
Vector rom_rhs_per_equation(const QuadraticROM& rom, const Vector& x);

/// Stacked reduced state V^T y for a lifted FOM state.
Vector project_state(const ReducedBasis& basis, const FOMState& lifted);

QuadraticROM assemble_rom(const LiftingSpec& spec, std::shared_ptr<const ReducedBasis> basis,
                          const std::map<std::string, Matrix>& operators,
                          const std::map<std::string, QuadraticTensor>& tensors,
                          const FOMState* lifted_initial_state = nullptr);

/// Linear blocks from intrusive projection Phi^T D Phi (test/reference path).
std::map<std::string, Matrix> intrusive_operators(const ConservativeFOM& model, const ReducedBasis& basis);

/// HOpInf ROM q' = D_q p, p' = D_p q - Phi^T f_non(Phi q), evaluated at full n.
struct HamiltonianROM {
  Problem problem = Problem::SineGordon1D;
  Matrix d_q;
  Matrix d_p;
  std::shared_ptr<const ReducedBasis> basis;
  Vector initial_state;

  [[nodiscard]] Index r() const { return d_q.rows(); }
  [[nodiscard]] Index dim() const { return 2 * r(); }
  [[nodiscard]] Vector rhs(const Vector& x) const;
  [[nodiscard]] Matrix jacobian(const Vector& x) const;
};

/// Standard Lift & Learn ROM y' = A y + B s(y) in the stacked lifted state.
struct StandardROM {
  QuadraticSystem system;
  std::shared_ptr<const ReducedBasis> basis;
  Vector initial_state;

  [[nodiscard]] Index dim() const { return system.dim(); }
};

StandardROM assemble_standard_rom(const StandardOperators& ops, std::shared_ptr<const ReducedBasis> basis,
                                  const FOMState& lifted_initial_state);

Stepper make_stepper(const QuadraticROM& rom, double dt, StepperKind kind, const NewtonOptions& opts = {});
Stepper make_stepper(const HamiltonianROM& rom, double dt, const NewtonOptions& opts = {});
Stepper make_stepper(const StandardROM& rom, double dt, StepperKind kind, const NewtonOptions& opts = {});

template <class Rom>
Trajectory simulate_rom(const Rom& rom, double dt, long n_steps, StepperKind kind,
                        const NewtonOptions& opts = {}) {
  Stepper step;
  if constexpr (std::is_same_v<Rom, HamiltonianROM>) {
    (void)kind;
    step = make_stepper(rom, dt, opts);
  } else {
    step = make_stepper(rom, dt, kind, opts);
  }
  return integrate(step, rom.initial_state, dt, n_steps);
}

/// Quadratic invariant of the learned ROM, e.g. 1/2 p'p - 1/2 q'Dq + c w1'w1.
double perturbed_lifted_energy(const QuadraticROM& rom, const Vector& x);

/// ||Q - Phi Qhat||_F^2 / ||Q||_F^2.
double relative_state_error(const Matrix& reference, const Matrix& basis_block, const Matrix& reduced);

/// FOM energy of the reconstructed states, one value per trajectory column.
/// OpenMP-parallel over columns; bit-identical to the serial reference.
Vector fom_energy_series(const ConservativeFOM& model, const ReducedBasis& basis, const Matrix& reduced_traj);
Vector fom_energy_series_serial(const ConservativeFOM& model, const ReducedBasis& basis,
                                const Matrix& reduced_traj);

/// |E(V x(t)) - E(V x(0))| per column.
Vector fom_energy_error(const ConservativeFOM& model, const ReducedBasis& basis, const Matrix& reduced_traj);

/// 1 / (training error * wall-clock seconds).
double efficacy(double train_error, double wall_seconds);

struct DiagnosticsReport {
  Problem problem = Problem::SineGordon1D;
  Method method = Method::SpLiftLearn;
  Index r = 0;
  std::map<std::string, double> train_error;  // per field group ("q" or "psi", "phi")
  std::map<std::string, double> test_error;
  Vector times;
  Vector energy_error;
  Vector lifted_energy_drift;  // empty for non-quadratic ROMs
  double max_energy_error_train = 0.0;
  double max_energy_error = 0.0;
  double wall_seconds = 0.0;
  double efficacy = 0.0;
  std::string primary_field;  // field used for efficacy
  long failed_step = -1;      // first step the ROM could not take, -1 if none
};

/// Relative state errors of a reduced trajectory against FOM snapshots, per
/// field group, restricted to FOM sample columns [first, last].
std::map<std::string, double> state_errors(Problem problem, const ReducedBasis& basis, const SnapshotSet& fom,
                                           const Matrix& reduced_traj, Index first, Index last);

}  // namespace spll
