#pragma once

#include <map>
#include <string>
#include <vector>

#include "spll/pde_bench.hpp"

namespace spll {

/// Energy-quadratizing lifting for one benchmark.
///
/// Canonical problems use the generic lifted form
///   q' = p
///   p' = D q + coupling * (w_a ⊙ w_b)
///   w_j' = (alpha_q[j] q + sum_i alpha_w(j, i) w_i) ⊙ p
/// with lifted energy 1/2 p'p - 1/2 q'Dq + energy_weight * w_1'w_1.
/// KGZ has its own single auxiliary w = q1^2 + q2^2 with
/// w' = 2 q1 ⊙ p1 + 2 q2 ⊙ p2, handled by dedicated branches.
struct LiftingSpec {
  Problem problem = Problem::SineGordon1D;
  int num_aux = 0;
  std::vector<std::string> aux_names;

  double coupling = 0.0;
  int coupling_a = 0;
  int coupling_b = 0;
  Vector alpha_q;  // length num_aux
  Matrix alpha_w;  // num_aux x num_aux
  double energy_weight = 1.0;

  /// Auxiliary maps tau_i applied componentwise; canonical problems only.
  [[nodiscard]] double tau(int i, double q) const;
  void validate() const;
};

LiftingSpec lifting_for(Problem problem);

/// Lifted state: the FOM fields followed by w_1..w_k.
FOMState lift_state(const LiftingSpec& spec, const FOMState& fom_state);

FOMState lifted_rhs(const LiftingSpec& spec, const ConservativeFOM& model, const FOMState& lifted);

double lifted_energy(const LiftingSpec& spec, const ConservativeFOM& model, const FOMState& lifted);

/// Dense reduced quadratic tensor H[i, j, l], stored with l fastest.
/// apply(a, b)_i = sum_{j,l} H[i, j, l] a_j b_l.
class QuadraticTensor {
 public:
  QuadraticTensor() = default;
  QuadraticTensor(Index out, Index left, Index right);

  [[nodiscard]] Index out_dim() const { return out_; }
  [[nodiscard]] Index left_dim() const { return left_; }
  [[nodiscard]] Index right_dim() const { return right_; }

  double& at(Index i, Index j, Index l) { return coeff_[static_cast<size_t>((i * left_ + j) * right_ + l)]; }
  [[nodiscard]] double at(Index i, Index j, Index l) const {
    return coeff_[static_cast<size_t>((i * left_ + j) * right_ + l)];
  }
  [[nodiscard]] const std::vector<double>& data() const { return coeff_; }
  std::vector<double>& data() { return coeff_; }

  [[nodiscard]] Vector apply(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const;
  /// out += scale * (matrix of b -> H(a, b)), shape out_dim x right_dim.
  void add_left_fixed(const Eigen::Ref<const Vector>& a, double scale, Eigen::Ref<Matrix> out) const;
  /// out += scale * (matrix of a -> H(a, b)), shape out_dim x left_dim.
  void add_right_fixed(const Eigen::Ref<const Vector>& b, double scale, Eigen::Ref<Matrix> out) const;

 private:
  Index out_ = 0;
  Index left_ = 0;
  Index right_ = 0;
  std::vector<double> coeff_;
};

/// H[i,j,l] = scale * sum_m out[m,i] left[m,j] right[m,l], so that
/// apply(a, b) = scale * out^T((left a) ⊙ (right b)). OpenMP-parallel over
/// the output index; every coefficient is summed over m in ascending order,
/// so the result is bit-identical to build_reduced_tensor_serial.
QuadraticTensor build_reduced_tensor(const Matrix& out_basis, const Matrix& left_basis,
                                     const Matrix& right_basis, double scale = 1.0);

QuadraticTensor build_reduced_tensor_serial(const Matrix& out_basis, const Matrix& left_basis,
                                            const Matrix& right_basis, double scale = 1.0);

struct ReducedBasis;

/// Named tensors a problem's ROM needs. Keys name the equation and the
/// left operand: "p" (momentum coupling), "w1:w2" (w1 equation, w2 ⊗ p),
/// "wj:q" (alpha_j q ⊗ p), KGZ "p" (Phi, V, Phi) and "w" (V, Phi, Phi).
std::map<std::string, QuadraticTensor> rom_quadratic_terms(const LiftingSpec& spec,
                                                           const ReducedBasis& basis);

}  // namespace spll
