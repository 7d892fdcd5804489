#include "spll/lifting.hpp"

#include <cmath>

#include "spll/reduction.hpp"

namespace spll {

namespace {
}

LiftingSpec lifting_for(Problem problem) {
  LiftingSpec s;
  s.problem = problem;
  switch (problem) {
    case Problem::SineGordon1D:
    case Problem::SineGordon2D:
      // w1 = sin(q/2), w2 = cos(q/2)
      s.num_aux = 2;
      s.aux_names = {"w1", "w2"};
      s.coupling = -2.0;
      s.coupling_a = 0;
      s.coupling_b = 1;
      s.alpha_q = Vector::Zero(2);
      s.alpha_w = Matrix::Zero(2, 2);
      s.alpha_w(0, 1) = 0.5;
      s.alpha_w(1, 0) = -0.5;
      s.energy_weight = 2.0;
      break;
    case Problem::ExpWave1D:
      // w = exp(-q/2)
      s.num_aux = 1;
      s.aux_names = {"w"};
      s.coupling = 1.0;
      s.alpha_q = Vector::Zero(1);
      s.alpha_w = Matrix::Constant(1, 1, -0.5);
      s.energy_weight = 1.0;
      break;
    case Problem::KGZ2D:
      // w = q1^2 + q2^2
      s.num_aux = 1;
      s.aux_names = {"w"};
      s.energy_weight = 0.5;
      break;
  }
  return s;
}

double LiftingSpec::tau(int i, double q) const {
  switch (problem) {
    case Problem::SineGordon1D:
    case Problem::SineGordon2D: return i == 0 ? std::sin(0.5 * q) : std::cos(0.5 * q);
    case Problem::ExpWave1D: return std::exp(-0.5 * q);
    case Problem::KGZ2D: break;
  }
  throw NotCanonical("KGZ auxiliary depends on (q1, q2), not a scalar q");
}

void LiftingSpec::validate() const {
  require(num_aux >= 1, "lifting needs at least one auxiliary variable");
  require(static_cast<int>(aux_names.size()) == num_aux, "one name per auxiliary variable");
  if (problem == Problem::KGZ2D) return;
  require(alpha_q.size() == num_aux && alpha_w.rows() == num_aux && alpha_w.cols() == num_aux,
          "auxiliary coefficient shapes must match num_aux");
  require(coupling_a >= 0 && coupling_a < num_aux && coupling_b >= 0 && coupling_b < num_aux,
          "momentum coupling indices out of range");
  for (int j = 1; j < num_aux; ++j) {
    const bool all_zero = alpha_q[j] == 0.0 && alpha_w.row(j).isZero(0.0);
    require(!all_zero, "auxiliary dynamics coefficients for w" + std::to_string(j + 1) +
                           " cannot all be zero");
  }
}

FOMState lift_state(const LiftingSpec& spec, const FOMState& fom_state) {
  FOMState out = fom_state;
  if (spec.problem == Problem::KGZ2D) {
    require_dims(fom_state.fields.size() == 6, "KGZ state needs six fields");
    const Vector& q1 = fom_state.fields[0];
    const Vector& q2 = fom_state.fields[1];
    out.fields.emplace_back((q1.array().square() + q2.array().square()).matrix());
    return out;
  }
  require_dims(fom_state.fields.size() == 2, "wave state needs fields [q, p]");
  const Vector& q = fom_state.fields[0];
  for (int i = 0; i < spec.num_aux; ++i) {
    Vector w(q.size());
    for (Index m = 0; m < q.size(); ++m) w[m] = spec.tau(i, q[m]);
    out.fields.push_back(std::move(w));
  }
  return out;
}

FOMState lifted_rhs(const LiftingSpec& spec, const ConservativeFOM& model, const FOMState& lifted) {
  const auto& d = model.laplacian;
  FOMState out;
  out.time = lifted.time;
  if (spec.problem == Problem::KGZ2D) {
    require_dims(lifted.fields.size() == 7, "lifted KGZ state needs seven fields");
    const Vector& q1 = lifted.fields[0];
    const Vector& q2 = lifted.fields[1];
    const Vector& p1 = lifted.fields[2];
    const Vector& p2 = lifted.fields[3];
    const Vector& varphi = lifted.fields[4];
    const Vector& phi = lifted.fields[5];
    const Vector& w = lifted.fields[6];
    Vector dp1 = d * q1;
    dp1.array() -= q1.array() + phi.array() * q1.array() + w.array() * q1.array();
    Vector dp2 = d * q2;
    dp2.array() -= q2.array() + phi.array() * q2.array() + w.array() * q2.array();
    Vector dw = (2.0 * q1.array() * p1.array() + 2.0 * q2.array() * p2.array()).matrix();
    out.fields = {p1, p2, dp1, dp2, phi + w, d * varphi, dw};
    return out;
  }
  require_dims(static_cast<int>(lifted.fields.size()) == 2 + spec.num_aux,
               "lifted state needs [q, p, w_1..w_k]");
  const Vector& q = lifted.fields[0];
  const Vector& p = lifted.fields[1];
  auto aux = [&](int i) -> const Vector& { return lifted.fields[static_cast<size_t>(2 + i)]; };
  Vector dp = d * q;
  dp.array() += spec.coupling * aux(spec.coupling_a).array() * aux(spec.coupling_b).array();
  out.fields = {p, dp};
  for (int j = 0; j < spec.num_aux; ++j) {
    Vector factor = spec.alpha_q[j] * q;
    for (int i = 0; i < spec.num_aux; ++i) {
      if (spec.alpha_w(j, i) != 0.0) factor += spec.alpha_w(j, i) * aux(i);
    }
    out.fields.emplace_back((factor.array() * p.array()).matrix());
  }
  return out;
}

double lifted_energy(const LiftingSpec& spec, const ConservativeFOM& model, const FOMState& lifted) {
  const auto& d = model.laplacian;
  if (spec.problem == Problem::KGZ2D) {
    require_dims(lifted.fields.size() == 7, "lifted KGZ state needs seven fields");
    const Vector& q1 = lifted.fields[0];
    const Vector& q2 = lifted.fields[1];
    const Vector& p1 = lifted.fields[2];
    const Vector& p2 = lifted.fields[3];
    const Vector& varphi = lifted.fields[4];
    const Vector& phi = lifted.fields[5];
    const Vector& w = lifted.fields[6];
    const double psi_part = q1.squaredNorm() - q1.dot(d * q1) + q2.squaredNorm() - q2.dot(d * q2) +
                            p1.squaredNorm() + p2.squaredNorm();
    const double phi_part = -0.5 * varphi.dot(d * varphi) + 0.5 * phi.squaredNorm();
    return psi_part + phi_part + phi.dot(w) + 0.5 * w.squaredNorm();
  }
  const Vector& q = lifted.fields[0];
  const Vector& p = lifted.fields[1];
  const Vector& w1 = lifted.fields[2];
  return 0.5 * p.squaredNorm() - 0.5 * q.dot(d * q) + spec.energy_weight * w1.squaredNorm();
}

QuadraticTensor::QuadraticTensor(Index out, Index left, Index right)
    : out_(out), left_(left), right_(right), coeff_(static_cast<size_t>(out * left * right), 0.0) {}

Vector QuadraticTensor::apply(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const {
  require_dims(a.size() == left_ && b.size() == right_, "tensor operand size mismatch");
  Eigen::Map<const RowMajorMatrix> t(coeff_.data(), out_ * left_, right_);
  const Vector y = t * b;
  Eigen::Map<const RowMajorMatrix> ym(y.data(), out_, left_);
  return ym * a;
}

void QuadraticTensor::add_left_fixed(const Eigen::Ref<const Vector>& a, double scale,
                                     Eigen::Ref<Matrix> out) const {
  for (Index i = 0; i < out_; ++i) {
    Eigen::Map<const RowMajorMatrix> slice(coeff_.data() + i * left_ * right_, left_, right_);
    out.row(i).noalias() += scale * (a.transpose() * slice);
  }
}

void QuadraticTensor::add_right_fixed(const Eigen::Ref<const Vector>& b, double scale,
                                      Eigen::Ref<Matrix> out) const {
  Eigen::Map<const RowMajorMatrix> t(coeff_.data(), out_ * left_, right_);
  const Vector y = t * b;
  Eigen::Map<const RowMajorMatrix> ym(y.data(), out_, left_);
  out.noalias() += scale * ym;
}

std::map<std::string, QuadraticTensor> rom_quadratic_terms(const LiftingSpec& spec,
                                                           const ReducedBasis& basis) {
  std::map<std::string, QuadraticTensor> terms;
  const Matrix& phi = basis.phi;
  if (spec.problem == Problem::KGZ2D) {
    require_dims(basis.aux.size() == 1, "KGZ basis needs exactly one auxiliary block");
    const Matrix& v = basis.aux[0];
    terms["p"] = build_reduced_tensor(phi, v, phi, -1.0);
    terms["w"] = build_reduced_tensor(v, phi, phi, 2.0);
    return terms;
  }
  spec.validate();
  require_dims(static_cast<int>(basis.aux.size()) == spec.num_aux,
               "basis has the wrong number of auxiliary blocks");
  auto v = [&](int i) -> const Matrix& { return basis.aux[static_cast<size_t>(i)]; };
  terms["p"] = build_reduced_tensor(phi, v(spec.coupling_a), v(spec.coupling_b), spec.coupling);
  for (int j = 0; j < spec.num_aux; ++j) {
    const auto& name = spec.aux_names[static_cast<size_t>(j)];
    if (spec.alpha_q[j] != 0.0) {
      terms[name + ":q"] = build_reduced_tensor(v(j), phi, phi, spec.alpha_q[j]);
    }
    for (int i = 0; i < spec.num_aux; ++i) {
      if (spec.alpha_w(j, i) == 0.0) continue;
      terms[name + ":" + spec.aux_names[static_cast<size_t>(i)]] =
          build_reduced_tensor(v(j), v(i), phi, spec.alpha_w(j, i));
    }
  }
  return terms;
}

}  // namespace spll
