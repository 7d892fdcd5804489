#include "spll/fom_stepper.hpp"

#include <limits>

namespace spll {

FomMidpoint::FomMidpoint(const ConservativeFOM& model, double dt, NewtonOptions opts)
    : model_(model), dt_(dt), opts_(opts) {
  require(dt > 0.0, "time step must be positive");
  opts_.validate();
  const Index n = model.n();
  const double h = 0.5 * dt;
  identity_.resize(n, n);
  identity_.setIdentity();
  if (is_canonical(model.problem)) {
    pattern_ = identity_ - (h * h) * model.laplacian;
    pattern_.makeCompressed();
    ldlt_.analyzePattern(pattern_);
  } else {
    SparseMatrix j1 = (1.0 + h * h) * identity_ - (h * h) * model.laplacian;
    SparseMatrix j3 = identity_ - (h * h) * model.laplacian;
    ldlt_.compute(j1);
    ldlt_phi_.compute(j3);
    if (ldlt_.info() != Eigen::Success || ldlt_phi_.info() != Eigen::Success) {
      throw NonConvergence("KGZ midpoint: linear block factorization failed");
    }
  }
}

Vector FomMidpoint::operator()(const Vector& x) {
  require_dims(x.size() == model_.state_size(), "FOM state has wrong length");
  return is_canonical(model_.problem) ? step_wave(x) : step_kgz(x);
}

double FomMidpoint::full_residual(const Vector& x, const Vector& x_next) const {
  const Vector mid = 0.5 * (x + x_next);
  return (x_next - x - dt_ * fom_rhs(model_, mid)).lpNorm<Eigen::Infinity>();
}

Vector FomMidpoint::step_wave(const Vector& x) {
  const Index n = model_.n();
  const double h = 0.5 * dt_;
  const auto& d = model_.laplacian;
  const auto xq = x.head(n);
  const auto xp = x.tail(n);
  const Vector a = xq + h * xp;
  Vector z = a;
  Vector x_next(x.size());
  auto assemble = [&](const Vector& zq) {
    const Vector accel = d * zq - nonlinearity(model_.problem, zq);
    x_next.tail(n) = xp + dt_ * accel;
    x_next.head(n) = xq + dt_ * 0.5 * (xp + x_next.tail(n));
  };
  SparseMatrix jac = pattern_;
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts_.max_iterations; ++it) {
    assemble(z);
    res = full_residual(x, x_next);
    last_iterations_ = it;
    if (res <= opts_.tolerance) return x_next;
    Vector fz = nonlinearity(model_.problem, z);
    const Vector g = z - (h * h) * (d * z - fz) - a;
    jac = pattern_;
    for (Index i = 0; i < n; ++i) {
      jac.coeffRef(i, i) += h * h * nonlinearity_derivative(model_.problem, z[i]);
    }
    ldlt_.factorize(jac);
    if (ldlt_.info() != Eigen::Success) throw NonConvergence("midpoint Newton matrix not factorizable");
    z -= ldlt_.solve(g);
    if (!z.allFinite()) break;
  }
  assemble(z);
  res = full_residual(x, x_next);
  if (res <= opts_.tolerance) return x_next;
  throw NonConvergence("FOM midpoint: residual " + std::to_string(res) + " after " +
                       std::to_string(opts_.max_iterations) + " iterations");
}

Vector FomMidpoint::step_kgz(const Vector& x) {
  const Index n = model_.n();
  const double h = 0.5 * dt_;
  const auto& d = model_.laplacian;
  const auto q1 = x.segment(0, n);
  const auto q2 = x.segment(n, n);
  const auto p1 = x.segment(2 * n, n);
  const auto p2 = x.segment(3 * n, n);
  const auto vphi = x.segment(4 * n, n);
  const auto phi = x.segment(5 * n, n);

  Vector z1 = q1 + h * p1;
  Vector z2 = q2 + h * p2;
  Vector zv = vphi + h * phi;
  Vector x_next(x.size());
  Vector zph(n);
  Vector s(n);
  Vector acc1(n);
  Vector acc2(n);

  auto evaluate = [&]() {
    zph = phi + h * (d * zv);
    s = (z1.array().square() + z2.array().square()).matrix();
    acc1 = d * z1;
    acc1.array() -= z1.array() * (1.0 + zph.array() + s.array());
    acc2 = d * z2;
    acc2.array() -= z2.array() * (1.0 + zph.array() + s.array());
  };
  auto assemble = [&]() {
    x_next.segment(2 * n, n) = p1 + dt_ * acc1;
    x_next.segment(3 * n, n) = p2 + dt_ * acc2;
    x_next.segment(0, n) = q1 + dt_ * 0.5 * (p1 + x_next.segment(2 * n, n));
    x_next.segment(n, n) = q2 + dt_ * 0.5 * (p2 + x_next.segment(3 * n, n));
    x_next.segment(5 * n, n) = phi + dt_ * (d * zv);
    x_next.segment(4 * n, n) = vphi + dt_ * (0.5 * (phi + x_next.segment(5 * n, n)) + s);
  };

  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts_.max_iterations; ++it) {
    evaluate();
    assemble();
    res = full_residual(x, x_next);
    last_iterations_ = it;
    if (res <= opts_.tolerance) return x_next;
    const Vector g1 = z1 - q1 - h * (p1 + h * acc1);
    const Vector g2 = z2 - q2 - h * (p2 + h * acc2);
    const Vector g3 = zv - vphi - h * (zph + s);
    z1 -= ldlt_.solve(g1);
    z2 -= ldlt_.solve(g2);
    zv -= ldlt_phi_.solve(g3);
    if (!z1.allFinite() || !zv.allFinite()) break;
  }
  evaluate();
  assemble();
  res = full_residual(x, x_next);
  if (res <= opts_.tolerance) return x_next;
  throw NonConvergence("KGZ midpoint: residual " + std::to_string(res) + " after " +
                       std::to_string(opts_.max_iterations) + " iterations");
}

}  // namespace spll
