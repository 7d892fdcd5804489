#include "spll/integrators.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace spll {

Vector QuadraticSystem::rhs(const Vector& x) const {
  Vector out = A * x;
  if (c.size() > 0) out += c;
  if (B) out += B->apply(x, x);
  return out;
}

Matrix QuadraticSystem::jacobian(const Vector& x) const {
  Matrix j = A;
  if (B) B->add_partial(x, 2.0, j);
  return j;
}

DenseBilinear::DenseBilinear(std::vector<Matrix> slices) : slices_(std::move(slices)) {
  const Index m = dim();
  for (const auto& s : slices_) {
    require_dims(s.rows() == m && s.cols() == m, "bilinear slice must be m x m");
  }
}

Vector DenseBilinear::apply(const Vector& u, const Vector& v) const {
  Vector out(dim());
  for (Index i = 0; i < dim(); ++i) out[i] = u.dot(slices_[static_cast<size_t>(i)] * v);
  return out;
}

void DenseBilinear::add_partial(const Vector& x, double scale, Matrix& out) const {
  for (Index i = 0; i < dim(); ++i) out.row(i) += scale * (x.transpose() * slices_[static_cast<size_t>(i)]);
}

namespace {

Matrix fd_jacobian(const RhsFn& rhs, const Vector& z) {
  const Index m = z.size();
  Matrix j(m, m);
  Vector zp = z;
  for (Index k = 0; k < m; ++k) {
    const double h = 1e-7 * std::max(1.0, std::abs(z[k]));
    zp[k] = z[k] + h;
    const Vector fp = rhs(zp);
    zp[k] = z[k] - h;
    const Vector fm = rhs(zp);
    zp[k] = z[k];
    j.col(k) = (fp - fm) / (2.0 * h);
  }
  return j;
}

}  // namespace

Vector implicit_midpoint_step(const RhsFn& rhs, const JacFn& jac, const Vector& x, double dt,
                              const NewtonOptions& opts) {
  require(dt > 0.0, "time step must be positive");
  opts.validate();
  const double h = 0.5 * dt;
  const Index m = x.size();
  Vector z = x + h * rhs(x);
  double res_norm = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iterations; ++it) {
    // full step residual x' - x - dt f(z) with x' = 2z - x equals 2 (z - x - h f(z))
    const Vector f = rhs(z);
    const Vector g = z - x - h * f;
    res_norm = 2.0 * g.lpNorm<Eigen::Infinity>();
    if (res_norm <= opts.tolerance) return 2.0 * z - x;
    const Matrix jf = (jac && opts.jacobian == JacobianMode::Analytic) ? jac(z) : fd_jacobian(rhs, z);
    const Matrix newton = Matrix::Identity(m, m) - h * jf;
    z -= newton.partialPivLu().solve(g);
    if (!z.allFinite()) break;
  }
  const Vector g = z - x - h * rhs(z);
  res_norm = 2.0 * g.lpNorm<Eigen::Infinity>();
  if (res_norm <= opts.tolerance) return 2.0 * z - x;
  throw NonConvergence("implicit midpoint: residual " + std::to_string(res_norm) + " after " +
                       std::to_string(opts.max_iterations) + " Newton iterations");
}

Vector implicit_midpoint_step(const QuadraticSystem& sys, const Vector& x, double dt,
                              const NewtonOptions& opts) {
  return implicit_midpoint_step([&](const Vector& v) { return sys.rhs(v); },
                                [&](const Vector& v) { return sys.jacobian(v); }, x, dt, opts);
}

std::vector<Index> BilinearForm::active_rows() const {
  std::vector<Index> rows(static_cast<size_t>(dim()));
  for (Index i = 0; i < dim(); ++i) rows[static_cast<size_t>(i)] = i;
  return rows;
}

namespace {

// Pivot ratio of the LU factors; a cheap stand-in for rcond on every step.
void check_pivots(const Eigen::PartialPivLU<Matrix>& lu, const std::string& what) {
  const Vector u = lu.matrixLU().diagonal().cwiseAbs();
  const double ratio = u.size() > 0 ? u.minCoeff() / u.maxCoeff() : 1.0;
  if (!(ratio > 1e-14)) {
    throw SingularStepMatrix("Kahan step " + what + "matrix is singular (pivot ratio " + std::to_string(ratio) + ")");
  }
}

std::vector<std::pair<Index, Index>> runs_of(const std::vector<Index>& idx) {
  std::vector<std::pair<Index, Index>> runs;
  for (Index i : idx) {
    if (!runs.empty() && runs.back().first + runs.back().second == i) {
      ++runs.back().second;
    } else {
      runs.emplace_back(i, 1);
    }
  }
  return runs;
}

// dst = src(rows, cols) for index sets given as runs
void gather(const Matrix& src, const std::vector<std::pair<Index, Index>>& rows,
            const std::vector<std::pair<Index, Index>>& cols, Matrix& dst) {
  Index ro = 0;
  for (const auto& [r0, rn] : rows) {
    Index co = 0;
    for (const auto& [c0, cn] : cols) {
      dst.block(ro, co, rn, cn) = src.block(r0, c0, rn, cn);
      co += cn;
    }
    ro += rn;
  }
}

}  // namespace

KahanStepper::KahanStepper(const QuadraticSystem& sys, double dt) : sys_(sys), dt_(dt) {
  require(dt > 0.0, "time step must be positive");
  const Index m = sys.dim();
  base_ = Matrix::Identity(m, m) - 0.5 * dt * sys.A;
  half_a_ = (0.5 * dt * sys.A).sparseView(1.0, 0.0);
  step_matrix_.resize(m, m);
  rhs_.resize(m);
  if (!sys.B) return;
  active_ = sys.B->active_rows();
  std::vector<bool> is_active(static_cast<size_t>(m), false);
  for (Index i : active_) is_active[static_cast<size_t>(i)] = true;
  for (Index i = 0; i < m; ++i) {
    if (!is_active[static_cast<size_t>(i)]) fixed_.push_back(i);
  }
  if (fixed_.empty() || active_.empty()) {
    fixed_.clear();
    return;
  }
  lu_fixed_.compute(base_(fixed_, fixed_));
  if (!(lu_fixed_.rcond() > 1e-10)) {
    fixed_.clear();
    return;
  }
  fixed_runs_ = runs_of(fixed_);
  active_runs_ = runs_of(active_);
  m_af_.resize(static_cast<Index>(active_.size()), static_cast<Index>(fixed_.size()));
  schur_.resize(static_cast<Index>(active_.size()), static_cast<Index>(active_.size()));
  const Matrix couple = lu_fixed_.solve(base_(fixed_, active_));
  couple_ = couple.sparseView(1.0, 0.0);
  step_matrix_ = base_;
}

Vector KahanStepper::operator()(const Vector& x) {
  // only active rows change between steps; the Schur path never reads the others
  if (fixed_.empty()) {
    step_matrix_ = base_;
  } else {
    for (const auto& [r0, rn] : active_runs_) step_matrix_.middleRows(r0, rn) = base_.middleRows(r0, rn);
  }
  if (sys_.B) sys_.B->add_partial(x, -dt_, step_matrix_);
  rhs_ = x;
  rhs_.noalias() += half_a_ * x;
  if (sys_.c.size() > 0) rhs_ += dt_ * sys_.c;

  if (fixed_.empty()) {
    lu_.compute(step_matrix_);
    check_pivots(lu_, "");
    Vector out = lu_.solve(rhs_);
    if (!out.allFinite()) throw SingularStepMatrix("Kahan step produced non-finite state");
    return out;
  }

  // [M_ff M_fa; M_af M_aa] [x_f; x_a] = [b_f; b_a] with M_ff constant
  gather(step_matrix_, active_runs_, fixed_runs_, m_af_);
  gather(step_matrix_, active_runs_, active_runs_, schur_);
  schur_ -= m_af_ * couple_;
  const Vector y_f = lu_fixed_.solve(Vector(rhs_(fixed_)));
  const Vector b_a = Vector(rhs_(active_)) - m_af_ * y_f;
  lu_.compute(schur_);
  check_pivots(lu_, "Schur complement ");
  const Vector x_a = lu_.solve(b_a);
  Vector out(x.size());
  out(active_) = x_a;
  out(fixed_) = y_f - couple_ * x_a;
  if (!out.allFinite()) throw SingularStepMatrix("Kahan step produced non-finite state");
  return out;
}

Vector kahan_step(const QuadraticSystem& sys, const Vector& x, double dt) {
  KahanStepper s(sys, dt);
  return s(x);
}

Trajectory integrate(const Stepper& step, const Vector& x0, double dt, long n_steps, long stride) {
  require(dt > 0.0, "time step must be positive");
  require(n_steps >= 0, "step count must be nonnegative");
  require(stride >= 1, "stride must be >= 1");
  const long cols = n_steps / stride + 1;
  Trajectory traj;
  traj.states.resize(x0.size(), cols);
  traj.times.resize(cols);
  integrate_observe(step, x0, n_steps, [&](long k, const Vector& x) {
    if (k % stride != 0) return;
    const long c = k / stride;
    traj.states.col(c) = x;
    traj.times[c] = static_cast<double>(k) * dt;
  });
  return traj;
}

void integrate_observe(const Stepper& step, const Vector& x0, long n_steps,
                       const std::function<void(long, const Vector&)>& observe) {
  Vector x = x0;
  observe(0, x);
  for (long k = 1; k <= n_steps; ++k) {
    try {
      x = step(x);
    } catch (const Error& e) {
      throw StepFailure(std::string(e.what()) + " (step " + std::to_string(k) + ")", k);
    }
    if (!x.allFinite()) throw StepFailure("non-finite state at step " + std::to_string(k), k);
    observe(k, x);
  }
}

Derivative central_diff_8(const Matrix& series, double dt) {
  require(dt > 0.0, "time step must be positive");
  const Index k = series.cols();
  if (k < 9) throw SeriesTooShort("central_diff_8 needs at least 9 samples, got " + std::to_string(k));
  // weights for offsets -4..4
  static constexpr std::array<double, 9> w{1.0 / 280.0, -4.0 / 105.0, 1.0 / 5.0, -4.0 / 5.0, 0.0,
                                           4.0 / 5.0,   -1.0 / 5.0,   4.0 / 105.0, -1.0 / 280.0};
  Derivative d;
  d.first = 4;
  d.last = k - 5;
  d.values.setZero(series.rows(), k - 8);
  for (Index j = 0; j < k - 8; ++j) {
    // pair symmetric offsets so constant series give exact zeros
    auto col = d.values.col(j);
    for (int o = 4; o >= 1; --o) {
      col += w[static_cast<size_t>(4 + o)] * (series.col(j + 4 + o) - series.col(j + 4 - o));
    }
  }
  d.values /= dt;
  return d;
}

}  // namespace spll
