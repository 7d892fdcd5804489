#include "spll/opinf.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

namespace spll {

SymmetricSolve symmetric_lstsq(const Matrix& x, const Matrix& b, double lambda, RankPolicy policy,
                               const std::string& equation) {
  require_dims(x.rows() == b.rows() && x.cols() == b.cols(), "X and B must have the same shape");
  require(lambda >= 0.0, "regularization must be nonnegative");
  const Index r = x.rows();
  const Matrix gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector g = (eig.eigenvalues().array() + lambda).matrix();
  const Matrix& u = eig.eigenvectors();

  const Matrix c = b * x.transpose() + x * b.transpose();
  const Matrix c_t = u.transpose() * c * u;
  const double g_max = g.cwiseAbs().maxCoeff();
  const double floor = 1e-12 * g_max;
  Matrix d_t(r, r);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < r; ++j) {
      const double denom = g[i] + g[j];
      if (!(denom > floor) || denom <= 0.0) {
        if (policy == RankPolicy::Reject) {
          throw DegenerateGram("degenerate Gram matrix" +
                               (equation.empty() ? std::string() : " in equation '" + equation + "'") +
                               ": eigenvalue pair sum " + std::to_string(denom) +
                               " (max " + std::to_string(g_max) + "); regularize or reduce r");
        }
        d_t(i, j) = 0.0;
        continue;
      }
      d_t(i, j) = c_t(i, j) / denom;
    }
  }
  Matrix d = u * d_t * u.transpose();
  // symmetric as stored; the asymmetric part is round-off only
  d = (0.5 * (d + d.transpose())).eval();

  SymmetricSolve out;
  out.D = std::move(d);
  const Matrix resid = out.D * x - b;
  const Matrix grad = resid * x.transpose();
  out.report.equation = equation;
  out.report.residual = resid.norm();
  out.report.gram_min = eig.eigenvalues().minCoeff();
  out.report.gram_max = eig.eigenvalues().maxCoeff();
  out.report.stationarity = (0.5 * (grad + grad.transpose()) + lambda * out.D).norm();
  out.report.rhs_scale = (b * x.transpose()).norm();
  out.report.lambda = lambda;
  return out;
}

Matrix apply_columns(const QuadraticTensor& h, const Matrix& a, const Matrix& b) {
  require_dims(a.cols() == b.cols(), "tensor operands need the same column count");
  Matrix out(h.out_dim(), a.cols());
  for (Index k = 0; k < a.cols(); ++k) out.col(k) = h.apply(a.col(k), b.col(k));
  return out;
}

namespace {

const QuadraticTensor& tensor(const std::map<std::string, QuadraticTensor>& tensors, const std::string& key) {
  auto it = tensors.find(key);
  if (it == tensors.end()) throw InvalidArgument("missing reduced tensor '" + key + "'");
  return it->second;
}

void record(LearnedOperators& out, const std::string& name, SymmetricSolve&& s) {
  out.reports.push_back(s.report);
  out.operators[name] = std::move(s.D);
}

}  // namespace

LearnedOperators infer_sp_liftlearn(const LiftingSpec& spec, const ReducedData& data,
                                    const std::map<std::string, QuadraticTensor>& tensors, double lambda) {
  LearnedOperators out;
  if (spec.problem == Problem::KGZ2D) {
    const auto& hp = tensor(tensors, "p");
    const Matrix& phi = data.state("phi");
    const Matrix& w = data.state("w");
    for (const auto& [q_name, p_name, op] :
         {std::tuple<std::string, std::string, std::string>{"q1", "p1", "D_q1"}, {"q2", "p2", "D_q2"}}) {
      const Matrix& q = data.state(q_name);
      // the -q term is structural (Phi^T Phi = I), moved to the data side
      Matrix rhs = data.derivative(p_name) + q - apply_columns(hp, phi, q) - apply_columns(hp, w, q);
      // psi = q1 + i q2 with real initial data keeps q2 identically zero; any
      // symmetric operator fits, take the minimum-norm one
      const RankPolicy policy = q.squaredNorm() == 0.0 ? RankPolicy::MinimumNorm : RankPolicy::Reject;
      record(out, op, symmetric_lstsq(q, rhs, lambda, policy, p_name));
    }
    record(out, "D_varphi",
           symmetric_lstsq(data.state("varphi"), data.derivative("phi"), lambda, RankPolicy::Reject, "phi"));
    return out;
  }
  spec.validate();
  const auto& hp = tensor(tensors, "p");
  const Matrix& wa = data.state(spec.aux_names[static_cast<size_t>(spec.coupling_a)]);
  const Matrix& wb = data.state(spec.aux_names[static_cast<size_t>(spec.coupling_b)]);
  const Matrix rhs = data.derivative("p") - apply_columns(hp, wa, wb);
  record(out, "D", symmetric_lstsq(data.state("q"), rhs, lambda, RankPolicy::Reject, "p"));
  return out;
}

Matrix hopinf_nonlinear_term(Problem problem, const Matrix& phi, const Matrix& q_hat) {
  if (!is_canonical(problem)) throw NotCanonical("HOpInf needs a canonical Hamiltonian problem");
  Matrix full = phi * q_hat;
  for (Index c = 0; c < full.cols(); ++c) {
    for (Index m = 0; m < full.rows(); ++m) full(m, c) = -nonlinearity(problem, full(m, c));
  }
  return phi.transpose() * full;
}

LearnedOperators infer_hopinf(Problem problem, const ReducedData& data, const NonlinearEvaluator& f_hat,
                              double lambda) {
  if (!is_canonical(problem)) {
    throw NotCanonical("HOpInf is not applicable to " + std::string(to_string(problem)) +
                       " (no canonical Hamiltonian form)");
  }
  LearnedOperators out;
  const Matrix& q = data.state("q");
  const Matrix& p = data.state("p");
  record(out, "D_q", symmetric_lstsq(p, data.derivative("q"), lambda, RankPolicy::Reject, "q"));
  const Matrix rhs = data.derivative("p") - f_hat(q);
  record(out, "D_p", symmetric_lstsq(q, rhs, lambda, RankPolicy::Reject, "p"));
  return out;
}

Matrix quadratic_features(const Matrix& y) {
  const Index m = y.rows();
  Matrix s(m * (m + 1) / 2, y.cols());
  Index row = 0;
  for (Index i = 0; i < m; ++i) {
    for (Index j = i; j < m; ++j) s.row(row++) = y.row(i).cwiseProduct(y.row(j));
  }
  return s;
}

Vector quadratic_features(const Vector& y) {
  const Matrix s = quadratic_features(Matrix(y));
  return s.col(0);
}

StandardOperators infer_standard_liftlearn(const Matrix& y, const Matrix& y_dot, double lambda,
                                           RankPolicy policy) {
  require_dims(y.rows() == y_dot.rows() && y.cols() == y_dot.cols(), "Y and Y' must have the same shape");
  require(lambda >= 0.0, "regularization must be nonnegative");
  const Index m = y.rows();
  const Index k = y.cols();
  const Index nq = m * (m + 1) / 2;
  const Index p = m + nq;

  Matrix design(k + (lambda > 0.0 ? p : 0), p);
  design.topLeftCorner(k, m) = y.transpose();
  design.topRightCorner(k, nq) = quadratic_features(y).transpose();
  Matrix target = Matrix::Zero(design.rows(), m);
  target.topRows(k) = y_dot.transpose();
  if (lambda > 0.0) {
    design.bottomRows(p).setZero();
    design.bottomRows(p).diagonal().setConstant(std::sqrt(lambda));
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  Matrix ot;
  if (qr.rank() < p) {
    if (policy == RankPolicy::Reject) {
      throw DegenerateGram("standard Lift & Learn data matrix has rank " + std::to_string(qr.rank()) +
                           " < " + std::to_string(p) + " unknowns; regularize or reduce r");
    }
    ot = Eigen::CompleteOrthogonalDecomposition<Matrix>(design).solve(target);
  } else {
    ot = qr.solve(target);
  }

  StandardOperators out;
  out.A = ot.topRows(m).transpose();
  out.B = ot.bottomRows(nq).transpose();
  const Matrix z = design.topRows(k).transpose();
  const Matrix resid = ot.transpose() * z - y_dot;
  const Vector rdiag = qr.matrixR().diagonal().cwiseAbs();
  out.report.equation = "lifted";
  out.report.residual = resid.norm();
  out.report.gram_min = rdiag.minCoeff() * rdiag.minCoeff();
  out.report.gram_max = rdiag.maxCoeff() * rdiag.maxCoeff();
  out.report.stationarity = (z * resid.transpose() + lambda * ot).norm();
  out.report.rhs_scale = (z * target.topRows(k)).norm();
  out.report.lambda = lambda;
  return out;
}

}  // namespace spll
