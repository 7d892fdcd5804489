#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spll/lifting.hpp"
#include "spll/reduction.hpp"

namespace spll {

struct InferenceReport {
  std::string equation;
  double residual = 0.0;      // ||D X - B||_F
  double gram_min = 0.0;      // extreme eigenvalues of X X^T (without lambda)
  double gram_max = 0.0;
  double stationarity = 0.0;  // ||sym((D X - B) X^T) + lambda D||_F
  double rhs_scale = 0.0;     // ||B X^T||_F, for relative stationarity
  double lambda = 0.0;
};

/// What to do with eigenvalue pairs of the Gram matrix that sum to ~0.
enum class RankPolicy {
  Reject,      // throw DegenerateGram
  MinimumNorm  // zero those coefficients (minimum-norm symmetric minimizer)
};

struct SymmetricSolve {
  Matrix D;  // exactly symmetric as stored
  InferenceReport report;
};

/// argmin over D = D^T of ||D X - B||_F^2 + lambda ||D||_F^2.
///
/// Stationarity reads D G + G D = B X^T + X B^T with G = X X^T + lambda I.
/// With G = U diag(g) U^T the equation decouples in the eigenbasis:
/// (U^T D U)_ij = (U^T C U)_ij / (g_i + g_j).
SymmetricSolve symmetric_lstsq(const Matrix& x, const Matrix& b, double lambda = 0.0,
                               RankPolicy policy = RankPolicy::Reject, const std::string& equation = "");

struct LearnedOperators {
  std::map<std::string, Matrix> operators;
  std::vector<InferenceReport> reports;
};

/// Columnwise tensor contribution [H(a_k, b_k)]_k.
Matrix apply_columns(const QuadraticTensor& h, const Matrix& a, const Matrix& b);

/// Structure-preserving Lift & Learn: learns the symmetric linear blocks with
/// the analytic quadratic terms moved to the data side.
/// Wave problems produce "D"; KGZ produces "D_q1", "D_q2" and "D_varphi".
LearnedOperators infer_sp_liftlearn(const LiftingSpec& spec, const ReducedData& data,
                                    const std::map<std::string, QuadraticTensor>& tensors,
                                    double lambda = 0.0);

/// Reduced nonlinear term evaluated at full dimension: -Phi^T f_non(Phi Q).
Matrix hopinf_nonlinear_term(Problem problem, const Matrix& phi, const Matrix& q_hat);

using NonlinearEvaluator = std::function<Matrix(const Matrix&)>;

/// HOpInf: D_q from q' = D_q p, D_p from p' = D_p q + F(q); both symmetric.
LearnedOperators infer_hopinf(Problem problem, const ReducedData& data, const NonlinearEvaluator& f_hat,
                              double lambda = 0.0);

struct StandardOperators {
  Matrix A;  // rbar x rbar
  Matrix B;  // rbar x rbar(rbar+1)/2, columns for y_i y_j with i <= j
  InferenceReport report;
};

/// Non-redundant quadratic features [y_i y_j]_{i<=j}, i outer.
Matrix quadratic_features(const Matrix& y);
Vector quadratic_features(const Vector& y);

/// Unconstrained joint fit of y' = A y + B s(y) with Tikhonov lambda.
/// Solved as the stacked least-squares problem [Z^T; sqrt(lambda) I] O^T,
/// whose normal equations are the regularized ones, by Householder QR.
/// Rank-deficient data either throws (Reject) or takes the minimum-norm
/// least-squares solution (complete orthogonal decomposition).
StandardOperators infer_standard_liftlearn(const Matrix& y, const Matrix& y_dot, double lambda = 0.0,
                                           RankPolicy policy = RankPolicy::Reject);

}  // namespace spll
