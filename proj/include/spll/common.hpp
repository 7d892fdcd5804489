#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace spll {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Root of every error raised by the library. Each subclass corresponds to
/// one failure mode callers are expected to tell apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Newton iteration did not bring the residual under tolerance.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Kahan step matrix could not be factorized (dt too large for the state).
class SingularStepMatrix : public Error {
 public:
  using Error::Error;
};

class SeriesTooShort : public Error {
 public:
  using Error::Error;
};

/// Rank-deficient least-squares data: some eigenvalue pair of the Gram
/// matrix sums to (numerically) zero and no regularization was supplied.
class DegenerateGram : public Error {
 public:
  using Error::Error;
};

/// HOpInf requires a canonical Hamiltonian FOM.
class NotCanonical : public Error {
 public:
  using Error::Error;
};

/// Failure while integrating a trajectory; carries the failing step.
class StepFailure : public Error {
 public:
  StepFailure(const std::string& what, long step) : Error(what), step_(step) {}
  [[nodiscard]] long step() const { return step_; }

 private:
  long step_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
  if (!cond) throw DimensionMismatch(msg);
}

}  // namespace spll
