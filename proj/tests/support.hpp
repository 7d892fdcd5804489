#pragma once

#include <Eigen/QR>
#include <cmath>
#include <random>

#include "spll/lifting.hpp"
#include "spll/reduction.hpp"

namespace spll::test {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

inline Matrix random_orthonormal(Index n, Index r, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, r, rng));
  return qr.householderQ() * Matrix::Identity(n, r);
}

inline Matrix random_symmetric(Index r, std::mt19937_64& rng) {
  const Matrix a = random_matrix(r, r, rng);
  return 0.5 * (a + a.transpose());
}

// Small grids of the right kind for each benchmark.
inline ConservativeFOM small_fom(Problem p, Index points = 12) {
  switch (p) {
    case Problem::ExpWave1D: return make_fom(p, grid_1d(0.0, M_PI, points, Boundary::Dirichlet));
    case Problem::SineGordon1D: return make_fom(p, grid_1d(-20.0, 20.0, points, Boundary::Periodic));
    case Problem::SineGordon2D: return make_fom(p, grid_2d(-7.0, 7.0, points, Boundary::Dirichlet));
    case Problem::KGZ2D: return make_fom(p, grid_2d(-20.0, 20.0, points, Boundary::Periodic));
  }
  return {};
}

inline FOMState random_state(const ConservativeFOM& m, std::mt19937_64& rng, double scale = 0.5) {
  FOMState s;
  for (Index f = 0; f < m.num_fields(); ++f) s.fields.push_back(random_vector(m.n(), rng, scale));
  return s;
}

// Identity-basis (r = n) ReducedBasis for a problem.
inline ReducedBasis identity_basis(const LiftingSpec& spec, Index n) {
  const size_t n_aux = spec.problem == Problem::KGZ2D ? 1 : static_cast<size_t>(spec.num_aux);
  return assemble_basis(spec.problem, Matrix::Identity(n, n), std::vector<Matrix>(n_aux, Matrix::Identity(n, n)));
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline constexpr Problem kAllProblems[] = {Problem::ExpWave1D, Problem::SineGordon1D, Problem::SineGordon2D,
                                           Problem::KGZ2D};

}  // namespace spll::test
