#include <doctest.h>

#include "spll/fom_stepper.hpp"
#include "support.hpp"

using namespace spll;
using namespace spll::test;

TEST_SUITE("pde_bench") {

TEST_CASE("periodic laplacian stencil wraps around") {
  const Matrix d = Matrix(build_laplacian(grid_1d(0.0, 4.0, 4, Boundary::Periodic)));
  CHECK(d.row(0) == (Eigen::RowVector4d() << -2, 1, 0, 1).finished());
  CHECK(d.row(3) == (Eigen::RowVector4d() << 1, 0, 1, -2).finished());
}

TEST_CASE("dirichlet 2x2 laplacian and its spectrum") {
  const Matrix d = Matrix(build_laplacian(grid_1d(0.0, 3.0, 2, Boundary::Dirichlet)));
  CHECK(d == (Eigen::Matrix2d() << -2, 1, 1, -2).finished());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d);
  CHECK(eig.eigenvalues()[0] == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(eig.eigenvalues()[1] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("laplacian is exactly symmetric on every benchmark grid") {
  for (Problem p : kAllProblems) {
    const SpatialGrid g = default_grid(p, 30);
    const SparseMatrix d = build_laplacian(g);
    const SparseMatrix dt = d.transpose();
    CHECK(Matrix(d - dt).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("periodic laplacian annihilates constants") {
  for (const SpatialGrid& g : {grid_1d(-20, 20, 200, Boundary::Periodic), grid_2d(-20, 20, 17, Boundary::Periodic)}) {
    const SparseMatrix d = build_laplacian(g);
    CHECK((d * Vector::Ones(g.dofs())).cwiseAbs().maxCoeff() <= 1e-12 * Matrix(d).cwiseAbs().maxCoeff());
  }
}

TEST_CASE("2D flattening is y outer, x inner") {
  const SpatialGrid g = grid_2d(0.0, 5.0, 5, Boundary::Periodic);
  const SparseMatrix d = build_laplacian(g);
  const Index n = 5;
  // node (ix=1, iy=2) couples to (0,2), (2,2), (1,1), (1,3)
  const Index c = 2 * n + 1;
  for (Index nb : {2 * n + 0, 2 * n + 2, 1 * n + 1, 3 * n + 1}) CHECK(d.coeff(c, nb) == doctest::Approx(1.0));
  CHECK(d.coeff(c, c) == doctest::Approx(-4.0));
}

TEST_CASE("sine-Gordon equilibrium has zero derivative and zero energy") {
  const ConservativeFOM m = small_fom(Problem::SineGordon1D, 16);
  FOMState s{0.0, {Vector::Zero(m.n()), Vector::Zero(m.n())}};
  const FOMState ds = fom_rhs(m, s);
  CHECK(ds.fields[0].norm() == 0.0);
  CHECK(ds.fields[1].norm() == 0.0);
  CHECK(fom_energy(m, s) == 0.0);
}

TEST_CASE("exponential wave at rest") {
  const ConservativeFOM m = make_fom(Problem::ExpWave1D, grid_1d(0.0, 4.0, 4, Boundary::Periodic));
  const FOMState ds = fom_rhs(m, FOMState{0.0, {Vector::Zero(4), Vector::Zero(4)}});
  CHECK((ds.fields[1] - Vector::Ones(4)).norm() == 0.0);
  CHECK(ds.fields[0].norm() == 0.0);

  const ConservativeFOM big = make_fom(Problem::ExpWave1D, default_grid(Problem::ExpWave1D));
  CHECK(big.n() == 200);
  CHECK(fom_energy(big, FOMState{0.0, {Vector::Zero(200), Vector::Zero(200)}}) == 200.0);
}

// Straight transcription of the six KGZ equations with an explicit stencil.
std::vector<Vector> kgz_oracle(const std::vector<Vector>& y, Index nx, double h) {
  auto lap = [&](const Vector& u) {
    Vector out(nx * nx);
    for (Index iy = 0; iy < nx; ++iy) {
      for (Index ix = 0; ix < nx; ++ix) {
        const Index xm = (ix + nx - 1) % nx, xp = (ix + 1) % nx, ym = (iy + nx - 1) % nx, yp = (iy + 1) % nx;
        out[iy * nx + ix] = (u[iy * nx + xm] + u[iy * nx + xp] + u[ym * nx + ix] + u[yp * nx + ix] -
                             4.0 * u[iy * nx + ix]) /
                            (h * h);
      }
    }
    return out;
  };
  const Vector &q1 = y[0], &q2 = y[1], &p1 = y[2], &p2 = y[3], &vphi = y[4], &phi = y[5];
  Vector dp1 = lap(q1), dp2 = lap(q2), dvphi(q1.size());
  for (Index i = 0; i < q1.size(); ++i) {
    const double s = q1[i] * q1[i] + q2[i] * q2[i];
    dp1[i] = dp1[i] - q1[i] - phi[i] * q1[i] - s * q1[i];
    dp2[i] = dp2[i] - q2[i] - phi[i] * q2[i] - s * q2[i];
    dvphi[i] = phi[i] + s;
  }
  return {p1, p2, dp1, dp2, dvphi, lap(vphi)};
}

TEST_CASE("KGZ right-hand side matches an independent transcription") {
  std::mt19937_64 rng(11);
  const ConservativeFOM m = make_fom(Problem::KGZ2D, grid_2d(-20, 20, 4, Boundary::Periodic));
  const FOMState s = random_state(m, rng, 0.3);
  const FOMState ds = fom_rhs(m, s);
  const auto ref = kgz_oracle(s.fields, 4, 10.0);
  for (size_t f = 0; f < 6; ++f) CHECK((ds.fields[f] - ref[f]).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("stacked and field-wise right-hand sides agree") {
  std::mt19937_64 rng(2);
  for (Problem p : kAllProblems) {
    const ConservativeFOM m = small_fom(p, 6);
    const FOMState s = random_state(m, rng);
    CHECK((fom_rhs(m, m.stack(s)) - m.stack(fom_rhs(m, s))).norm() == 0.0);
  }
}

TEST_CASE("initial conditions") {
  const double pi = M_PI;
  CHECK(initial_profile(Problem::ExpWave1D, pi / 2).first == doctest::Approx(pi * pi / 8).epsilon(1e-15));
  CHECK(initial_profile(Problem::SineGordon2D, 0.0, 0.0).first ==
        doctest::Approx(4.0 * std::atan(std::exp(3.0))).epsilon(1e-15));
  CHECK(initial_profile(Problem::SineGordon1D, 0.7).second == doctest::Approx(4.0 / std::cosh(0.7)).epsilon(1e-15));
  for (Problem p : {Problem::ExpWave1D, Problem::SineGordon2D}) {
    const FOMState ic = initial_condition(small_fom(p, 10));
    CHECK(ic.fields[1].norm() == 0.0);
  }
  const FOMState kgz = initial_condition(small_fom(Problem::KGZ2D, 8));
  CHECK(kgz.fields[2].norm() == 0.0);  // p1
  CHECK(kgz.fields[3].norm() == 0.0);  // p2
  CHECK(kgz.fields[1].norm() == 0.0);  // psi starts real
  CHECK((kgz.fields[0] - kgz.fields[5]).norm() == 0.0);
}

TEST_CASE("nonlinearity is the gradient of the potential") {
  std::mt19937_64 rng(5);
  for (Problem p : {Problem::ExpWave1D, Problem::SineGordon1D}) {
    const Vector q = random_vector(20, rng);
    double prev = 0.0;
    double slope_min = 10.0;
    for (double eps : {1e-1, 5e-2, 2.5e-2, 1.25e-2}) {
      double err = 0.0;
      for (Index i = 0; i < q.size(); ++i) {
        const double fd = (potential(p, q[i] + eps) - potential(p, q[i] - eps)) / (2 * eps);
        err = std::max(err, std::abs(fd - nonlinearity(p, q[i])));
      }
      if (prev > 0.0) slope_min = std::min(slope_min, std::log(prev / err) / std::log(2.0));
      prev = err;
    }
    CHECK(slope_min >= 1.9);
  }
}

TEST_CASE("layout mismatches are rejected") {
  const ConservativeFOM m = small_fom(Problem::SineGordon1D, 8);
  CHECK_THROWS_AS(fom_rhs(m, FOMState{0.0, {Vector::Zero(8)}}), DimensionMismatch);
  CHECK_THROWS_AS(fom_rhs(m, FOMState{0.0, {Vector::Zero(8), Vector::Zero(7)}}), DimensionMismatch);
  CHECK_THROWS_AS(grid_1d(0, 1, 2, Boundary::Periodic).validate(), InvalidArgument);
  CHECK_THROWS_AS(parse_problem("Burgers"), InvalidArgument);
}

// Midpoint conserves only quadratic invariants exactly; for these energies
// the drift is bounded and O(dt^2), which is what we check.
TEST_CASE("midpoint FOM energy drift is small, bounded and second order") {
  struct Case {
    Problem p;
    ConservativeFOM m;
    double dt;
    double tol;
  };
  const std::vector<Case> cases = {
      {Problem::ExpWave1D, make_fom(Problem::ExpWave1D, default_grid(Problem::ExpWave1D)), 0.005, 1e-6},
      {Problem::SineGordon1D, make_fom(Problem::SineGordon1D, default_grid(Problem::SineGordon1D)), 0.005, 1e-5},
      {Problem::SineGordon2D, make_fom(Problem::SineGordon2D, default_grid(Problem::SineGordon2D, 20)), 0.01, 1e-4},
      {Problem::KGZ2D, make_fom(Problem::KGZ2D, default_grid(Problem::KGZ2D, 24)), 0.01, 1e-3},
  };
  for (const auto& c : cases) {
    CAPTURE(to_string(c.p));
    auto max_drift = [&](double dt, long steps) {
      FomMidpoint step(c.m, dt);
      const Vector x0 = c.m.stack(initial_condition(c.m));
      const double e0 = fom_energy(c.m, c.m.unstack(x0));
      double worst = 0.0;
      integrate_observe([&](const Vector& x) { return step(x); }, x0, steps, [&](long, const Vector& x) {
        worst = std::max(worst, std::abs(fom_energy(c.m, c.m.unstack(x)) - e0) / std::abs(e0));
      });
      return worst;
    };
    const double coarse = max_drift(c.dt, 2000);
    const double fine = max_drift(c.dt / 2, 4000);
    CHECK(coarse <= c.tol);
    CHECK(coarse / fine >= 3.0);
  }
}

}  // TEST_SUITE
