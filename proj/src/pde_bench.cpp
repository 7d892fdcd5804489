#include "spll/pde_bench.hpp"

#include <cmath>
#include <numbers>

namespace spll {

std::string_view to_string(Problem p) {
  switch (p) {
    case Problem::ExpWave1D: return "ExpWave1D";
    case Problem::SineGordon1D: return "SineGordon1D";
    case Problem::SineGordon2D: return "SineGordon2D";
    case Problem::KGZ2D: return "KGZ2D";
  }
  return "?";
}

Problem parse_problem(std::string_view name) {
  for (auto p : {Problem::ExpWave1D, Problem::SineGordon1D, Problem::SineGordon2D, Problem::KGZ2D}) {
    if (to_string(p) == name) return p;
  }
  throw InvalidArgument("unknown problem tag '" + std::string(name) + "'");
}

double Axis::spacing() const {
  const double len = hi - lo;
  return bc == Boundary::Periodic ? len / static_cast<double>(points)
                                  : len / static_cast<double>(points + 1);
}

double Axis::node(Index i) const {
  const double h = spacing();
  return bc == Boundary::Periodic ? lo + static_cast<double>(i) * h
                                  : lo + static_cast<double>(i + 1) * h;
}

Index SpatialGrid::dofs() const {
  Index n = 1;
  for (const auto& a : axes) n *= a.points;
  return n;
}

void SpatialGrid::validate() const {
  require(dimension() == 1 || dimension() == 2, "grid must be 1D or 2D");
  for (const auto& a : axes) {
    require(a.hi > a.lo, "grid axis must have hi > lo");
    require(a.points >= 1, "grid axis needs at least one point");
    if (a.bc == Boundary::Periodic) {
      require(a.points >= 3, "periodic axis needs n >= 3 for a non-degenerate stencil");
    }
  }
}

SpatialGrid grid_1d(double lo, double hi, Index n, Boundary bc) {
  return SpatialGrid{{Axis{lo, hi, n, bc}}};
}

SpatialGrid grid_2d(double lo, double hi, Index n_per_axis, Boundary bc) {
  return SpatialGrid{{Axis{lo, hi, n_per_axis, bc}, Axis{lo, hi, n_per_axis, bc}}};
}

namespace {

using Triplet = Eigen::Triplet<double>;

// Appends the 1D stencil [1, -2, 1]/h^2 of `axis`, acting on index
// base + stride * i, for every line offset in `lines`.
void add_axis_stencil(const Axis& axis, Index stride, const std::vector<Index>& lines,
                      std::vector<Triplet>& out) {
  const Index n = axis.points;
  const double h = axis.spacing();
  const double off = 1.0 / (h * h);
  const double diag = -2.0 / (h * h);
  for (Index base : lines) {
    for (Index i = 0; i < n; ++i) {
      const Index row = base + stride * i;
      out.emplace_back(row, row, diag);
      // each undirected edge (i, i+1) is emitted once in both orientations
      Index j = i + 1;
      if (j == n) {
        if (axis.bc != Boundary::Periodic) continue;
        j = 0;
      }
      const Index col = base + stride * j;
      out.emplace_back(row, col, off);
      out.emplace_back(col, row, off);
    }
  }
}

}  // namespace

SparseMatrix build_laplacian(const SpatialGrid& grid) {
  grid.validate();
  const Index n = grid.dofs();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(5 * n));
  if (grid.dimension() == 1) {
    add_axis_stencil(grid.axes[0], 1, {0}, trips);
  } else {
    const Index nx = grid.axes[0].points;
    const Index ny = grid.axes[1].points;
    std::vector<Index> x_lines(static_cast<size_t>(ny));
    for (Index iy = 0; iy < ny; ++iy) x_lines[static_cast<size_t>(iy)] = iy * nx;
    std::vector<Index> y_lines(static_cast<size_t>(nx));
    for (Index ix = 0; ix < nx; ++ix) y_lines[static_cast<size_t>(ix)] = ix;
    add_axis_stencil(grid.axes[0], 1, x_lines, trips);
    add_axis_stencil(grid.axes[1], nx, y_lines, trips);
  }
  SparseMatrix d(n, n);
  d.setFromTriplets(trips.begin(), trips.end());
  d.makeCompressed();
  return d;
}

const std::vector<std::string>& ConservativeFOM::field_names() const {
  static const std::vector<std::string> wave{"q", "p"};
  static const std::vector<std::string> kgz{"q1", "q2", "p1", "p2", "varphi", "phi"};
  return problem == Problem::KGZ2D ? kgz : wave;
}

Vector ConservativeFOM::stack(const FOMState& s) const {
  check_layout(s);
  const Index nn = n();
  Vector x(state_size());
  for (size_t f = 0; f < s.fields.size(); ++f) x.segment(static_cast<Index>(f) * nn, nn) = s.fields[f];
  return x;
}

FOMState ConservativeFOM::unstack(const Eigen::Ref<const Vector>& x, double time) const {
  require_dims(x.size() == state_size(), "stacked state has wrong length");
  FOMState s;
  s.time = time;
  const Index nn = n();
  for (Index f = 0; f < num_fields(); ++f) s.fields.emplace_back(x.segment(f * nn, nn));
  return s;
}

void ConservativeFOM::check_layout(const FOMState& s) const {
  require_dims(static_cast<Index>(s.fields.size()) == num_fields(),
               "state has " + std::to_string(s.fields.size()) + " fields, model expects " +
                   std::to_string(num_fields()));
  for (const auto& f : s.fields) require_dims(f.size() == n(), "field length does not match grid");
}

ConservativeFOM make_fom(Problem problem, const SpatialGrid& grid) {
  ConservativeFOM m;
  m.problem = problem;
  m.grid = grid;
  m.laplacian = build_laplacian(grid);
  return m;
}

SpatialGrid default_grid(Problem problem, Index points_per_axis) {
  switch (problem) {
    case Problem::ExpWave1D:
      return grid_1d(0.0, std::numbers::pi, points_per_axis > 0 ? points_per_axis : 200,
                     Boundary::Dirichlet);
    case Problem::SineGordon1D:
      return grid_1d(-20.0, 20.0, points_per_axis > 0 ? points_per_axis : 200, Boundary::Periodic);
    case Problem::SineGordon2D:
      return grid_2d(-7.0, 7.0, points_per_axis > 0 ? points_per_axis : 100, Boundary::Periodic);
    case Problem::KGZ2D:
      return grid_2d(-20.0, 20.0, points_per_axis > 0 ? points_per_axis : 400, Boundary::Periodic);
  }
  throw InvalidArgument("unknown problem");
}

double potential(Problem p, double q) {
  switch (p) {
    case Problem::ExpWave1D: return std::exp(-q);
    case Problem::SineGordon1D:
    case Problem::SineGordon2D: return 1.0 - std::cos(q);
    case Problem::KGZ2D: break;
  }
  throw NotCanonical("KGZ2D has no scalar potential");
}

double nonlinearity(Problem p, double q) {
  switch (p) {
    case Problem::ExpWave1D: return -std::exp(-q);
    case Problem::SineGordon1D:
    case Problem::SineGordon2D: return std::sin(q);
    case Problem::KGZ2D: break;
  }
  throw NotCanonical("KGZ2D has no scalar nonlinearity");
}

double nonlinearity_derivative(Problem p, double q) {
  switch (p) {
    case Problem::ExpWave1D: return std::exp(-q);
    case Problem::SineGordon1D:
    case Problem::SineGordon2D: return std::cos(q);
    case Problem::KGZ2D: break;
  }
  throw NotCanonical("KGZ2D has no scalar nonlinearity");
}

Vector nonlinearity(Problem p, const Vector& q) {
  switch (p) {
    case Problem::ExpWave1D: return -(-q.array()).exp().matrix();
    case Problem::SineGordon1D:
    case Problem::SineGordon2D: return q.array().sin().matrix();
    case Problem::KGZ2D: break;
  }
  throw NotCanonical("KGZ2D has no scalar nonlinearity");
}

FOMState fom_rhs(const ConservativeFOM& model, const FOMState& state) {
  model.check_layout(state);
  const auto& d = model.laplacian;
  FOMState out;
  out.time = state.time;
  if (is_canonical(model.problem)) {
    const Vector& q = state.fields[0];
    const Vector& p = state.fields[1];
    out.fields = {p, d * q - nonlinearity(model.problem, q)};
    return out;
  }
  const Vector& q1 = state.fields[0];
  const Vector& q2 = state.fields[1];
  const Vector& p1 = state.fields[2];
  const Vector& p2 = state.fields[3];
  const Vector& varphi = state.fields[4];
  const Vector& phi = state.fields[5];
  const Vector s = (q1.array().square() + q2.array().square()).matrix();
  Vector dp1 = d * q1;
  dp1.array() -= q1.array() + phi.array() * q1.array() + s.array() * q1.array();
  Vector dp2 = d * q2;
  dp2.array() -= q2.array() + phi.array() * q2.array() + s.array() * q2.array();
  out.fields = {p1, p2, dp1, dp2, phi + s, d * varphi};
  return out;
}

Vector fom_rhs(const ConservativeFOM& model, const Vector& x) {
  return model.stack(fom_rhs(model, model.unstack(x)));
}

double fom_energy(const ConservativeFOM& model, const FOMState& state) {
  model.check_layout(state);
  const auto& d = model.laplacian;
  if (is_canonical(model.problem)) {
    const Vector& q = state.fields[0];
    const Vector& p = state.fields[1];
    double g = 0.0;
    for (Index i = 0; i < q.size(); ++i) g += potential(model.problem, q[i]);
    return 0.5 * p.squaredNorm() - 0.5 * q.dot(d * q) + g;
  }
  const Vector& q1 = state.fields[0];
  const Vector& q2 = state.fields[1];
  const Vector& p1 = state.fields[2];
  const Vector& p2 = state.fields[3];
  const Vector& varphi = state.fields[4];
  const Vector& phi = state.fields[5];
  const Vector s = (q1.array().square() + q2.array().square()).matrix();
  // psi blocks carry weight 1 (not 1/2): this is the form the six equations conserve
  const double psi_part = q1.squaredNorm() - q1.dot(d * q1) + q2.squaredNorm() - q2.dot(d * q2) +
                          p1.squaredNorm() + p2.squaredNorm();
  const double phi_part = -0.5 * varphi.dot(d * varphi) + 0.5 * phi.squaredNorm();
  return psi_part + phi_part + phi.dot(s) + 0.5 * s.squaredNorm();
}

std::pair<double, double> initial_profile(Problem problem, double x, double y) {
  switch (problem) {
    case Problem::ExpWave1D: return {0.5 * x * (std::numbers::pi - x), 0.0};
    case Problem::SineGordon1D: return {0.0, 4.0 / std::cosh(x)};
    case Problem::SineGordon2D:
      return {4.0 * std::atan(std::exp(3.0 - std::sqrt(x * x + y * y))), 0.0};
    case Problem::KGZ2D: {
      auto sech = [](double a) { return 1.0 / std::cosh(a); };
      const double v = sech(-(x - 2.0) * (x - 2.0) - y * y) + sech(-x * x - (y - 2.0) * (y - 2.0));
      return {v, v};
    }
  }
  throw InvalidArgument("unknown problem");
}

FOMState initial_condition(const ConservativeFOM& model) {
  const Index n = model.n();
  const auto& g = model.grid;
  Vector first(n);
  Vector second(n);
  if (g.dimension() == 1) {
    for (Index i = 0; i < n; ++i) {
      std::tie(first[i], second[i]) = initial_profile(model.problem, g.axes[0].node(i));
    }
  } else {
    const Index nx = g.axes[0].points;
    const Index ny = g.axes[1].points;
    for (Index iy = 0; iy < ny; ++iy) {
      for (Index ix = 0; ix < nx; ++ix) {
        const Index k = iy * nx + ix;
        std::tie(first[k], second[k]) =
            initial_profile(model.problem, g.axes[0].node(ix), g.axes[1].node(iy));
      }
    }
  }
  FOMState s;
  if (is_canonical(model.problem)) {
    s.fields = {first, second};
    return s;
  }
  // KGZ: psi = q1 + i q2 is real at t=0, all rates zero, varphi(0) = 0
  const Vector zero = Vector::Zero(n);
  s.fields = {first, zero, zero, zero, zero, second};
  return s;
}

}  // namespace spll
