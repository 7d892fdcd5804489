#include "spll/reduction.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>

namespace spll {

const Matrix& SnapshotSet::field(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return fields[i];
  }
  throw InvalidArgument("snapshot set has no field '" + name + "'");
}

double SnapshotSet::dt() const {
  require(times.size() >= 2, "need at least two samples to define a spacing");
  return times[1] - times[0];
}

void SnapshotSet::validate() const {
  require_dims(names.size() == fields.size(), "one name per snapshot field");
  require(!fields.empty(), "snapshot set is empty");
  const Index k = times.size();
  for (const auto& f : fields) {
    require_dims(f.cols() == k, "every snapshot field needs one column per sample time");
    require_dims(f.rows() == fields[0].rows(), "snapshot fields must share the row count");
  }
  if (k >= 2) {
    const double h = times[1] - times[0];
    require(h > 0.0, "sample times must be strictly increasing");
    for (Index i = 1; i < k; ++i) {
      const double step = times[i] - times[i - 1];
      require(std::abs(step - h) <= 1e-9 * std::max(1.0, std::abs(times[i])),
              "sample times must be uniformly spaced");
    }
  }
}

std::vector<std::string> lifted_field_names(const LiftingSpec& spec) {
  std::vector<std::string> names = spec.problem == Problem::KGZ2D
                                       ? std::vector<std::string>{"q1", "q2", "p1", "p2", "varphi", "phi"}
                                       : std::vector<std::string>{"q", "p"};
  names.insert(names.end(), spec.aux_names.begin(), spec.aux_names.end());
  return names;
}

ReducedBasis ReducedBasis::truncated(Index r_new) const {
  require(r_new >= 1 && r_new <= r(), "truncation rank out of range");
  ReducedBasis out;
  out.problem = problem;
  out.block_map = block_map;
  out.phi = phi.leftCols(r_new);
  for (const auto& v : aux) out.aux.emplace_back(v.leftCols(r_new));
  return out;
}

Matrix leading_left_singular_vectors(const Matrix& data, Index r, Vector* singular_values) {
  require(r >= 1, "basis rank must be >= 1");
  require(r <= std::min(data.rows(), data.cols()),
          "rank " + std::to_string(r) + " exceeds min(n, columns) of the snapshot matrix");
  require(data.squaredNorm() > 0.0, "snapshot matrix is identically zero");
  Eigen::BDCSVD<Matrix> svd(data, Eigen::ComputeThinU);
  Matrix u = svd.matrixU().leftCols(r);
  for (Index c = 0; c < r; ++c) {
    Index imax = 0;
    u.col(c).cwiseAbs().maxCoeff(&imax);
    if (u(imax, c) < 0.0) u.col(c) = -u.col(c);
  }
  if (singular_values != nullptr) *singular_values = svd.singularValues();
  return u;
}

Matrix cotangent_lift_psd(const Matrix& q, const Matrix& p, Index r) {
  return cotangent_lift_psd(std::vector<const Matrix*>{&q, &p}, r);
}

Matrix cotangent_lift_psd(const std::vector<const Matrix*>& blocks, Index r) {
  require(!blocks.empty(), "cotangent lift needs snapshot blocks");
  const Index n = blocks[0]->rows();
  Index cols = 0;
  for (const auto* b : blocks) {
    require_dims(b->rows() == n, "cotangent lift blocks must share the row count");
    cols += b->cols();
  }
  Matrix concat(n, cols);
  Index offset = 0;
  for (const auto* b : blocks) {
    concat.middleCols(offset, b->cols()) = *b;
    offset += b->cols();
  }
  return leading_left_singular_vectors(concat, r);
}

Matrix pod_basis(const Matrix& w, Index r) { return leading_left_singular_vectors(w, r); }

ReducedBasis assemble_basis(Problem problem, Matrix phi, std::vector<Matrix> aux) {
  ReducedBasis b;
  b.problem = problem;
  const Index n = phi.rows();
  const Index r = phi.cols();
  for (const auto& v : aux) {
    require_dims(v.rows() == n, "basis blocks must share the row count n");
    require_dims(v.cols() == r, "all basis blocks use the same reduced dimension r");
  }
  if (problem == Problem::KGZ2D) {
    require_dims(aux.size() == 1, "KGZ basis is blkdiag(Phi x4, V x3)");
    b.block_map = {0, 0, 0, 0, 1, 1, 1};
  } else {
    require_dims(!aux.empty(), "wave basis needs at least one auxiliary block");
    b.block_map = {0, 0};
    for (size_t i = 0; i < aux.size(); ++i) b.block_map.push_back(static_cast<int>(i + 1));
  }
  b.phi = std::move(phi);
  b.aux = std::move(aux);
  return b;
}

ReducedBasis build_basis(const LiftingSpec& spec, const SnapshotSet& lifted, Index r) {
  lifted.validate();
  if (spec.problem == Problem::KGZ2D) {
    Matrix phi = cotangent_lift_psd({&lifted.field("q1"), &lifted.field("q2"), &lifted.field("p1"),
                                     &lifted.field("p2")},
                                    r);
    const Index n = lifted.fields[0].rows();
    const Index k = lifted.num_samples();
    Matrix scalars(n, 3 * k);
    scalars << lifted.field("varphi"), lifted.field("phi"), lifted.field("w");
    return assemble_basis(spec.problem, std::move(phi), {pod_basis(scalars, r)});
  }
  Matrix phi = cotangent_lift_psd(lifted.field("q"), lifted.field("p"), r);
  std::vector<Matrix> aux;
  for (const auto& name : spec.aux_names) aux.push_back(pod_basis(lifted.field(name), r));
  return assemble_basis(spec.problem, std::move(phi), std::move(aux));
}

const Matrix& ReducedData::state(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return states[i];
  }
  throw InvalidArgument("reduced data has no field '" + name + "'");
}

const Matrix& ReducedData::derivative(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return derivatives[i];
  }
  throw InvalidArgument("reduced data has no field '" + name + "'");
}

ReducedData project_snapshots(const ReducedBasis& basis, const SnapshotSet& lifted) {
  lifted.validate();
  require_dims(static_cast<Index>(lifted.fields.size()) == basis.num_fields(),
               "snapshot fields do not match the basis block map");
  const Index k = lifted.num_samples();
  if (k < 9) throw SeriesTooShort("projection needs at least 9 samples for the derivative stencil");
  const double dt = lifted.dt();
  ReducedData out;
  out.names = lifted.names;
  for (size_t f = 0; f < lifted.fields.size(); ++f) {
    const Matrix& block = basis.block_for_field(f);
    require_dims(block.rows() == lifted.fields[f].rows(), "basis block and snapshots disagree on n");
    const Matrix full = block.transpose() * lifted.fields[f];
    Derivative d = central_diff_8(full, dt);
    out.first = d.first;
    out.last = d.last;
    out.states.emplace_back(full.middleCols(d.first, d.last - d.first + 1));
    out.derivatives.push_back(std::move(d.values));
  }
  out.times = lifted.times.segment(out.first, out.last - out.first + 1);
  return out;
}

Vector projection_error(const Matrix& v, const Matrix& w) {
  require_dims(v.rows() == w.rows(), "basis and data must share the row count");
  const Matrix resid = w - v * (v.transpose() * w);
  Vector err(w.cols());
  for (Index c = 0; c < w.cols(); ++c) {
    const double nw = w.col(c).norm();
    err[c] = nw > 0.0 ? resid.col(c).norm() / nw : std::numeric_limits<double>::quiet_NaN();
  }
  return err;
}

}  // namespace spll
