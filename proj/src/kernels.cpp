// OpenMP kernels and their serial references. Each pair shares the same
// per-item routine so the parallel result is bit-identical to the serial one.

#include <omp.h>

#include "spll/lifting.hpp"
#include "spll/reduction.hpp"

namespace spll {

namespace {


struct TensorInputs {
  RowMajorMatrix out;
  RowMajorMatrix left;
  RowMajorMatrix right;
};

TensorInputs prepare(const Matrix& out_basis, const Matrix& left_basis, const Matrix& right_basis) {
  require_dims(out_basis.rows() == left_basis.rows() && out_basis.rows() == right_basis.rows(),
               "reduced tensor bases must share the row count n");
  return {out_basis, left_basis, right_basis};
}

// One output slice H[i, :, :]; m runs in ascending order for every coefficient.
void tensor_slice(const TensorInputs& in, Index i, double scale, double* slice) {
  const Index n = in.out.rows();
  const Index ra = in.left.cols();
  const Index rb = in.right.cols();
  std::fill(slice, slice + ra * rb, 0.0);
  for (Index m = 0; m < n; ++m) {
    const double o = in.out(m, i);
    if (o == 0.0) continue;
    const double* lrow = in.left.data() + m * ra;
    const double* rrow = in.right.data() + m * rb;
    for (Index j = 0; j < ra; ++j) {
      const double a = o * lrow[j];
      double* dst = slice + j * rb;
      for (Index l = 0; l < rb; ++l) dst[l] += a * rrow[l];
    }
  }
  if (scale != 1.0) {
    for (Index k = 0; k < ra * rb; ++k) slice[k] *= scale;
  }
}

void lift_column(const LiftingSpec& spec, const SnapshotSet& snaps, SnapshotSet& out, Index col) {
  if (spec.problem == Problem::KGZ2D) {
    const auto& q1 = snaps.fields[0];
    const auto& q2 = snaps.fields[1];
    auto& w = out.fields[6];
    for (Index m = 0; m < q1.rows(); ++m) w(m, col) = q1(m, col) * q1(m, col) + q2(m, col) * q2(m, col);
    return;
  }
  const auto& q = snaps.fields[0];
  for (int i = 0; i < spec.num_aux; ++i) {
    auto& w = out.fields[static_cast<size_t>(2 + i)];
    for (Index m = 0; m < q.rows(); ++m) w(m, col) = spec.tau(i, q(m, col));
  }
}

SnapshotSet lifted_shell(const LiftingSpec& spec, const SnapshotSet& snaps) {
  snaps.validate();
  const Index expected = spec.problem == Problem::KGZ2D ? 6 : 2;
  require_dims(static_cast<Index>(snaps.fields.size()) == expected,
               "FOM snapshot set has the wrong number of fields for this lifting");
  SnapshotSet out = snaps;
  out.names = lifted_field_names(spec);
  const Index n = snaps.fields[0].rows();
  const Index k = snaps.num_samples();
  for (int i = 0; i < spec.num_aux; ++i) out.fields.emplace_back(n, k);
  return out;
}

}  // namespace

QuadraticTensor build_reduced_tensor(const Matrix& out_basis, const Matrix& left_basis,
                                     const Matrix& right_basis, double scale) {
  const TensorInputs in = prepare(out_basis, left_basis, right_basis);
  QuadraticTensor t(out_basis.cols(), left_basis.cols(), right_basis.cols());
  const Index stride = t.left_dim() * t.right_dim();
  double* base = t.data().data();
  const Index r_out = t.out_dim();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < r_out; ++i) tensor_slice(in, i, scale, base + i * stride);
  return t;
}

QuadraticTensor build_reduced_tensor_serial(const Matrix& out_basis, const Matrix& left_basis,
                                            const Matrix& right_basis, double scale) {
  const TensorInputs in = prepare(out_basis, left_basis, right_basis);
  QuadraticTensor t(out_basis.cols(), left_basis.cols(), right_basis.cols());
  const Index stride = t.left_dim() * t.right_dim();
  for (Index i = 0; i < t.out_dim(); ++i) tensor_slice(in, i, scale, t.data().data() + i * stride);
  return t;
}

SnapshotSet lift_snapshots(const LiftingSpec& spec, const SnapshotSet& fom_snaps) {
  SnapshotSet out = lifted_shell(spec, fom_snaps);
  const Index k = fom_snaps.num_samples();
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < k; ++c) lift_column(spec, fom_snaps, out, c);
  return out;
}

SnapshotSet lift_snapshots_serial(const LiftingSpec& spec, const SnapshotSet& fom_snaps) {
  SnapshotSet out = lifted_shell(spec, fom_snaps);
  for (Index c = 0; c < fom_snaps.num_samples(); ++c) lift_column(spec, fom_snaps, out, c);
  return out;
}

}  // namespace spll
