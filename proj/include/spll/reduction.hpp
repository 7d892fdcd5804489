#pragma once

#include <map>
#include <string>
#include <vector>

#include "spll/integrators.hpp"
#include "spll/lifting.hpp"

namespace spll {

/// Snapshot matrices (n x K) per lifted field, sampled at uniform times.
struct SnapshotSet {
  Problem problem = Problem::SineGordon1D;
  std::vector<std::string> names;
  std::vector<Matrix> fields;
  Vector times;

  [[nodiscard]] Index num_samples() const { return times.size(); }
  [[nodiscard]] const Matrix& field(const std::string& name) const;
  [[nodiscard]] double dt() const;
  void validate() const;
};

/// Lifted field names in stacking order: FOM fields then auxiliaries.
std::vector<std::string> lifted_field_names(const LiftingSpec& spec);

/// Appends the auxiliary snapshot fields tau_i(Q) to a FOM snapshot set.
/// OpenMP-parallel over snapshot columns; bit-identical to the serial form.
SnapshotSet lift_snapshots(const LiftingSpec& spec, const SnapshotSet& fom_snaps);
SnapshotSet lift_snapshots_serial(const LiftingSpec& spec, const SnapshotSet& fom_snaps);

/// Block-diagonal basis: one shared PSD block for positions and momenta,
/// POD blocks for the remaining lifted fields.
struct ReducedBasis {
  Problem problem = Problem::SineGordon1D;
  Matrix phi;                  // n x r, shared by q and p (KGZ: q1, q2, p1, p2)
  std::vector<Matrix> aux;     // V_1..V_k (KGZ: a single V)
  std::vector<int> block_map;  // per lifted field: 0 = phi, i >= 1 = aux[i-1]

  [[nodiscard]] Index r() const { return phi.cols(); }
  [[nodiscard]] Index n() const { return phi.rows(); }
  [[nodiscard]] const Matrix& block(int b) const { return b == 0 ? phi : aux[static_cast<size_t>(b - 1)]; }
  [[nodiscard]] const Matrix& block_for_field(size_t field) const { return block(block_map[field]); }
  [[nodiscard]] Index num_fields() const { return static_cast<Index>(block_map.size()); }
  [[nodiscard]] Index total_dim() const { return r() * num_fields(); }
  /// Leading r columns of every block (SVD bases are nested).
  [[nodiscard]] ReducedBasis truncated(Index r) const;
};

/// Leading r left singular vectors of `data`, with the largest-magnitude entry
/// of each column made positive. Also returns all singular values when asked.
Matrix leading_left_singular_vectors(const Matrix& data, Index r, Vector* singular_values = nullptr);

Matrix cotangent_lift_psd(const Matrix& q, const Matrix& p, Index r);
/// Cotangent lift over several position/momentum pairs (KGZ: q1, q2, p1, p2).
Matrix cotangent_lift_psd(const std::vector<const Matrix*>& blocks, Index r);

Matrix pod_basis(const Matrix& w, Index r);

ReducedBasis assemble_basis(Problem problem, Matrix phi, std::vector<Matrix> aux);

/// Builds every block from lifted snapshots at rank r.
ReducedBasis build_basis(const LiftingSpec& spec, const SnapshotSet& lifted, Index r);

struct ReducedData {
  std::vector<std::string> names;
  std::vector<Matrix> states;       // r x K' per lifted field
  std::vector<Matrix> derivatives;  // r x K' per lifted field
  Vector times;                     // K'
  Index first = 0;
  Index last = 0;

  [[nodiscard]] const Matrix& state(const std::string& name) const;
  [[nodiscard]] const Matrix& derivative(const std::string& name) const;
};

ReducedData project_snapshots(const ReducedBasis& basis, const SnapshotSet& lifted);

/// ||w_k - V V^T w_k|| / ||w_k|| per column; NaN for zero columns.
Vector projection_error(const Matrix& v, const Matrix& w);

}  // namespace spll
