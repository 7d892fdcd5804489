#include "spll/rom.hpp"

#include <omp.h>

#include <cmath>

namespace spll {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::SpLiftLearn: return "sp-liftlearn";
    case Method::HOpInf: return "hopinf";
    case Method::StandardLiftLearn: return "standard-liftlearn";
    case Method::IntrusiveLifting: return "intrusive-lifting-test";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::SpLiftLearn, Method::HOpInf, Method::StandardLiftLearn, Method::IntrusiveLifting}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) +
                        "' (expected sp-liftlearn, hopinf, standard-liftlearn or intrusive-lifting-test)");
}

std::string_view to_string(StepperKind s) { return s == StepperKind::Kahan ? "kahan" : "midpoint"; }

StepperKind parse_stepper(std::string_view name) {
  if (name == "kahan") return StepperKind::Kahan;
  if (name == "midpoint") return StepperKind::Midpoint;
  throw InvalidArgument("unknown stepper '" + std::string(name) + "' (expected kahan or midpoint)");
}

// ---------------------------------------------------------------- bilinear forms

TensorBilinear::TensorBilinear(Index block_size, Index num_blocks, std::vector<TensorTerm> terms)
    : block_(block_size), blocks_(num_blocks), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    require(t.tensor != nullptr, "tensor term without a tensor");
    require_dims(t.out_block >= 0 && t.out_block < blocks_ && t.left_block >= 0 && t.left_block < blocks_ &&
                     t.right_block >= 0 && t.right_block < blocks_,
                 "tensor term block index out of range");
    require_dims(t.tensor->out_dim() == block_ && t.tensor->left_dim() == block_ &&
                     t.tensor->right_dim() == block_,
                 "tensor dimensions must equal the block size");
    const QuadraticTensor* h = t.tensor.get();
    if (by_left_.count(h)) continue;
    RowMajorMatrix m(block_, block_ * block_);
    for (Index i = 0; i < block_; ++i) {
      for (Index j = 0; j < block_; ++j) {
        for (Index k = 0; k < block_; ++k) m(j, i * block_ + k) = h->at(i, j, k);
      }
    }
    by_left_.emplace(h, std::move(m));
  }
}

Vector TensorBilinear::apply(const Vector& u, const Vector& v) const {
  require_dims(u.size() == dim() && v.size() == dim(), "bilinear operand size mismatch");
  Vector out = Vector::Zero(dim());
  for (const auto& t : terms_) {
    const auto ul = u.segment(t.left_block * block_, block_);
    const auto vr = v.segment(t.right_block * block_, block_);
    const auto vl = v.segment(t.left_block * block_, block_);
    const auto ur = u.segment(t.right_block * block_, block_);
    out.segment(t.out_block * block_, block_) += 0.5 * (t.tensor->apply(ul, vr) + t.tensor->apply(vl, ur));
  }
  return out;
}

void TensorBilinear::add_partial(const Vector& x, double scale, Matrix& out) const {
  require_dims(x.size() == dim() && out.rows() == dim() && out.cols() == dim(), "partial size mismatch");
  // Terms often share a tensor and a fixed operand (H(phi, q1) and H(phi, q2)),
  // so each distinct slice is contracted once.
  struct Slice {
    const QuadraticTensor* tensor;
    Index block;
    bool left;
    Matrix value;
  };
  std::vector<Slice> cache;
  cache.reserve(2 * terms_.size());
  auto slice = [&](const QuadraticTensor* t, Index block, bool left) -> const Matrix& {
    for (const auto& c : cache) {
      if (c.tensor == t && c.block == block && c.left == left) return c.value;
    }
    Matrix v = Matrix::Zero(block_, block_);
    const auto seg = x.segment(block * block_, block_);
    if (left) {
      const Eigen::RowVectorXd flat = (0.5 * scale) * (seg.transpose() * by_left_.at(t));
      v = Eigen::Map<const RowMajorMatrix>(flat.data(), block_, block_);
    } else {
      t->add_right_fixed(seg, 0.5 * scale, v);
    }
    cache.push_back({t, block, left, std::move(v)});
    return cache.back().value;
  };
  for (const auto& t : terms_) {
    out.block(t.out_block * block_, t.right_block * block_, block_, block_) += slice(t.tensor.get(), t.left_block, true);
    out.block(t.out_block * block_, t.left_block * block_, block_, block_) += slice(t.tensor.get(), t.right_block, false);
  }
}

std::vector<Index> TensorBilinear::active_rows() const {
  std::vector<bool> hit(static_cast<size_t>(blocks_), false);
  for (const auto& t : terms_) hit[static_cast<size_t>(t.out_block)] = true;
  std::vector<Index> rows;
  for (Index b = 0; b < blocks_; ++b) {
    if (!hit[static_cast<size_t>(b)]) continue;
    for (Index i = 0; i < block_; ++i) rows.push_back(b * block_ + i);
  }
  return rows;
}

CompressedQuadratic::CompressedQuadratic(Matrix b) : m_(b.rows()), b_(std::move(b)) {
  require_dims(b_.cols() == m_ * (m_ + 1) / 2, "quadratic operator needs m(m+1)/2 columns");
}

std::vector<Index> CompressedQuadratic::active_rows() const {
  std::vector<Index> rows;
  for (Index i = 0; i < m_; ++i) {
    if (b_.row(i).cwiseAbs().maxCoeff() > 0.0) rows.push_back(i);
  }
  return rows;
}

Vector CompressedQuadratic::apply(const Vector& u, const Vector& v) const {
  require_dims(u.size() == m_ && v.size() == m_, "bilinear operand size mismatch");
  Vector s(b_.cols());
  Index k = 0;
  for (Index i = 0; i < m_; ++i) {
    for (Index j = i; j < m_; ++j) s[k++] = 0.5 * (u[i] * v[j] + u[j] * v[i]);
  }
  return b_ * s;
}

void CompressedQuadratic::add_partial(const Vector& x, double scale, Matrix& out) const {
  require_dims(x.size() == m_ && out.rows() == m_ && out.cols() == m_, "partial size mismatch");
  Index k = 0;
  for (Index i = 0; i < m_; ++i) {
    for (Index j = i; j < m_; ++j, ++k) {
      out.col(j) += (0.5 * scale * x[i]) * b_.col(k);
      out.col(i) += (0.5 * scale * x[j]) * b_.col(k);
    }
  }
}

// ---------------------------------------------------------------- quadratic ROM

namespace {

const Matrix& op(const std::map<std::string, Matrix>& ops, const std::string& key, Index r) {
  auto it = ops.find(key);
  if (it == ops.end()) throw InvalidArgument("missing learned operator '" + key + "'");
  require_dims(it->second.rows() == r && it->second.cols() == r,
               "operator '" + key + "' must be " + std::to_string(r) + "x" + std::to_string(r));
  return it->second;
}

const QuadraticTensor& tens(const QuadraticROM& rom, const std::string& key) {
  auto it = rom.tensors.find(key);
  if (it == rom.tensors.end()) throw InvalidArgument("missing reduced tensor '" + key + "'");
  return *it->second;
}

Index field_index(const std::vector<std::string>& names, const std::string& name) {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Index>(i);
  }
  throw InvalidArgument("ROM has no field '" + name + "'");
}

}  // namespace

Index QuadraticROM::offset(const std::string& field) const { return field_index(field_names, field) * r; }

Vector project_state(const ReducedBasis& basis, const FOMState& lifted) {
  require_dims(static_cast<Index>(lifted.fields.size()) == basis.num_fields(),
               "lifted state does not match the basis block map");
  const Index r = basis.r();
  Vector out(basis.total_dim());
  for (size_t f = 0; f < lifted.fields.size(); ++f) {
    out.segment(static_cast<Index>(f) * r, r) = basis.block_for_field(f).transpose() * lifted.fields[f];
  }
  return out;
}

QuadraticROM assemble_rom(const LiftingSpec& spec, std::shared_ptr<const ReducedBasis> basis,
                          const std::map<std::string, Matrix>& operators,
                          const std::map<std::string, QuadraticTensor>& tensors,
                          const FOMState* lifted_initial_state) {
  require(basis != nullptr, "ROM needs a basis");
  QuadraticROM rom;
  rom.spec = spec;
  rom.r = basis->r();
  rom.basis = basis;
  rom.operators = operators;
  rom.field_names = lifted_field_names(spec);
  require_dims(static_cast<Index>(rom.field_names.size()) == basis->num_fields(),
               "basis block map does not match the lifting");
  for (const auto& [k, t] : tensors) rom.tensors[k] = std::make_shared<const QuadraticTensor>(t);

  const Index r = rom.r;
  const Index nb = basis->num_fields();
  const Index m = r * nb;
  const Matrix eye = Matrix::Identity(r, r);
  auto off = [&](const std::string& f) { return rom.offset(f); };
  auto tensor_ptr = [&](const std::string& key) {
    auto it = rom.tensors.find(key);
    if (it == rom.tensors.end()) throw InvalidArgument("missing reduced tensor '" + key + "'");
    return it->second;
  };
  auto blk = [&](const std::string& f) { return field_index(rom.field_names, f); };

  Matrix a = Matrix::Zero(m, m);
  std::vector<TensorTerm> terms;
  if (spec.problem == Problem::KGZ2D) {
    const Matrix& dq1 = op(operators, "D_q1", r);
    const Matrix& dq2 = op(operators, "D_q2", r);
    const Matrix& dv = op(operators, "D_varphi", r);
    a.block(off("q1"), off("p1"), r, r) = eye;
    a.block(off("q2"), off("p2"), r, r) = eye;
    a.block(off("p1"), off("q1"), r, r) = dq1 - eye;
    a.block(off("p2"), off("q2"), r, r) = dq2 - eye;
    a.block(off("varphi"), off("phi"), r, r) = eye;
    a.block(off("varphi"), off("w"), r, r) = eye;
    a.block(off("phi"), off("varphi"), r, r) = dv;
    const auto hp = tensor_ptr("p");
    const auto hw = tensor_ptr("w");
    for (const auto& [q, p] : {std::pair<std::string, std::string>{"q1", "p1"}, {"q2", "p2"}}) {
      terms.push_back({hp, blk(p), blk("phi"), blk(q)});
      terms.push_back({hp, blk(p), blk("w"), blk(q)});
      terms.push_back({hw, blk("w"), blk(q), blk(p)});
    }
  } else {
    spec.validate();
    const Matrix& d = op(operators, "D", r);
    a.block(off("q"), off("p"), r, r) = eye;
    a.block(off("p"), off("q"), r, r) = d;
    const auto& names = spec.aux_names;
    terms.push_back({tensor_ptr("p"), blk("p"), blk(names[static_cast<size_t>(spec.coupling_a)]),
                     blk(names[static_cast<size_t>(spec.coupling_b)])});
    for (int j = 0; j < spec.num_aux; ++j) {
      const auto& wj = names[static_cast<size_t>(j)];
      if (spec.alpha_q[j] != 0.0) terms.push_back({tensor_ptr(wj + ":q"), blk(wj), blk("q"), blk("p")});
      for (int i = 0; i < spec.num_aux; ++i) {
        if (spec.alpha_w(j, i) == 0.0) continue;
        const auto& wi = names[static_cast<size_t>(i)];
        terms.push_back({tensor_ptr(wj + ":" + wi), blk(wj), blk(wi), blk("p")});
      }
    }
  }
  rom.system.c = Vector::Zero(m);
  rom.system.A = std::move(a);
  rom.system.B = std::make_shared<TensorBilinear>(r, nb, std::move(terms));
  if (lifted_initial_state != nullptr) rom.initial_state = project_state(*basis, *lifted_initial_state);
  return rom;
}

Vector rom_rhs_per_equation(const QuadraticROM& rom, const Vector& x) {
  require_dims(x.size() == rom.dim(), "reduced state size mismatch");
  const Index r = rom.r;
  auto seg = [&](const std::string& f) -> Vector { return x.segment(rom.offset(f), r); };
  Vector out(x.size());
  auto put = [&](const std::string& f, const Vector& v) { out.segment(rom.offset(f), r) = v; };
  if (rom.spec.problem == Problem::KGZ2D) {
    const auto& hp = tens(rom, "p");
    const auto& hw = tens(rom, "w");
    const Vector q1 = seg("q1"), q2 = seg("q2"), p1 = seg("p1"), p2 = seg("p2");
    const Vector vphi = seg("varphi"), phi = seg("phi"), w = seg("w");
    put("q1", p1);
    put("q2", p2);
    put("p1", rom.operators.at("D_q1") * q1 - q1 + hp.apply(phi, q1) + hp.apply(w, q1));
    put("p2", rom.operators.at("D_q2") * q2 - q2 + hp.apply(phi, q2) + hp.apply(w, q2));
    put("varphi", phi + w);
    put("phi", rom.operators.at("D_varphi") * vphi);
    put("w", hw.apply(q1, p1) + hw.apply(q2, p2));
    return out;
  }
  const auto& spec = rom.spec;
  const Vector q = seg("q"), p = seg("p");
  put("q", p);
  const auto& names = spec.aux_names;
  put("p", rom.operators.at("D") * q +
               tens(rom, "p").apply(seg(names[static_cast<size_t>(spec.coupling_a)]),
                                    seg(names[static_cast<size_t>(spec.coupling_b)])));
  for (int j = 0; j < spec.num_aux; ++j) {
    const auto& wj = names[static_cast<size_t>(j)];
    Vector v = Vector::Zero(r);
    if (spec.alpha_q[j] != 0.0) v += tens(rom, wj + ":q").apply(q, p);
    for (int i = 0; i < spec.num_aux; ++i) {
      if (spec.alpha_w(j, i) == 0.0) continue;
      const auto& wi = names[static_cast<size_t>(i)];
      v += tens(rom, wj + ":" + wi).apply(seg(wi), p);
    }
    put(wj, v);
  }
  return out;
}

std::map<std::string, Matrix> intrusive_operators(const ConservativeFOM& model, const ReducedBasis& basis) {
  require_dims(basis.n() == model.n(), "basis and model disagree on n");
  const Matrix& phi = basis.phi;
  const Matrix dphi = model.laplacian * phi;
  Matrix pdp = phi.transpose() * dphi;
  pdp = (0.5 * (pdp + pdp.transpose())).eval();
  if (model.problem == Problem::KGZ2D) {
    const Matrix& v = basis.aux.at(0);
    const Matrix dv_full = model.laplacian * v;
    Matrix vdv = v.transpose() * dv_full;
    vdv = (0.5 * (vdv + vdv.transpose())).eval();
    return {{"D_q1", pdp}, {"D_q2", pdp}, {"D_varphi", vdv}};
  }
  return {{"D", pdp}};
}

// ---------------------------------------------------------------- HOpInf ROM

Vector HamiltonianROM::rhs(const Vector& x) const {
  const Index rr = r();
  require_dims(x.size() == 2 * rr, "reduced state size mismatch");
  const auto q = x.head(rr);
  const auto p = x.tail(rr);
  Vector out(2 * rr);
  out.head(rr) = d_q * p;
  const Vector full = basis->phi * q;
  out.tail(rr) = d_p * q - basis->phi.transpose() * nonlinearity(problem, full);
  return out;
}

Matrix HamiltonianROM::jacobian(const Vector& x) const {
  const Index rr = r();
  const Vector full = basis->phi * x.head(rr);
  Vector fp(full.size());
  for (Index m = 0; m < full.size(); ++m) fp[m] = nonlinearity_derivative(problem, full[m]);
  Matrix j = Matrix::Zero(2 * rr, 2 * rr);
  j.topRightCorner(rr, rr) = d_q;
  j.bottomLeftCorner(rr, rr) = d_p - basis->phi.transpose() * fp.asDiagonal() * basis->phi;
  return j;
}

// ---------------------------------------------------------------- standard ROM

StandardROM assemble_standard_rom(const StandardOperators& ops, std::shared_ptr<const ReducedBasis> basis,
                                  const FOMState& lifted_initial_state) {
  require(basis != nullptr, "ROM needs a basis");
  require_dims(ops.A.rows() == basis->total_dim() && ops.A.cols() == basis->total_dim(),
               "standard operator A does not match the lifted reduced dimension");
  StandardROM rom;
  rom.system.c = Vector::Zero(ops.A.rows());
  rom.system.A = ops.A;
  rom.system.B = std::make_shared<CompressedQuadratic>(ops.B);
  rom.basis = std::move(basis);
  rom.initial_state = project_state(*rom.basis, lifted_initial_state);
  return rom;
}

// ---------------------------------------------------------------- steppers

namespace {

Stepper quadratic_stepper(const QuadraticSystem& sys, double dt, StepperKind kind, const NewtonOptions& opts) {
  require(dt > 0.0, "time step must be positive");
  if (kind == StepperKind::Kahan) {
    auto k = std::make_shared<KahanStepper>(sys, dt);
    return [k](const Vector& x) { return (*k)(x); };
  }
  return [&sys, dt, opts](const Vector& x) { return implicit_midpoint_step(sys, x, dt, opts); };
}

}  // namespace

Stepper make_stepper(const QuadraticROM& rom, double dt, StepperKind kind, const NewtonOptions& opts) {
  return quadratic_stepper(rom.system, dt, kind, opts);
}

Stepper make_stepper(const StandardROM& rom, double dt, StepperKind kind, const NewtonOptions& opts) {
  return quadratic_stepper(rom.system, dt, kind, opts);
}

Stepper make_stepper(const HamiltonianROM& rom, double dt, const NewtonOptions& opts) {
  require(dt > 0.0, "time step must be positive");
  RhsFn f = [&rom](const Vector& x) { return rom.rhs(x); };
  JacFn j = [&rom](const Vector& x) { return rom.jacobian(x); };
  return [f, j, dt, opts](const Vector& x) { return implicit_midpoint_step(f, j, x, dt, opts); };
}

// ---------------------------------------------------------------- diagnostics

double perturbed_lifted_energy(const QuadraticROM& rom, const Vector& x) {
  require_dims(x.size() == rom.dim(), "reduced state size mismatch");
  const Index r = rom.r;
  auto seg = [&](const std::string& f) { return x.segment(rom.offset(f), r); };
  if (rom.spec.problem == Problem::KGZ2D) {
    const auto q1 = seg("q1");
    const auto q2 = seg("q2");
    const auto vphi = seg("varphi");
    const auto phi = seg("phi");
    const auto w = seg("w");
    const double psi = q1.squaredNorm() - q1.dot(rom.operators.at("D_q1") * q1) + q2.squaredNorm() -
                       q2.dot(rom.operators.at("D_q2") * q2) + seg("p1").squaredNorm() +
                       seg("p2").squaredNorm();
    return psi - 0.5 * vphi.dot(rom.operators.at("D_varphi") * vphi) + 0.5 * phi.squaredNorm() + phi.dot(w) +
           0.5 * w.squaredNorm();
  }
  const auto q = seg("q");
  return 0.5 * seg("p").squaredNorm() - 0.5 * q.dot(rom.operators.at("D") * q) +
         rom.spec.energy_weight * seg(rom.spec.aux_names[0]).squaredNorm();
}

double relative_state_error(const Matrix& reference, const Matrix& basis_block, const Matrix& reduced) {
  require_dims(reference.cols() == reduced.cols(), "reference and reduced trajectories need matching K");
  require_dims(basis_block.rows() == reference.rows() && basis_block.cols() == reduced.rows(),
               "basis block shape does not match the data");
  const double denom = reference.squaredNorm();
  if (!(denom > 0.0)) throw InvalidArgument("relative state error of a zero reference");
  return (reference - basis_block * reduced).squaredNorm() / denom;
}

namespace {

double energy_column(const ConservativeFOM& model, const ReducedBasis& basis, const Matrix& traj, Index c) {
  const Index r = basis.r();
  FOMState s;
  s.fields.reserve(static_cast<size_t>(model.num_fields()));
  for (Index f = 0; f < model.num_fields(); ++f) {
    s.fields.emplace_back(basis.block_for_field(static_cast<size_t>(f)) * traj.col(c).segment(f * r, r));
  }
  return fom_energy(model, s);
}

void check_traj(const ConservativeFOM& model, const ReducedBasis& basis, const Matrix& traj) {
  require_dims(basis.n() == model.n(), "basis and model disagree on n");
  require_dims(traj.rows() >= model.num_fields() * basis.r(),
               "reduced trajectory is too short to hold the FOM fields");
}

}  // namespace

Vector fom_energy_series(const ConservativeFOM& model, const ReducedBasis& basis, const Matrix& reduced_traj) {
  check_traj(model, basis, reduced_traj);
  Vector e(reduced_traj.cols());
  const Index k = reduced_traj.cols();
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < k; ++c) e[c] = energy_column(model, basis, reduced_traj, c);
  return e;
}

Vector fom_energy_series_serial(const ConservativeFOM& model, const ReducedBasis& basis,
                                const Matrix& reduced_traj) {
  check_traj(model, basis, reduced_traj);
  Vector e(reduced_traj.cols());
  for (Index c = 0; c < reduced_traj.cols(); ++c) e[c] = energy_column(model, basis, reduced_traj, c);
  return e;
}

Vector fom_energy_error(const ConservativeFOM& model, const ReducedBasis& basis, const Matrix& reduced_traj) {
  Vector e = fom_energy_series(model, basis, reduced_traj);
  if (e.size() == 0) return e;
  const double e0 = e[0];
  return (e.array() - e0).abs().matrix();
}

double efficacy(double train_error, double wall_seconds) {
  require(train_error > 0.0 && wall_seconds > 0.0, "efficacy needs positive error and wall-clock time");
  return 1.0 / (train_error * wall_seconds);
}

std::map<std::string, double> state_errors(Problem problem, const ReducedBasis& basis, const SnapshotSet& fom,
                                           const Matrix& reduced_traj, Index first, Index last) {
  require(first >= 0 && last >= first && last < fom.num_samples() && last < reduced_traj.cols(),
          "error window out of range");
  const Index r = basis.r();
  const Index k = last - first + 1;
  auto ref = [&](const std::string& f) { return Matrix(fom.field(f).middleCols(first, k)); };
  auto red = [&](Index f) { return Matrix(reduced_traj.block(f * r, first, r, k)); };
  std::map<std::string, double> out;
  if (problem == Problem::KGZ2D) {
    // psi = q1 + i q2: both parts share Phi, errors pooled
    Matrix q(2 * basis.n(), k);
    q << ref("q1"), ref("q2");
    Matrix qr(2 * r, k);
    qr << red(0), red(1);
    Matrix phi2 = Matrix::Zero(2 * basis.n(), 2 * r);
    phi2.topLeftCorner(basis.n(), r) = basis.phi;
    phi2.bottomRightCorner(basis.n(), r) = basis.phi;
    out["psi"] = relative_state_error(q, phi2, qr);
    out["phi"] = relative_state_error(ref("phi"), basis.block_for_field(5), red(5));
    return out;
  }
  out["q"] = relative_state_error(ref("q"), basis.phi, red(0));
  return out;
}

}  // namespace spll
