#include "spll/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "spll/fom_stepper.hpp"

namespace spll {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Max that treats any non-finite entry as unbounded.
double blowup_max(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) return 0.0;
  if (!v.allFinite()) return std::numeric_limits<double>::infinity();
  return v.maxCoeff();
}

template <class F>
void parallel_for(Index count, int workers, F&& fn) {
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (threads == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<std::string> operator_names(Method m, Problem p) {
  switch (m) {
    case Method::SpLiftLearn:
    case Method::IntrusiveLifting:
      return p == Problem::KGZ2D ? std::vector<std::string>{"D_q1", "D_q2", "D_varphi"}
                                 : std::vector<std::string>{"D"};
    case Method::HOpInf: return {"D_q", "D_p"};
    case Method::StandardLiftLearn: return {"A", "B"};
  }
  return {};
}

Vector reduced_initial_qp(const ReducedBasis& basis, const FOMState& ic) {
  const Index r = basis.r();
  Vector x(2 * r);
  x.head(r) = basis.phi.transpose() * ic.fields[0];
  x.tail(r) = basis.phi.transpose() * ic.fields[1];
  return x;
}

}  // namespace

// ---------------------------------------------------------------- in-memory steps

FomData run_fom(const ExperimentConfig& cfg) {
  cfg.validate();
  FomData out;
  out.model = make_fom(cfg.problem, default_grid(cfg.problem, cfg.grid_points));
  const Index n = out.model.n();
  const Index nf = out.model.num_fields();
  const Index k = cfg.total_samples();
  out.snaps.problem = cfg.problem;
  out.snaps.names = out.model.field_names();
  out.snaps.fields.assign(static_cast<size_t>(nf), Matrix(n, k));
  out.snaps.times = Vector::LinSpaced(k, 0.0, static_cast<double>(k - 1) * cfg.sample_dt());

  FomMidpoint stepper(out.model, cfg.dt);
  const Stepper step = [&stepper](const Vector& x) { return stepper(x); };
  const long stride = static_cast<long>(cfg.stride);
  const auto t0 = std::chrono::steady_clock::now();
  integrate_observe(step, out.model.stack(initial_condition(out.model)), static_cast<long>(cfg.steps(cfg.t_end)),
                    [&](long step_index, const Vector& x) {
                      if (step_index % stride != 0) return;
                      const Index c = step_index / stride;
                      for (Index f = 0; f < nf; ++f) out.snaps.fields[static_cast<size_t>(f)].col(c) = x.segment(f * n, n);
                    });
  out.wall_seconds = seconds_since(t0);
  return out;
}

SnapshotSet window(const SnapshotSet& s, Index first, Index count) {
  require(first >= 0 && count >= 1 && first + count <= s.num_samples(), "snapshot window out of range");
  SnapshotSet out;
  out.problem = s.problem;
  out.names = s.names;
  for (const auto& f : s.fields) out.fields.emplace_back(f.middleCols(first, count));
  out.times = s.times.segment(first, count);
  return out;
}

TrainedROM restore_rom(Method method, const LiftingSpec& spec, const ConservativeFOM& model,
                       std::shared_ptr<const ReducedBasis> basis, std::map<std::string, Matrix> operators) {
  require(basis != nullptr, "ROM needs a basis");
  TrainedROM t;
  t.method = method;
  t.r = basis->r();
  t.basis = basis;
  t.operators = std::move(operators);
  const FOMState ic = initial_condition(model);
  switch (method) {
    case Method::SpLiftLearn:
    case Method::IntrusiveLifting: {
      const FOMState lifted_ic = lift_state(spec, ic);
      t.rom = assemble_rom(spec, basis, t.operators, rom_quadratic_terms(spec, *basis), &lifted_ic);
      break;
    }
    case Method::HOpInf: {
      HamiltonianROM h;
      h.problem = model.problem;
      h.d_q = t.operators.at("D_q");
      h.d_p = t.operators.at("D_p");
      h.basis = basis;
      h.initial_state = reduced_initial_qp(*basis, ic);
      t.rom = std::move(h);
      break;
    }
    case Method::StandardLiftLearn: {
      StandardOperators ops;
      ops.A = t.operators.at("A");
      ops.B = t.operators.at("B");
      t.rom = assemble_standard_rom(ops, basis, lift_state(spec, ic));
      break;
    }
  }
  return t;
}

TrainedROM train_rom(Method method, const LiftingSpec& spec, const ConservativeFOM& model,
                     std::shared_ptr<const ReducedBasis> basis, const SnapshotSet& lifted_train, double lambda) {
  require(basis != nullptr, "ROM needs a basis");
  if (method == Method::IntrusiveLifting) {
    return restore_rom(method, spec, model, basis, intrusive_operators(model, *basis));
  }
  const ReducedData data = project_snapshots(*basis, lifted_train);
  std::map<std::string, Matrix> ops;
  std::vector<InferenceReport> reports;
  switch (method) {
    case Method::SpLiftLearn: {
      LearnedOperators learned = infer_sp_liftlearn(spec, data, rom_quadratic_terms(spec, *basis), lambda);
      ops = std::move(learned.operators);
      reports = std::move(learned.reports);
      break;
    }
    case Method::HOpInf: {
      const Matrix& phi = basis->phi;
      const Problem problem = model.problem;
      LearnedOperators learned = infer_hopinf(
          problem, data, [&](const Matrix& q) { return hopinf_nonlinear_term(problem, phi, q); }, lambda);
      ops = std::move(learned.operators);
      reports = std::move(learned.reports);
      break;
    }
    case Method::StandardLiftLearn: {
      const Index r = basis->r();
      const Index nf = static_cast<Index>(data.names.size());
      const Index k = data.states[0].cols();
      Matrix y(nf * r, k);
      Matrix y_dot(nf * r, k);
      for (Index f = 0; f < nf; ++f) {
        y.middleRows(f * r, r) = data.states[static_cast<size_t>(f)];
        y_dot.middleRows(f * r, r) = data.derivatives[static_cast<size_t>(f)];
      }
      // the lifted features are nearly dependent (sin^2 + cos^2 = 1), so this
      // needs lambda > 0 in practice; lambda = 0 throws DegenerateGram
      StandardOperators learned = infer_standard_liftlearn(y, y_dot, lambda);
      ops = {{"A", learned.A}, {"B", learned.B}};
      reports = {learned.report};
      break;
    }
    case Method::IntrusiveLifting: break;
  }
  TrainedROM t = restore_rom(method, spec, model, std::move(basis), std::move(ops));
  t.reports = std::move(reports);
  return t;
}

namespace {

Stepper stepper_for(const TrainedROM& rom, double dt, StepperKind kind) {
  return std::visit(
      [&](const auto& m) -> Stepper {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, HamiltonianROM>) {
          return make_stepper(m, dt);
        } else {
          return make_stepper(m, dt, kind);
        }
      },
      rom.rom);
}

const Vector& initial_of(const TrainedROM& rom) {
  return std::visit([](const auto& m) -> const Vector& { return m.initial_state; }, rom.rom);
}

}  // namespace

Trajectory simulate(const TrainedROM& rom, double dt, long n_steps, StepperKind kind, long stride) {
  require(stride >= 1, "stride must be >= 1");
  const Stepper step = stepper_for(rom, dt, kind);
  const Vector& x0 = initial_of(rom);
  const long cols = n_steps / stride + 1;
  Trajectory traj;
  traj.states = Matrix::Constant(x0.size(), cols, std::numeric_limits<double>::quiet_NaN());
  traj.times = Vector::LinSpaced(cols, 0.0, static_cast<double>(cols - 1) * dt * static_cast<double>(stride));
  try {
    integrate_observe(step, x0, n_steps, [&](long k, const Vector& x) {
      if (k % stride == 0) traj.states.col(k / stride) = x;
    });
  } catch (const StepFailure&) {
    // blown-up baselines are data, not errors: remaining columns stay NaN
  }
  return traj;
}

double time_rom(const TrainedROM& rom, double dt, long n_steps, StepperKind kind, int repeats) {
  require(repeats >= 1, "timing needs at least one repetition");
  double total = 0.0;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Stepper step = stepper_for(rom, dt, kind);
    try {
      integrate_observe(step, initial_of(rom), n_steps, [](long, const Vector&) {});
    } catch (const StepFailure&) {
    }
    total += seconds_since(t0);
  }
  return total / repeats;
}

DiagnosticsReport diagnose(const ExperimentConfig& cfg, const FomData& fom, const TrainedROM& rom,
                           const Matrix& reduced_traj, double wall_seconds) {
  DiagnosticsReport rep;
  rep.problem = cfg.problem;
  rep.method = rom.method;
  rep.r = rom.r;
  const Index k_train = cfg.train_samples();
  const Index total = cfg.total_samples();
  require_dims(reduced_traj.cols() >= total && fom.snaps.num_samples() >= total,
               "trajectory shorter than the configured window");
  const Matrix traj = reduced_traj.leftCols(total);
  for (Index c = 0; c < total; ++c) {
    if (!traj.col(c).allFinite()) {
      rep.failed_step = static_cast<long>(c * cfg.stride);
      break;
    }
  }
  const ReducedBasis& basis = *rom.basis;
  rep.train_error = state_errors(cfg.problem, basis, fom.snaps, traj, 0, k_train - 1);
  if (total > k_train) rep.test_error = state_errors(cfg.problem, basis, fom.snaps, traj, k_train - 1, total - 1);
  rep.times = fom.snaps.times.head(total);
  rep.energy_error = fom_energy_error(fom.model, basis, traj);
  rep.max_energy_error_train = blowup_max(rep.energy_error.head(k_train));
  rep.max_energy_error = blowup_max(rep.energy_error);
  if (const auto* q = std::get_if<QuadraticROM>(&rom.rom)) {
    rep.lifted_energy_drift.resize(total);
    const double e0 = perturbed_lifted_energy(*q, traj.col(0));
    for (Index c = 0; c < total; ++c) {
      rep.lifted_energy_drift[c] = std::abs(perturbed_lifted_energy(*q, traj.col(c)) - e0);
    }
  }
  rep.primary_field = cfg.problem == Problem::KGZ2D ? "psi" : "q";
  rep.wall_seconds = wall_seconds;
  const double err = rep.train_error.at(rep.primary_field);
  rep.efficacy = (err > 0.0 && wall_seconds > 0.0 && std::isfinite(err)) ? efficacy(err, wall_seconds) : 0.0;
  return rep;
}

// ---------------------------------------------------------------- manifest

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::SimulateFom: return "simulate-fom";
    case Stage::LiftSnapshots: return "lift-snapshots";
    case Stage::BuildBasis: return "build-basis";
    case Stage::Infer: return "infer";
    case Stage::SimulateRom: return "simulate-rom";
    case Stage::Diagnose: return "diagnose";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::SimulateFom, Stage::LiftSnapshots, Stage::BuildBasis,
                                            Stage::Infer,       Stage::SimulateRom,   Stage::Diagnose};
  return stages;
}

Stage parse_stage(std::string_view name) {
  for (Stage s : all_stages()) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown stage '" + std::string(name) + "'");
}

std::string RunManifest::to_json() const {
  json j;
  j["config_hash"] = config_hash;
  j["tool_version"] = tool_version;
  j["config"] = config_text;
  json stages_j = json::object();
  for (const auto& [name, rec] : stages) {
    stages_j[name] = {{"key", rec.key}, {"seconds", rec.seconds}, {"artifacts", rec.artifacts},
                      {"metrics", rec.metrics}};
  }
  j["stages"] = stages_j;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.config_hash = j.at("config_hash").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    for (const auto& [name, rec_j] : j.at("stages").items()) {
      StageRecord rec;
      rec.key = rec_j.at("key").get<std::string>();
      rec.seconds = rec_j.at("seconds").get<double>();
      rec.artifacts = rec_j.at("artifacts").get<std::map<std::string, std::string>>();
      rec.metrics = rec_j.at("metrics").get<std::map<std::string, double>>();
      m.stages[name] = std::move(rec);
    }
  } catch (const json::exception& e) {
    throw CorruptArtifact(std::string("unreadable run manifest: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------- staged runner

namespace {

std::string rom_dir(Method m, Index r) { return std::string(to_string(m)) + "/r" + std::to_string(r); }

std::string join_r(const std::vector<Index>& rs) {
  std::string s;
  for (Index r : rs) s += std::to_string(r) + ",";
  return s;
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig cfg, RunOptions opts)
    : cfg_(std::move(cfg)), opts_(opts), root_(cfg_.output_dir) {
  cfg_.validate();
  const fs::path mpath = root_ / "manifest.json";
  if (fs::exists(mpath)) {
    std::ifstream in(mpath);
    std::stringstream ss;
    ss << in.rdbuf();
    manifest_ = RunManifest::from_json(ss.str());
  }
  manifest_.config_text = cfg_.to_text();
  manifest_.config_hash = sha256_string(manifest_.config_text);
  manifest_.tool_version = kToolVersion;
}

std::string Pipeline::stage_key(Stage s) const {
  std::ostringstream os;
  switch (s) {
    case Stage::SimulateFom:
      os << kToolVersion << '|' << to_string(cfg_.problem) << '|' << cfg_.grid_points << '|' << format_double(cfg_.dt)
         << '|' << format_double(cfg_.t_end) << '|' << cfg_.stride;
      break;
    case Stage::LiftSnapshots:
      os << stage_key(Stage::SimulateFom) << '|' << format_double(cfg_.t_train);
      break;
    case Stage::BuildBasis: os << stage_key(Stage::LiftSnapshots) << '|' << cfg_.r_max(); break;
    case Stage::Infer: {
      os << stage_key(Stage::BuildBasis) << '|' << join_r(cfg_.r_sweep) << '|' << format_double(cfg_.lambda) << '|' << format_double(cfg_.lambda_standard);
      for (Method m : cfg_.methods) os << '|' << to_string(m);
      break;
    }
    case Stage::SimulateRom:
      os << stage_key(Stage::Infer) << '|' << to_string(cfg_.stepper) << '|' << cfg_.timing_repeats;
      break;
    case Stage::Diagnose: os << stage_key(Stage::SimulateRom) << "|diagnose"; break;
  }
  return sha256_string(os.str());
}

bool Pipeline::up_to_date(Stage s) const {
  auto it = manifest_.stages.find(std::string(to_string(s)));
  if (it == manifest_.stages.end() || it->second.key != stage_key(s)) return false;
  for (const auto& [rel, sum] : it->second.artifacts) {
    const fs::path p = root_ / rel;
    if (!fs::exists(p) || sha256_file(p) != sum) return false;
  }
  return true;
}

void Pipeline::verify(Stage s) const {
  const std::string name(to_string(s));
  auto it = manifest_.stages.find(name);
  if (it == manifest_.stages.end() || it->second.key != stage_key(s)) {
    throw MissingArtifact(name, "no outputs for the current config in " + root_.string() + "; run '" + name + "'");
  }
  for (const auto& [rel, sum] : it->second.artifacts) {
    const fs::path p = root_ / rel;
    if (!fs::exists(p)) throw MissingArtifact(name, rel + " was deleted");
    if (sha256_file(p) != sum) throw ArtifactMismatch(rel + " does not match its manifest checksum");
  }
}

void Pipeline::require_upstream(Stage s) const {
  for (Stage u : all_stages()) {
    if (u == s) break;
    verify(u);
  }
}

void Pipeline::save_manifest() const { write_text_atomic(root_ / "manifest.json", manifest_.to_json()); }

std::string Pipeline::record(StageRecord& rec, const fs::path& rel) {
  const std::string sum = sha256_file(root_ / rel);
  rec.artifacts[rel.generic_string()] = sum;
  return sum;
}

bool Pipeline::run_stage(Stage s) {
  require_upstream(s);
  const std::string name(to_string(s));
  if (!opts_.force && up_to_date(s)) {
    log_.push_back(name + ": cached");
    return false;
  }
  StageRecord rec;
  rec.key = stage_key(s);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (s) {
      case Stage::SimulateFom: do_simulate_fom(rec); break;
      case Stage::LiftSnapshots: do_lift(rec); break;
      case Stage::BuildBasis: do_basis(rec); break;
      case Stage::Infer: do_infer(rec); break;
      case Stage::SimulateRom: do_simulate_rom(rec); break;
      case Stage::Diagnose: do_diagnose(rec); break;
    }
  } catch (const MissingArtifact&) {
    throw;
  } catch (const ArtifactMismatch&) {
    throw;
  } catch (const CorruptArtifact&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  rec.seconds = seconds_since(t0);
  manifest_.stages[name] = std::move(rec);
  save_manifest();
  log_.push_back(name + ": done");
  return true;
}

const RunManifest& Pipeline::run() {
  for (Stage s : all_stages()) run_stage(s);
  return manifest_;
}

// ---- stage bodies

void Pipeline::do_simulate_fom(StageRecord& rec) {
  const FomData fom = run_fom(cfg_);
  for (size_t f = 0; f < fom.snaps.fields.size(); ++f) {
    const fs::path rel = fs::path("fom") / (fom.snaps.names[f] + ".spll");
    write_matrix(root_ / rel, fom.snaps.fields[f]);
    record(rec, rel);
  }
  write_vector(root_ / "fom/times.spll", fom.snaps.times);
  record(rec, "fom/times.spll");
  rec.metrics["wall_seconds"] = fom.wall_seconds;
  // energy drift of the stored trajectory, as a sanity metric
  double e0 = 0.0;
  double drift = 0.0;
  for (Index c = 0; c < fom.snaps.num_samples(); ++c) {
    FOMState st;
    for (const auto& f : fom.snaps.fields) st.fields.emplace_back(f.col(c));
    const double e = fom_energy(fom.model, st);
    if (c == 0) e0 = e;
    drift = std::max(drift, std::abs(e - e0));
  }
  rec.metrics["energy_drift_max"] = drift;
  rec.metrics["energy_initial"] = e0;
}

FomData Pipeline::load_fom() const {
  FomData fom;
  fom.model = make_fom(cfg_.problem, default_grid(cfg_.problem, cfg_.grid_points));
  fom.snaps.problem = cfg_.problem;
  fom.snaps.names = fom.model.field_names();
  for (const auto& name : fom.snaps.names) fom.snaps.fields.push_back(read_matrix(root_ / "fom" / (name + ".spll")));
  fom.snaps.times = read_vector(root_ / "fom/times.spll");
  fom.snaps.validate();
  fom.wall_seconds = manifest_.stages.at("simulate-fom").metrics.at("wall_seconds");
  return fom;
}

void Pipeline::do_lift(StageRecord& rec) {
  const FomData fom = load_fom();
  const LiftingSpec spec = lifting_for(cfg_.problem);
  const SnapshotSet lifted = lift_snapshots(spec, window(fom.snaps, 0, cfg_.train_samples()));
  for (const auto& name : spec.aux_names) {
    const fs::path rel = fs::path("lifted") / (name + ".spll");
    write_matrix(root_ / rel, lifted.field(name));
    record(rec, rel);
  }
}

SnapshotSet Pipeline::load_lifted_train(const FomData& fom) const {
  const LiftingSpec spec = lifting_for(cfg_.problem);
  SnapshotSet out = window(fom.snaps, 0, cfg_.train_samples());
  out.names = lifted_field_names(spec);
  for (const auto& name : spec.aux_names) out.fields.push_back(read_matrix(root_ / "lifted" / (name + ".spll")));
  out.validate();
  return out;
}

void Pipeline::do_basis(StageRecord& rec) {
  const FomData fom = load_fom();
  const LiftingSpec spec = lifting_for(cfg_.problem);
  const ReducedBasis basis = build_basis(spec, load_lifted_train(fom), cfg_.r_max());
  write_matrix(root_ / "basis/phi.spll", basis.phi);
  record(rec, "basis/phi.spll");
  for (size_t i = 0; i < basis.aux.size(); ++i) {
    const fs::path rel = fs::path("basis") / ("aux" + std::to_string(i + 1) + ".spll");
    write_matrix(root_ / rel, basis.aux[i]);
    record(rec, rel);
  }
}

std::shared_ptr<const ReducedBasis> Pipeline::load_basis(Index r) const {
  const LiftingSpec spec = lifting_for(cfg_.problem);
  Matrix phi = read_matrix(root_ / "basis/phi.spll");
  std::vector<Matrix> aux;
  const size_t n_aux = cfg_.problem == Problem::KGZ2D ? 1 : static_cast<size_t>(spec.num_aux);
  for (size_t i = 0; i < n_aux; ++i) aux.push_back(read_matrix(root_ / "basis" / ("aux" + std::to_string(i + 1) + ".spll")));
  ReducedBasis full = assemble_basis(cfg_.problem, std::move(phi), std::move(aux));
  if (r == full.r()) return std::make_shared<const ReducedBasis>(std::move(full));
  return std::make_shared<const ReducedBasis>(full.truncated(r));
}

void Pipeline::do_infer(StageRecord& rec) {
  const FomData fom = load_fom();
  const LiftingSpec spec = lifting_for(cfg_.problem);
  const SnapshotSet lifted = load_lifted_train(fom);
  std::vector<std::pair<Method, Index>> jobs;
  for (Method m : cfg_.methods) {
    for (Index r : cfg_.r_sweep) jobs.emplace_back(m, r);
  }
  std::vector<std::vector<fs::path>> written(jobs.size());
  std::vector<std::vector<InferenceReport>> reports(jobs.size());
  parallel_for(static_cast<Index>(jobs.size()), opts_.workers, [&](Index i) {
    const auto [m, r] = jobs[static_cast<size_t>(i)];
    const TrainedROM t = train_rom(m, spec, fom.model, load_basis(r), lifted,
                                   m == Method::StandardLiftLearn ? cfg_.lambda_standard : cfg_.lambda);
    const fs::path dir = fs::path("infer") / rom_dir(m, r);
    for (const auto& [name, mat] : t.operators) {
      write_matrix(root_ / dir / (name + ".spll"), mat);
      written[static_cast<size_t>(i)].push_back(dir / (name + ".spll"));
    }
    reports[static_cast<size_t>(i)] = t.reports;
  });
  for (size_t i = 0; i < jobs.size(); ++i) {
    for (const auto& rel : written[i]) record(rec, rel);
    const std::string tag = rom_dir(jobs[i].first, jobs[i].second);
    for (const auto& rep : reports[i]) {
      rec.metrics[tag + "/" + rep.equation + "/residual"] = rep.residual;
      rec.metrics[tag + "/" + rep.equation + "/stationarity"] = rep.stationarity;
      rec.metrics[tag + "/" + rep.equation + "/gram_min"] = rep.gram_min;
      rec.metrics[tag + "/" + rep.equation + "/gram_max"] = rep.gram_max;
    }
  }
}

TrainedROM Pipeline::load_rom(const FomData& fom, Method m, Index r) const {
  std::map<std::string, Matrix> ops;
  const fs::path dir = root_ / "infer" / rom_dir(m, r);
  for (const auto& name : operator_names(m, cfg_.problem)) ops[name] = read_matrix(dir / (name + ".spll"));
  return restore_rom(m, lifting_for(cfg_.problem), fom.model, load_basis(r), std::move(ops));
}

void Pipeline::do_simulate_rom(StageRecord& rec) {
  const FomData fom = load_fom();
  std::vector<std::pair<Method, Index>> jobs;
  for (Method m : cfg_.methods) {
    for (Index r : cfg_.r_sweep) jobs.emplace_back(m, r);
  }
  const long n_end = static_cast<long>(cfg_.steps(cfg_.t_end));
  const long n_train = static_cast<long>(cfg_.steps(cfg_.t_train));
  std::vector<fs::path> written(jobs.size());
  parallel_for(static_cast<Index>(jobs.size()), opts_.workers, [&](Index i) {
    const auto [m, r] = jobs[static_cast<size_t>(i)];
    const TrainedROM t = load_rom(fom, m, r);
    const Trajectory traj = simulate(t, cfg_.dt, n_end, cfg_.stepper, static_cast<long>(cfg_.stride));
    const fs::path rel = fs::path("rom") / rom_dir(m, r) / "traj.spll";
    write_matrix(root_ / rel, traj.states);
    written[static_cast<size_t>(i)] = rel;
  });
  for (const auto& rel : written) record(rec, rel);
  // timing runs one at a time so they do not compete for cores
  for (const auto& [m, r] : jobs) {
    const TrainedROM t = load_rom(fom, m, r);
    rec.metrics[rom_dir(m, r) + "/wall_seconds"] = time_rom(t, cfg_.dt, n_train, cfg_.stepper, cfg_.timing_repeats);
  }
}

void Pipeline::do_diagnose(StageRecord& rec) {
  const FomData fom = load_fom();
  const auto& sim = manifest_.stages.at("simulate-rom");
  std::vector<DiagnosticsReport> reports;
  for (Method m : cfg_.methods) {
    for (Index r : cfg_.r_sweep) {
      const TrainedROM t = load_rom(fom, m, r);
      const Matrix traj = read_matrix(root_ / "rom" / rom_dir(m, r) / "traj.spll");
      reports.push_back(diagnose(cfg_, fom, t, traj, sim.metrics.at(rom_dir(m, r) + "/wall_seconds")));
    }
  }
  write_text_atomic(root_ / "diagnostics/summary.csv", summary_csv(reports));
  write_text_atomic(root_ / "diagnostics/energy.csv", energy_csv(reports));
  record(rec, "diagnostics/summary.csv");
  record(rec, "diagnostics/energy.csv");
  for (const auto& rep : reports) {
    const std::string tag = rom_dir(rep.method, rep.r);
    rec.metrics[tag + "/train_error"] = rep.train_error.at(rep.primary_field);
    rec.metrics[tag + "/max_energy_error"] = rep.max_energy_error;
  }
}

// ---------------------------------------------------------------- compare

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

std::string compare_runs(const std::vector<fs::path>& run_dirs) {
  require(!run_dirs.empty(), "compare needs at least one run directory");
  using Key = std::tuple<std::string, long, std::string>;  // problem, dim_label, field
  std::map<Key, std::map<std::string, std::pair<std::string, std::string>>> table;
  std::vector<std::string> methods;
  for (const auto& dir : run_dirs) {
    const fs::path p = dir / "diagnostics/summary.csv";
    std::ifstream in(p);
    if (!in) throw MissingArtifact("diagnose", p.string() + " not found");
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    auto col = [&](const std::string& name) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw CorruptArtifact(p.string() + ": missing column " + name);
      return static_cast<size_t>(it - header.begin());
    };
    const size_t c_problem = col("problem"), c_method = col("method"), c_label = col("dim_label"),
                 c_field = col("field"), c_train = col("train_error"), c_test = col("test_error");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != header.size()) throw CorruptArtifact(p.string() + ": ragged row");
      const std::string& method = cells[c_method];
      if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
      table[{cells[c_problem], std::stol(cells[c_label]), cells[c_field]}][method] = {cells[c_train],
                                                                                     cells[c_test]};
    }
  }
  std::ostringstream os;
  os << "problem,dim_label,field";
  for (const auto& m : methods) os << ',' << m << "_train," << m << "_test";
  os << '\n';
  for (const auto& [key, by_method] : table) {
    os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key);
    for (const auto& m : methods) {
      auto it = by_method.find(m);
      if (it == by_method.end()) {
        os << ",,";
      } else {
        os << ',' << it->second.first << ',' << it->second.second;
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace spll
