#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spll/config.hpp"
#include "spll/io.hpp"
#include "spll/rom.hpp"

namespace spll {

inline constexpr const char* kToolVersion = "0.1.0";

/// A stage input is absent; `producer` names the subcommand that makes it.
class MissingArtifact : public Error {
 public:
  MissingArtifact(const std::string& producer, const std::string& detail)
      : Error("missing artifact from stage '" + producer + "': " + detail), producer_(producer) {}
  [[nodiscard]] const std::string& producer() const { return producer_; }

 private:
  std::string producer_;
};

/// A persisted artifact no longer matches the checksum in the manifest.
class ArtifactMismatch : public Error {
 public:
  using Error::Error;
};

/// Wraps any failure inside a stage with the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// ------------------------------------------------------------ in-memory steps

struct FomData {
  ConservativeFOM model;
  SnapshotSet snaps;  // every FOM field over [0, t_end] at the snapshot stride
  double wall_seconds = 0.0;
};

FomData run_fom(const ExperimentConfig& cfg);

/// Columns [first, first + count) of every field.
SnapshotSet window(const SnapshotSet& s, Index first, Index count);

using RomVariant = std::variant<QuadraticROM, HamiltonianROM, StandardROM>;

struct TrainedROM {
  Method method = Method::SpLiftLearn;
  Index r = 0;
  std::shared_ptr<const ReducedBasis> basis;
  RomVariant rom;
  std::map<std::string, Matrix> operators;  // what gets persisted
  std::vector<InferenceReport> reports;
};

/// Infers (or projects, for the intrusive reference) and assembles one ROM.
TrainedROM train_rom(Method method, const LiftingSpec& spec, const ConservativeFOM& model,
                     std::shared_ptr<const ReducedBasis> basis, const SnapshotSet& lifted_train, double lambda);

/// Rebuilds a ROM from persisted operators.
TrainedROM restore_rom(Method method, const LiftingSpec& spec, const ConservativeFOM& model,
                       std::shared_ptr<const ReducedBasis> basis, std::map<std::string, Matrix> operators);

/// HOpInf always integrates with the midpoint rule; the others use `kind`.
Trajectory simulate(const TrainedROM& rom, double dt, long n_steps, StepperKind kind, long stride = 1);

/// Mean wall-clock seconds of `repeats` ROM simulations of n_steps.
double time_rom(const TrainedROM& rom, double dt, long n_steps, StepperKind kind, int repeats);

DiagnosticsReport diagnose(const ExperimentConfig& cfg, const FomData& fom, const TrainedROM& rom,
                           const Matrix& reduced_traj, double wall_seconds);

// ------------------------------------------------------------ staged runner

enum class Stage { SimulateFom, LiftSnapshots, BuildBasis, Infer, SimulateRom, Diagnose };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& all_stages();

struct StageRecord {
  std::string key;
  double seconds = 0.0;
  std::map<std::string, std::string> artifacts;  // relative path -> sha256
  std::map<std::string, double> metrics;
};

struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string config_text;
  std::map<std::string, StageRecord> stages;

  [[nodiscard]] std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

struct RunOptions {
  bool force = false;
  int workers = 1;
  bool verbose = false;
};

class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, RunOptions opts = {});

  /// Runs every stage in order (cached stages are skipped).
  const RunManifest& run();
  /// Runs one stage from persisted inputs. Returns true if it recomputed.
  bool run_stage(Stage s);

  [[nodiscard]] const RunManifest& manifest() const { return manifest_; }
  [[nodiscard]] const std::filesystem::path& root() const { return root_; }
  [[nodiscard]] const std::vector<std::string>& log() const { return log_; }

 private:
  [[nodiscard]] std::string stage_key(Stage s) const;
  [[nodiscard]] bool up_to_date(Stage s) const;
  void require_upstream(Stage s) const;
  void verify(Stage s) const;
  void save_manifest() const;
  std::string record(StageRecord& rec, const std::filesystem::path& rel);

  void do_simulate_fom(StageRecord& rec);
  void do_lift(StageRecord& rec);
  void do_basis(StageRecord& rec);
  void do_infer(StageRecord& rec);
  void do_simulate_rom(StageRecord& rec);
  void do_diagnose(StageRecord& rec);

  FomData load_fom() const;
  SnapshotSet load_lifted_train(const FomData& fom) const;
  std::shared_ptr<const ReducedBasis> load_basis(Index r) const;
  TrainedROM load_rom(const FomData& fom, Method m, Index r) const;

  ExperimentConfig cfg_;
  RunOptions opts_;
  std::filesystem::path root_;
  RunManifest manifest_;
  std::vector<std::string> log_;
};

/// Joins the summary CSVs of several run directories into one error-vs-label
/// table: one row per (problem, dim_label, field), train/test columns per method.
std::string compare_runs(const std::vector<std::filesystem::path>& run_dirs);

}  // namespace spll
