#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spll/pde_bench.hpp"
#include "spll/rom.hpp"

namespace spll {

/// Config file problems (bad syntax, unknown keys, inconsistent values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Experiment definition. File format, one entry per line:
///   schema_version = 1
///   problem = ExpWave1D
///   r = 2, 3, 4, 5            # per-block reduced dimension (label 2r)
/// '#' starts a comment. Every key may be overridden by the environment
/// variable SPLL_<KEY> (upper case), e.g. SPLL_DT=0.01.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  Problem problem = Problem::ExpWave1D;
  Index grid_points = 0;  // points per axis; 0 = the benchmark's full grid
  double dt = 0.005;
  double t_train = 10.0;  // training window [0, t_train]; testing starts at t_train
  double t_end = 100.0;   // end of the test window
  std::vector<Index> r_sweep{2, 3, 4, 5};
  std::vector<Method> methods{Method::SpLiftLearn};
  double lambda = 0.0;
  double lambda_standard = 0.0;  // ridge for the standard Lift & Learn baseline only
  StepperKind stepper = StepperKind::Kahan;
  Index stride = 1;
  std::string output_dir = "runs/default";
  int timing_repeats = 20;
  std::uint64_t seed = 0;

  void validate() const;

  [[nodiscard]] Index steps(double t) const;  // t / dt, validated integral
  [[nodiscard]] Index train_samples() const { return steps(t_train) / stride + 1; }
  [[nodiscard]] Index total_samples() const { return steps(t_end) / stride + 1; }
  [[nodiscard]] Index r_max() const;
  [[nodiscard]] double sample_dt() const { return dt * static_cast<double>(stride); }

  /// Canonical key = value text (sorted keys, full precision).
  [[nodiscard]] std::string to_text() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment lookup.
std::optional<std::string> process_env(const std::string& name);

ExperimentConfig parse_config(const std::string& text, const EnvLookup& env = process_env);
ExperimentConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

/// Settings used for the published experiments. `desk` selects the reduced
/// 2D grids (sine-Gordon 50x50, KGZ 100x100).
ExperimentConfig preset(Problem problem, bool desk);

}  // namespace spll
