// Command-line driver for the Lift & Learn experiment pipeline.
//
//   spll_cli --config exp.cfg                 all stages (cached ones skipped)
//   spll_cli --config exp.cfg --stage infer   one stage from persisted inputs
//   spll_cli infer --config exp.cfg           same, as a subcommand
//   spll_cli compare runs/a runs/b -o cmp.csv
//   spll_cli preset SineGordon2D --desk > sg2d.cfg
//
// Exit codes: 0 success, 2 validation, 3 stage failure, 4 artifact mismatch.

#include <CLI11.hpp>
#include <iostream>

#include "spll/pipeline.hpp"

namespace {

constexpr int kValidation = 2;
constexpr int kStageFailure = 3;
constexpr int kMismatch = 4;

struct Common {
  std::string config;
  std::string output;
  std::string stage;
  int workers = 1;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config,-c", c.config, "experiment config file");
  app->add_option("--output,-o", c.output, "output directory (overrides output_dir)");
  app->add_option("--workers,-j", c.workers, "concurrent (method, r) runs")->check(CLI::PositiveNumber);
  app->add_flag("--force", c.force, "ignore cached stage outputs");
  app->add_flag("--quiet,-q", c.quiet, "no progress output");
}

int run(const Common& c, std::optional<spll::Stage> stage) {
  if (c.config.empty()) {
    std::cerr << "error: --config is required\n";
    return kValidation;
  }
  spll::ExperimentConfig cfg = spll::load_config(c.config);
  if (!c.output.empty()) cfg.output_dir = c.output;
  spll::RunOptions opts;
  opts.force = c.force;
  opts.workers = c.workers;
  spll::Pipeline pipeline(cfg, opts);
  if (stage) {
    pipeline.run_stage(*stage);
  } else {
    pipeline.run();
  }
  if (!c.quiet) {
    for (const auto& line : pipeline.log()) std::cerr << line << '\n';
    std::cerr << "manifest: " << (pipeline.root() / "manifest.json").string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving Lift & Learn experiment pipeline"};
  app.require_subcommand(0, 1);
  Common common;
  add_common(&app, common);
  app.add_option("--stage", common.stage, "run a single stage")
      ->check(CLI::IsMember({"simulate-fom", "lift-snapshots", "build-basis", "infer", "simulate-rom", "diagnose"}));

  std::vector<std::pair<CLI::App*, spll::Stage>> stage_cmds;
  std::vector<Common> stage_opts(spll::all_stages().size());
  for (size_t i = 0; i < spll::all_stages().size(); ++i) {
    const spll::Stage s = spll::all_stages()[i];
    auto* sub = app.add_subcommand(std::string(spll::to_string(s)), "run the " + std::string(spll::to_string(s)) + " stage");
    add_common(sub, stage_opts[i]);
    stage_cmds.emplace_back(sub, s);
  }

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "join method runs into one error-vs-dimension table");
  compare->add_option("runs", compare_dirs, "run output directories")->required();
  compare->add_option("--out", compare_out, "CSV path (default stdout)");

  std::string preset_problem;
  bool preset_full = false;
  auto* preset = app.add_subcommand("preset", "print a preset config");
  preset->add_option("problem", preset_problem, "ExpWave1D | SineGordon1D | SineGordon2D | KGZ2D")->required();
  preset->add_flag("--full", preset_full, "full grids instead of the desk presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kValidation;
  }

  try {
    for (size_t i = 0; i < stage_cmds.size(); ++i) {
      if (stage_cmds[i].first->parsed()) return run(stage_opts[i], stage_cmds[i].second);
    }
    if (compare->parsed()) {
      std::vector<std::filesystem::path> dirs(compare_dirs.begin(), compare_dirs.end());
      const std::string csv = spll::compare_runs(dirs);
      if (compare_out.empty()) {
        std::cout << csv;
      } else {
        spll::write_text_atomic(compare_out, csv);
      }
      return 0;
    }
    if (preset->parsed()) {
      std::cout << spll::preset(spll::parse_problem(preset_problem), !preset_full).to_text();
      return 0;
    }
    std::optional<spll::Stage> stage;
    if (!common.stage.empty()) stage = spll::parse_stage(common.stage);
    return run(common, stage);
  } catch (const spll::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidation;
  } catch (const spll::ArtifactMismatch& e) {
    std::cerr << "artifact mismatch: " << e.what() << '\n';
    return kMismatch;
  } catch (const spll::CorruptArtifact& e) {
    std::cerr << "artifact mismatch: " << e.what() << '\n';
    return kMismatch;
  } catch (const spll::MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageFailure;
  } catch (const spll::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageFailure;
  } catch (const spll::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageFailure;
  }
}
