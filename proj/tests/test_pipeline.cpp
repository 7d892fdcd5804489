#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spll/pipeline.hpp"
#include "support.hpp"

using namespace spll;
using namespace spll::test;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spll_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.problem = Problem::ExpWave1D;
  c.dt = 0.005;
  c.t_train = 0.5;
  c.t_end = 0.6;
  c.r_sweep = {2, 3};
  c.methods = {Method::SpLiftLearn, Method::HOpInf};
  c.timing_repeats = 1;
  c.output_dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SPLL_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const EnvLookup no_env = [](const std::string&) { return std::optional<std::string>{}; };

}  // namespace

TEST_SUITE("io") {

TEST_CASE("container round trip") {
  std::mt19937_64 rng(71);
  const fs::path dir = scratch("io");
  const Matrix m = random_matrix(7, 3, rng);
  write_matrix(dir / "m.spll", m);
  CHECK(read_matrix(dir / "m.spll") == m);
  const Vector v = random_vector(5, rng);
  write_vector(dir / "v.spll", v);
  CHECK(read_vector(dir / "v.spll") == v);
  QuadraticTensor t(2, 3, 4);
  for (double& c : t.data()) c = std::normal_distribution<double>()(rng);
  write_tensor(dir / "t.spll", t);
  const QuadraticTensor back = read_tensor(dir / "t.spll");
  CHECK(back.data() == t.data());
  CHECK(back.left_dim() == 3);

  // header layout
  const std::string bytes = slurp(dir / "m.spll");
  CHECK(bytes.substr(0, 4) == "SPLL");
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + 2 * 8 + 21 * 8 + 4);
  // payload is row-major: the second double is m(0, 1)
  double second = 0.0;
  std::memcpy(&second, bytes.data() + 32 + 8, 8);
  CHECK(second == m(0, 1));
}

TEST_CASE("corrupt containers are rejected") {
  const fs::path dir = scratch("corrupt");
  write_matrix(dir / "m.spll", Matrix::Identity(3, 3));
  std::string bytes = slurp(dir / "m.spll");
  bytes[40] ^= 0x01;
  std::ofstream(dir / "bad.spll", std::ios::binary) << bytes;
  CHECK_THROWS_AS(read_matrix(dir / "bad.spll"), CorruptArtifact);
  std::ofstream(dir / "short.spll", std::ios::binary) << bytes.substr(0, 20);
  CHECK_THROWS_AS(read_matrix(dir / "short.spll"), CorruptArtifact);
  std::ofstream(dir / "magic.spll", std::ios::binary) << "NOPE" << bytes.substr(4);
  CHECK_THROWS_AS(read_matrix(dir / "magic.spll"), CorruptArtifact);
  CHECK_THROWS_AS(read_matrix(dir / "absent.spll"), CorruptArtifact);
}

TEST_CASE("checksums and number formatting") {
  CHECK(sha256_string("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(format_double(0.1) == "1.0000000000000001e-01");
  CHECK(std::stod(format_double(M_PI)) == M_PI);
}

}  // TEST_SUITE

TEST_SUITE("config") {

TEST_CASE("parse, print, parse again") {
  const std::string text =
      "schema_version = 1\n"
      "problem = SineGordon1D   # comment\n"
      "r = 2, 4\n"
      "methods = sp-liftlearn, standard-liftlearn\n"
      "dt = 0.005\nt_train = 1\nt_end = 2\n"
      "lambda_standard = 1e-6\n";
  const ExperimentConfig c = parse_config(text, no_env);
  CHECK(c.problem == Problem::SineGordon1D);
  CHECK(c.r_sweep == std::vector<Index>{2, 4});
  CHECK(c.lambda_standard == 1e-6);
  CHECK(parse_config(c.to_text(), no_env).to_text() == c.to_text());
}

TEST_CASE("environment overrides") {
  const EnvLookup env = [](const std::string& k) -> std::optional<std::string> {
    if (k == "SPLL_DT") return "0.01";
    if (k == "SPLL_R") return "3";
    return std::nullopt;
  };
  const ExperimentConfig c = parse_config("schema_version = 1\nproblem = ExpWave1D\n", env);
  CHECK(c.dt == 0.01);
  CHECK(c.r_sweep == std::vector<Index>{3});
}

TEST_CASE("invalid configs") {
  const std::string base = "schema_version = 1\nproblem = ExpWave1D\n";
  CHECK_THROWS_AS(parse_config(base + "dt = 0.003\nt_train = 10\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "colour = red\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "dt = fast\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "dt 0.1\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "lambda = -1\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config("schema_version = 2\nproblem = ExpWave1D\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config("schema_version = 1\nproblem = KGZ2D\nmethods = hopinf\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "r = 2\nr = 3\n", no_env), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "t_end = 5\nt_train = 10\n", no_env), ConfigError);
}

TEST_CASE("presets validate") {
  for (Problem p : kAllProblems) {
    for (bool desk : {true, false}) CHECK_NOTHROW(preset(p, desk).validate());
  }
  CHECK(preset(Problem::KGZ2D, true).grid_points == 100);
  CHECK(preset(Problem::SineGordon2D, true).grid_points == 50);
}

}  // TEST_SUITE

TEST_SUITE("pipeline") {

TEST_CASE("full run, then an idempotent re-run") {
  const fs::path out = scratch("idem");
  Pipeline first(tiny(out));
  first.run();
  CHECK(fs::exists(out / "diagnostics/summary.csv"));
  CHECK(fs::exists(out / "diagnostics/energy.csv"));
  const std::string manifest = slurp(out / "manifest.json");

  Pipeline again(tiny(out));
  again.run();
  for (const auto& line : again.log()) CHECK(line.find("cached") != std::string::npos);
  CHECK(slurp(out / "manifest.json") == manifest);

  // every artifact is listed with its checksum
  for (const auto& [name, rec] : again.manifest().stages) {
    for (const auto& [rel, sum] : rec.artifacts) CHECK(sha256_file(out / rel) == sum);
  }
  const std::string csv = slurp(out / "diagnostics/summary.csv");
  CHECK(csv.find("sp-liftlearn") != std::string::npos);
  CHECK(csv.find("hopinf") != std::string::npos);
}

TEST_CASE("stages refuse missing or altered inputs") {
  const fs::path out = scratch("missing");
  Pipeline p(tiny(out));
  p.run_stage(Stage::SimulateFom);
  p.run_stage(Stage::LiftSnapshots);
  try {
    p.run_stage(Stage::Infer);
    FAIL("expected MissingArtifact");
  } catch (const MissingArtifact& e) {
    CHECK(e.producer() == "build-basis");
  }
  p.run_stage(Stage::BuildBasis);
  fs::remove(out / "basis/phi.spll");
  try {
    p.run_stage(Stage::Infer);
    FAIL("expected MissingArtifact");
  } catch (const MissingArtifact& e) {
    CHECK(e.producer() == "build-basis");
  }
  p.run_stage(Stage::BuildBasis);
  p.run_stage(Stage::Infer);
  {
    std::ofstream(out / "basis/phi.spll", std::ios::app) << "x";
  }
  CHECK_THROWS_AS(p.run_stage(Stage::SimulateRom), ArtifactMismatch);
}

TEST_CASE("a config change invalidates downstream stages only") {
  const fs::path out = scratch("invalidate");
  Pipeline(tiny(out)).run();
  ExperimentConfig c = tiny(out);
  c.lambda = 1e-9;
  Pipeline p(c);
  p.run();
  const auto& log = p.log();
  REQUIRE(log.size() == 6);
  CHECK(log[0].find("cached") != std::string::npos);
  CHECK(log[2].find("cached") != std::string::npos);
  CHECK(log[3].find("cached") == std::string::npos);
}

TEST_CASE("worker count does not change the numbers") {
  const fs::path a = scratch("serial"), b = scratch("parallel");
  RunOptions one, two;
  two.workers = 2;
  Pipeline(tiny(a), one).run();
  Pipeline(tiny(b), two).run();
  for (const char* rel : {"infer/sp-liftlearn/r2/D.spll", "infer/hopinf/r3/D_p.spll", "rom/sp-liftlearn/r3/traj.spll",
                          "basis/phi.spll"}) {
    CAPTURE(rel);
    CHECK(sha256_file(a / rel) == sha256_file(b / rel));
  }
}

TEST_CASE("compare joins runs") {
  const fs::path out = scratch("compare");
  Pipeline(tiny(out)).run();
  const std::string csv = compare_runs({out});
  CHECK(csv.rfind("problem,dim_label,field,sp-liftlearn_train,sp-liftlearn_test,hopinf_train,hopinf_test", 0) == 0);
  CHECK_THROWS_AS(compare_runs({scratch("nothing")}), MissingArtifact);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("--config " + (dir / "absent.cfg").string()) == 2);
  {
    std::ofstream(dir / "bad.cfg") << "schema_version = 1\nproblem = ExpWave1D\ndt = 0.003\n";
  }
  CHECK(run_cli("--config " + (dir / "bad.cfg").string()) == 2);

  ExperimentConfig c = tiny(dir / "run");
  c.methods = {Method::SpLiftLearn};
  c.r_sweep = {2};
  {
    std::ofstream(dir / "ok.cfg") << c.to_text();
  }
  const std::string cfg = "--config " + (dir / "ok.cfg").string() + " -q";
  CHECK(run_cli("infer " + cfg) == 3);
  CHECK(run_cli(cfg) == 0);
  CHECK(run_cli("--stage diagnose " + cfg) == 0);
  {
    std::ofstream(dir / "run/rom/sp-liftlearn/r2/traj.spll", std::ios::app) << "x";
  }
  CHECK(run_cli("diagnose " + cfg) == 4);
  CHECK(run_cli("preset KGZ2D") == 0);
}

}  // TEST_SUITE
