#include "spll/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "spll/io.hpp"

namespace spll {

namespace {

std::string trim(std::string_view s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

template <class F>
auto rethrow_as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "schema_version", "problem", "grid_points", "dt",     "t_train",        "t_end", "r",
      "methods",        "lambda",  "lambda_standard", "stepper", "stride", "output_dir", "timing_repeats", "seed"};
  return keys;
}

void apply(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (key == "schema_version") {
    c.schema_version = static_cast<int>(parse_int(key, v));
  } else if (key == "problem") {
    c.problem = rethrow_as_config(key, [&] { return parse_problem(v); });
  } else if (key == "grid_points") {
    c.grid_points = parse_int(key, v);
  } else if (key == "dt") {
    c.dt = parse_double(key, v);
  } else if (key == "t_train") {
    c.t_train = parse_double(key, v);
  } else if (key == "t_end") {
    c.t_end = parse_double(key, v);
  } else if (key == "r") {
    c.r_sweep.clear();
    for (const auto& item : split_list(v)) c.r_sweep.push_back(parse_int(key, item));
  } else if (key == "methods") {
    c.methods.clear();
    for (const auto& item : split_list(v)) {
      c.methods.push_back(rethrow_as_config(key, [&] { return parse_method(item); }));
    }
  } else if (key == "lambda") {
    c.lambda = parse_double(key, v);
  } else if (key == "lambda_standard") {
    c.lambda_standard = parse_double(key, v);
  } else if (key == "stepper") {
    c.stepper = rethrow_as_config(key, [&] { return parse_stepper(v); });
  } else if (key == "stride") {
    c.stride = parse_int(key, v);
  } else if (key == "output_dir") {
    c.output_dir = v;
  } else if (key == "timing_repeats") {
    c.timing_repeats = static_cast<int>(parse_int(key, v));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(parse_int(key, v));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string env_name(const std::string& key) {
  std::string out = "SPLL_";
  for (char ch : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  return out;
}

}  // namespace

Index ExperimentConfig::steps(double t) const {
  const double ratio = t / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("time " + format_double(t) + " is not an integer multiple of dt = " + format_double(dt));
  }
  return static_cast<Index>(rounded);
}

Index ExperimentConfig::r_max() const { return *std::max_element(r_sweep.begin(), r_sweep.end()); }

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(t_train > 0.0)) throw ConfigError("t_train must be positive");
  if (t_end < t_train) throw ConfigError("t_end must not precede t_train (testing starts at t_train)");
  const Index n_train = steps(t_train);
  const Index n_end = steps(t_end);
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (n_train % stride != 0 || n_end % stride != 0) {
    throw ConfigError("t_train/dt and t_end/dt must be multiples of the snapshot stride");
  }
  if (n_train / stride + 1 < 9) throw ConfigError("training window needs at least 9 snapshots");
  if (r_sweep.empty()) throw ConfigError("r sweep must be nonempty");
  for (Index r : r_sweep) {
    if (r < 1) throw ConfigError("every r in the sweep must be >= 1");
  }
  if (methods.empty()) throw ConfigError("method list must be nonempty");
  for (Method m : methods) {
    if (m == Method::HOpInf && !is_canonical(problem)) {
      throw ConfigError("hopinf is not applicable to " + std::string(to_string(problem)) +
                        " (no canonical Hamiltonian form)");
    }
  }
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(lambda_standard >= 0.0)) throw ConfigError("lambda_standard must be nonnegative");
  if (grid_points < 0) throw ConfigError("grid_points must be >= 0");
  if (timing_repeats < 1) throw ConfigError("timing_repeats must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
  rethrow_as_config("grid_points", [&] {
    default_grid(problem, grid_points).validate();
    return 0;
  });
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  auto join = [](const auto& items, auto fmt) {
    std::string s;
    for (size_t i = 0; i < items.size(); ++i) s += (i ? ", " : "") + fmt(items[i]);
    return s;
  };
  os << "schema_version = " << schema_version << '\n'
     << "problem = " << to_string(problem) << '\n'
     << "grid_points = " << grid_points << '\n'
     << "dt = " << format_double(dt) << '\n'
     << "t_train = " << format_double(t_train) << '\n'
     << "t_end = " << format_double(t_end) << '\n'
     << "r = " << join(r_sweep, [](Index r) { return std::to_string(r); }) << '\n'
     << "methods = " << join(methods, [](Method m) { return std::string(to_string(m)); }) << '\n'
     << "lambda = " << format_double(lambda) << '\n'
     << "lambda_standard = " << format_double(lambda_standard) << '\n'
     << "stepper = " << to_string(stepper) << '\n'
     << "stride = " << stride << '\n'
     << "output_dir = " << output_dir << '\n'
     << "timing_repeats = " << timing_repeats << '\n'
     << "seed = " << seed << '\n';
  return os.str();
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

ExperimentConfig parse_config(const std::string& text, const EnvLookup& env) {
  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown config key '" + key + "'");
    }
    if (entries.count(key) != 0) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    entries[key] = trim(std::string_view(line).substr(eq + 1));
  }
  if (env) {
    for (const auto& key : known_keys()) {
      if (auto v = env(env_name(key))) entries[key] = trim(*v);
    }
  }
  if (entries.count("schema_version") == 0) throw ConfigError("missing schema_version");
  if (entries.count("problem") == 0) throw ConfigError("missing problem");

  // problem first so the preset supplies defaults for everything else
  const Problem problem = rethrow_as_config("problem", [&] { return parse_problem(entries["problem"]); });
  ExperimentConfig c = preset(problem, true);
  for (const auto& [key, value] : entries) apply(c, key, value);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), env);
}

ExperimentConfig preset(Problem problem, bool desk) {
  ExperimentConfig c;
  c.problem = problem;
  switch (problem) {
    case Problem::ExpWave1D:
      c.dt = 0.005;
      c.t_train = 10.0;
      c.t_end = 100.0;
      c.r_sweep = {2, 3, 4, 5};
      c.methods = {Method::SpLiftLearn, Method::HOpInf, Method::IntrusiveLifting};
      c.output_dir = "runs/expwave1d";
      break;
    case Problem::SineGordon1D:
      c.dt = 0.005;
      c.t_train = 10.0;
      c.t_end = 30.0;
      c.r_sweep = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      c.methods = {Method::SpLiftLearn, Method::HOpInf, Method::StandardLiftLearn};
      // Unregularized, the standard fit is numerically singular and its ROM
      // diverges within the training window.
      c.lambda_standard = 1e-6;
      c.stepper = StepperKind::Midpoint;
      c.output_dir = "runs/sinegordon1d";
      break;
    case Problem::SineGordon2D:
      c.grid_points = desk ? 50 : 100;
      c.dt = 0.01;
      c.t_train = 10.0;
      c.t_end = 12.5;
      c.r_sweep = {2, 4, 6, 8, 10};
      c.methods = {Method::SpLiftLearn, Method::HOpInf, Method::IntrusiveLifting};
      c.output_dir = desk ? "runs/sinegordon2d-desk" : "runs/sinegordon2d";
      break;
    case Problem::KGZ2D:
      c.grid_points = desk ? 100 : 400;
      c.dt = 0.01;
      c.t_train = 4.0;
      c.t_end = 5.0;
      c.r_sweep = {5, 10, 15, 20};
      c.methods = {Method::SpLiftLearn, Method::IntrusiveLifting};
      // the trailing POD modes are barely excited over [0, 4] (Gram condition
      // ~1e-14 at r = 20), so the symmetric fits need a small ridge
      c.lambda = 1e-6;
      c.output_dir = desk ? "runs/kgz2d-desk" : "runs/kgz2d";
      break;
  }
  return c;
}

}  // namespace spll
