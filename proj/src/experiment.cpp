#include "skewflow/experiment.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "skewflow/core.hpp"
#include "skewflow/driver.hpp"
#include "skewflow/errors.hpp"
#include "skewflow/io.hpp"
#include "skewflow/partition.hpp"
#include "skewflow/paths.hpp"
#include "skewflow/pipeflow.hpp"
#include "skewflow/stats.hpp"
#include "skewflow/stepskew.hpp"

namespace skewflow {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(label() + " must be an object");
  }

  void count(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!natural(*v)) throw type_error(key, "a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }
  void bits(const char* key, unsigned& out) {
    std::size_t value = out;
    count(key, value);
    if (value > 64) throw ConfigError(name(key) + " is too large");
    out = static_cast<unsigned>(value);
  }
  void word(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!natural(*v)) throw type_error(key, "an unsigned 64-bit integer");
      out = v->get<std::uint64_t>();
    }
  }
  void real(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
    }
  }
  void real(const char* key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) return;
      if (!v->is_number()) throw type_error(key, "a number or null");
      out = v->get<double>();
    }
  }
  void count(const char* key, std::optional<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) return;
      if (!natural(*v)) throw type_error(key, "a nonnegative integer or null");
      out = v->get<std::size_t>();
    }
  }
  void flag(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw type_error(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void text(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw type_error(key, "a string");
      out = v->get<std::string>();
    }
  }
  void reals(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw type_error(key, "an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) throw type_error(key, "an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  void table(const char* key, std::map<std::string, double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_object()) throw type_error(key, "an object of numbers");
      out.clear();
      for (const auto& [k, x] : v->items()) {
        if (!x.is_number()) throw type_error(key, "an object of numbers");
        out[k] = x.get<double>();
      }
    }
  }
  /// Nested section, or nullopt when absent.
  std::optional<Section> child(const char* key) {
    if (const json* v = find(key)) return Section(*v, name(key));
    return std::nullopt;
  }
  void finish() const {
    for (const auto& item : object_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key " + name(item.key().c_str()));
  }

 private:
  // Parsed text stores positive integers as unsigned, built documents as signed.
  static bool natural(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  }
  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }
  std::string label() const { return path_.empty() ? "config" : path_; }
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  ConfigError type_error(const char* key, const char* expected) const {
    return ConfigError(name(key) + " must be " + expected);
  }

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Output directory plus the file list that goes into the manifest.
class Bundle {
 public:
  explicit Bundle(fs::path dir) : dir_(std::move(dir)) {}

  void text(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path path = dir_ / name;
    {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      body(out);
      if (!out) throw std::runtime_error("write failed for " + path.string());
    }
    files_.push_back({{"path", name},
                      {"bytes", fs::file_size(path)},
                      {"sha256", sha256_file(path.string())}});
  }
  void document(const std::string& name, const json& value) {
    text(name, [&](std::ostream& out) { out << value.dump(2) << '\n'; });
  }
  const json& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  json files_ = json::array();
};

// Named pass/fail record attached to a stage report.
json check(const std::string& name, double value, double limit, bool passed) {
  return {{"name", name}, {"value", value}, {"limit", limit}, {"passed", passed}};
}

bool all_checks_pass(const json& report) {
  if (!report.contains("checks")) return true;
  for (const auto& c : report["checks"])
    if (!c["passed"].get<bool>()) return false;
  return true;
}

PipeFlowParams pipeflow_params(const DriverConfig& d) {
  PipeFlowParams p;
  p.block_bits = d.block_bits;
  p.ceiling = d.ceiling;
  p.window = d.window;
  p.speed = d.speed;
  p.attraction = d.attraction;
  p.tape_seed = d.tape_seed;
  return p;
}

template <typename Rows>
Eigen::MatrixXd leading_columns(const Rows& points, std::size_t count) {
  const auto n = std::min<Eigen::Index>(points.cols(), static_cast<Eigen::Index>(count));
  return points.leftCols(n);
}

// Seeds of the independent random streams used by the stages.
enum StreamId : std::uint64_t {
  orbit_stream = 1,
  stepskew_paths_stream,
  stationary_stream,
  match_stream,
  pipeflow_stream,
  battery_stream = 16,
};

struct Pipeline {
  Pipeline(const ExperimentConfig& c, unsigned j, Bundle& b) : config(c), jobs(j), bundle(b) {}

  const ExperimentConfig& config;
  unsigned jobs;
  Bundle& bundle;

  MapSystem system;
  Trajectory trajectory;
  BoxPartition partition;
  TransitionMatrix transition;
  Eigen::MatrixXd cloud;
  std::optional<StepSkewProcess> process;
  std::vector<PathSample> stepskew_paths;
  std::optional<NetworkSpec> network;
  std::vector<PathSample> pipeflow_paths;

  std::uint64_t stream(StreamId id) const { return derive_seed(config.seed, id); }

  json run_partition() {
    system = make_system(config.system, config.system_params);
    trajectory = attractor_orbit(system, config.orbit_length, stream(orbit_stream));
    // The final point only arrives; it must land in a cell built from departures.
    for (;;) {
      const Eigen::Index n = trajectory.points.cols();
      if (n < 2) throw PreconditionError("orbit too short for a transition estimate");
      partition = build_box_partition(system, trajectory.points.leftCols(n - 1), config.mesh);
      if (partition.locate(trajectory.points.col(n - 1))) break;
      trajectory.points = trajectory.points.leftCols(n - 1).eval();
    }
    transition = estimate_transition_matrix(trajectory, partition);
    cloud = leading_columns(trajectory.points.leftCols(trajectory.points.cols() - 1),
                            config.cloud_size);

    bundle.document("partition.json", io::partition_json(partition));
    bundle.text("transition.csv", [&](std::ostream& out) { io::write_transition_csv(out, transition); });

    const Eigen::VectorXd column_sums = transition.probabilities.colwise().sum().transpose();
    const double stochastic_error = (column_sums.array() - 1.0).abs().maxCoeff();
    json stationary = json::array();
    const Eigen::VectorXd pi = stationary_distribution(transition);
    for (Eigen::Index i = 0; i < pi.size(); ++i) stationary.push_back(pi[i]);
    return {{"system", system.name},
            {"cells", partition.size()},
            {"mesh", partition.mesh()},
            {"orbit_points", trajectory.size()},
            {"cloud_points", cloud.cols()},
            {"stationary", stationary},
            {"checks", {check("column_sum_error", stochastic_error, 1e-12, stochastic_error <= 1e-12)}}};
  }

  json run_stepskew() {
    process.emplace(system, partition, transition, cloud);
    const auto& s = config.stepskew;
    stepskew_paths = sample_step_skew_paths(*process, s.trials, s.steps, stream(stepskew_paths_stream), jobs);
    const StationaryEstimate stationary =
        estimate_stationary(*process, s.burn, s.samples, stream(stationary_stream));
    const MatchFraction match = exact_match_fraction(*process, s.steps, s.trials, stream(match_stream), jobs);

    std::size_t confinement_violations = 0;
    for (const auto& path : stepskew_paths)
      for (std::size_t n = 0; n < path.length(); ++n)
        confinement_violations += partition.cell(path.cells[n]).contains(path.points[n], 1e-12) ? 0 : 1;

    bundle.text("stepskew_paths.csv", [&](std::ostream& out) {
      io::write_paths_csv(out, std::vector<PathSample>(
                                   stepskew_paths.begin(),
                                   stepskew_paths.begin() +
                                       static_cast<std::ptrdiff_t>(std::min(s.export_paths, stepskew_paths.size()))));
    });

    const double sigma = binomial_sigma(match.oracle, static_cast<double>(match.trials));
    json checks = json::array();
    checks.push_back(check("range_confinement_violations", static_cast<double>(confinement_violations), 0.0,
                           confinement_violations == 0));
    if (config.checks.support_bounds) {
      const double delta = partition.mesh();
      checks.push_back(check("sample_to_cloud", stationary.sample_to_cloud, delta,
                             stationary.sample_to_cloud <= delta));
      checks.push_back(check("cloud_to_sample", stationary.cloud_to_sample, 2.0 * delta,
                             stationary.cloud_to_sample <= 2.0 * delta));
    }
    json report = {{"paths", stepskew_paths.size()},
                   {"steps", s.steps},
                   {"stationary", io::stationary_json(stationary)},
                   {"exact_match", {{"fraction", match.fraction},
                                    {"oracle", match.oracle},
                                    {"sigma", sigma},
                                    {"trials", match.trials}}},
                   {"checks", checks}};
    bundle.document("stepskew.json", report);
    return report;
  }

  json run_network() {
    network = build_network(transition, model_fiber_maps(system, partition), system.dimension,
                            pipeflow_params(config.driver));
    bundle.document("network.json", io::network_json(*network));
    double worst_quota = 0.0;
    for (const auto& j : network->junctions) worst_quota = std::max(worst_quota, j.readout.quota_error());
    const double bound = std::ldexp(1.0, -static_cast<int>(config.driver.block_bits));
    return {{"junctions", network->junctions.size()},
            {"pipes", network->pipes.size()},
            {"checks", {check("quota_error", worst_quota, bound, worst_quota <= bound)}}};
  }

  json run_pipeflow() {
    const auto& p = config.pipeflow;
    pipeflow_paths = sample_pipeflow_paths(*network, partition, cloud, p.orbits, p.steps,
                                           stream(pipeflow_stream), jobs);
    std::vector<Time3Orbit> exported;
    for (std::size_t t = 0; t < std::min(p.export_orbits, p.orbits); ++t) {
      const PipeFlowStart start =
          pipeflow_start(*network, partition, cloud, derive_seed(stream(pipeflow_stream), t));
      exported.push_back(run_time3_orbit(*network, start.driver, start.cell, start.fiber, p.steps));
    }
    bundle.text("orbits.csv", [&](std::ostream& out) { io::write_orbits_csv(out, exported); });

    std::size_t truncated = 0;
    std::size_t switches = 0;
    for (const auto& path : pipeflow_paths) {
      truncated += path.truncated ? 1 : 0;
      switches += path.length() - 1 + (path.truncated ? 1 : 0);
    }
    const double indeterminate =
        switches == 0 ? 0.0 : static_cast<double>(truncated) / static_cast<double>(switches);
    json report = {{"orbits", pipeflow_paths.size()},
                   {"steps", p.steps},
                   {"switches", switches},
                   {"indeterminate", truncated},
                   {"checks", {check("indeterminate_fraction", indeterminate,
                                     config.checks.max_indeterminate_fraction,
                                     indeterminate <= config.checks.max_indeterminate_fraction)}}};
    bundle.document("pipeflow.json", report);
    return report;
  }

  json run_compare() {
    const std::size_t len = config.compare.max_len;
    const LawComparison pipe = law_comparison(pipeflow_paths, transition, len);
    const LawComparison skew = law_comparison(stepskew_paths, transition, len);
    bundle.text("pipeflow_cylinders.csv", [&](std::ostream& out) { io::write_cylinders_csv(out, pipe); });
    bundle.text("stepskew_cylinders.csv", [&](std::ostream& out) { io::write_cylinders_csv(out, skew); });
    const double limit = config.checks.max_law_deviation;
    json report = {{"max_len", len},
                   {"pipeflow", {{"max_deviation", pipe.max_deviation},
                                 {"cylinders", pipe.rows.size()},
                                 {"anomalous_words", pipe.anomalous_words},
                                 {"anomalous_paths", pipe.anomalous_paths}}},
                   {"stepskew", {{"max_deviation", skew.max_deviation},
                                 {"cylinders", skew.rows.size()}}},
                   {"checks", {check("pipeflow_law_deviation", pipe.max_deviation, limit, pipe.max_deviation <= limit),
                               check("stepskew_law_deviation", skew.max_deviation, limit, skew.max_deviation <= limit)}}};
    bundle.document("compare.json", report);
    return report;
  }

  json run_shadowing() {
    const double tolerance = config.shadow_tolerance();
    const std::size_t steps = config.shadow_steps();
    const ShadowingReport shadow = shadowing_fraction(pipeflow_paths, *process, tolerance, steps);
    const double sigma = binomial_sigma(shadow.oracle, static_cast<double>(shadow.orbits));
    const double floor = shadow.oracle - 3.0 * sigma;
    json report = {{"tolerance", tolerance},
                   {"steps", steps},
                   {"fraction", shadow.fraction},
                   {"oracle", shadow.oracle},
                   {"sigma", sigma},
                   {"orbits", shadow.orbits},
                   {"shadowed", shadow.shadowed},
                   {"truncated", shadow.truncated},
                   {"checks", {check("fraction_at_least_clamp_free_mass", shadow.fraction, floor,
                                     shadow.fraction >= floor)}}};
    bundle.document("shadowing.json", report);
    return report;
  }
};

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

ExperimentResult finish(const ExperimentConfig& config, Bundle& bundle, json stages,
                        std::optional<std::string> failure, const std::string& command) {
  ExperimentResult result;
  bool passed = !failure.has_value();
  for (const auto& stage : stages) passed = passed && all_checks_pass(stage["report"]);
  result.passed = passed;
  result.failure = failure;
  result.manifest = {{"command", command},
                     {"config", config_json(config)},
                     {"stages", stages},
                     {"files", bundle.files()},
                     {"status", failure ? "failed" : "completed"},
                     {"partial", failure.has_value()},
                     {"passed", passed}};
  if (failure) result.manifest["error"] = *failure;
  const fs::path path = bundle.dir() / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  out << result.manifest.dump(2) << '\n';
  return result;
}

}  // namespace

ExperimentConfig parse_config(const json& document) {
  ExperimentConfig c;
  Section root(document, "");
  if (auto s = root.child("system")) {
    s->text("name", c.system);
    s->table("params", c.system_params);
    s->finish();
  }
  root.real("mesh", c.mesh);
  root.count("orbit_length", c.orbit_length);
  root.count("cloud_size", c.cloud_size);
  if (auto s = root.child("stepskew")) {
    s->count("trials", c.stepskew.trials);
    s->count("steps", c.stepskew.steps);
    s->count("burn", c.stepskew.burn);
    s->count("samples", c.stepskew.samples);
    s->count("export_paths", c.stepskew.export_paths);
    s->finish();
  }
  if (auto s = root.child("driver")) {
    s->bits("block_bits", c.driver.block_bits);
    s->real("ceiling", c.driver.ceiling);
    s->real("window", c.driver.window);
    s->real("speed", c.driver.speed);
    s->real("attraction", c.driver.attraction);
    s->word("tape_seed", c.driver.tape_seed);
    s->reals("test_beta", c.driver.test_beta);
    s->count("test_trials", c.driver.test_trials);
    s->count("export_labels", c.driver.export_labels);
    s->finish();
  }
  if (auto s = root.child("pipeflow")) {
    s->count("orbits", c.pipeflow.orbits);
    s->count("steps", c.pipeflow.steps);
    s->count("export_orbits", c.pipeflow.export_orbits);
    s->finish();
  }
  if (auto s = root.child("compare")) {
    s->count("max_len", c.compare.max_len);
    s->real("shadow_tolerance", c.compare.shadow_tolerance);
    s->count("shadow_steps", c.compare.shadow_steps);
    s->finish();
  }
  if (auto s = root.child("checks")) {
    s->real("max_law_deviation", c.checks.max_law_deviation);
    s->real("max_indeterminate_fraction", c.checks.max_indeterminate_fraction);
    s->flag("support_bounds", c.checks.support_bounds);
    s->finish();
  }
  root.word("seed", c.seed);
  root.text("output_dir", c.output_dir);
  root.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json document;
  try {
    in >> document;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(document);
}

void validate_config(const ExperimentConfig& c) {
  make_system(c.system, c.system_params);
  require(c.mesh > 0.0 && std::isfinite(c.mesh), "mesh must be positive");
  require(c.orbit_length >= 2, "orbit_length must be at least 2");
  require(c.cloud_size >= 1, "cloud_size must be positive");
  require(c.stepskew.trials >= 1, "stepskew.trials must be positive");
  require(c.stepskew.steps >= 1, "stepskew.steps must be positive");
  require(c.stepskew.samples >= 1, "stepskew.samples must be positive");
  require(c.driver.block_bits >= 1 && c.driver.block_bits <= 32, "driver.block_bits must be in [1, 32]");
  require(c.driver.ceiling > 0.0 && std::isfinite(c.driver.ceiling), "driver.ceiling must be positive");
  require(c.driver.window > 0.0 && c.driver.window < 1.0, "driver.window must lie in (0, 1)");
  require(c.driver.speed > 0.0 && std::isfinite(c.driver.speed), "driver.speed must be positive");
  require(c.driver.attraction >= 0.0 && std::isfinite(c.driver.attraction), "driver.attraction must be >= 0");
  require(!c.driver.test_beta.empty(), "driver.test_beta must be nonempty");
  double beta_sum = 0.0;
  for (double b : c.driver.test_beta) {
    require(b >= 0.0, "driver.test_beta entries must be >= 0");
    beta_sum += b;
  }
  require(std::abs(beta_sum - 1.0) <= 1e-12, "driver.test_beta must sum to 1");
  require(c.driver.test_beta.size() <= (std::size_t{1} << c.driver.block_bits),
          "driver.test_beta has more entries than block symbols");
  require(c.driver.test_trials >= 1, "driver.test_trials must be positive");
  require(c.pipeflow.orbits >= 1, "pipeflow.orbits must be positive");
  require(c.pipeflow.steps >= 1, "pipeflow.steps must be positive");
  require(c.compare.max_len >= 1, "compare.max_len must be positive");
  require(c.compare.max_len <= c.pipeflow.steps + 1 && c.compare.max_len <= c.stepskew.steps + 1,
          "compare.max_len exceeds the sampled path length");
  require(c.shadow_tolerance() > 0.0, "compare.shadow_tolerance must be positive");
  require(c.shadow_steps() >= 1 && c.shadow_steps() <= c.pipeflow.steps,
          "compare.shadow_steps must be in [1, pipeflow.steps]");
  require(c.checks.max_law_deviation >= 0.0, "checks.max_law_deviation must be >= 0");
  require(c.checks.max_indeterminate_fraction >= 0.0, "checks.max_indeterminate_fraction must be >= 0");
  require(!c.output_dir.empty(), "output_dir must be nonempty");
}

json config_json(const ExperimentConfig& c) {
  json params = json::object();
  for (const auto& [k, v] : c.system_params) params[k] = v;
  return {{"system", {{"name", c.system}, {"params", params}}},
          {"mesh", c.mesh},
          {"orbit_length", c.orbit_length},
          {"cloud_size", c.cloud_size},
          {"stepskew", {{"trials", c.stepskew.trials},
                        {"steps", c.stepskew.steps},
                        {"burn", c.stepskew.burn},
                        {"samples", c.stepskew.samples},
                        {"export_paths", c.stepskew.export_paths}}},
          {"driver", {{"block_bits", c.driver.block_bits},
                      {"ceiling", c.driver.ceiling},
                      {"window", c.driver.window},
                      {"speed", c.driver.speed},
                      {"attraction", c.driver.attraction},
                      {"tape_seed", c.driver.tape_seed},
                      {"test_beta", c.driver.test_beta},
                      {"test_trials", c.driver.test_trials},
                      {"export_labels", c.driver.export_labels}}},
          {"pipeflow", {{"orbits", c.pipeflow.orbits},
                        {"steps", c.pipeflow.steps},
                        {"export_orbits", c.pipeflow.export_orbits}}},
          {"compare", {{"max_len", c.compare.max_len},
                       {"shadow_tolerance", c.shadow_tolerance()},
                       {"shadow_steps", c.shadow_steps()}}},
          {"checks", {{"max_law_deviation", c.checks.max_law_deviation},
                      {"max_indeterminate_fraction", c.checks.max_indeterminate_fraction},
                      {"support_bounds", c.checks.support_bounds}}},
          {"seed", c.seed},
          {"output_dir", c.output_dir}};
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::partition: return "partition";
    case Stage::stepskew: return "stepskew";
    case Stage::network: return "network";
    case Stage::pipeflow: return "pipeflow";
    case Stage::compare: return "compare";
    case Stage::shadowing: return "shadowing";
  }
  return "unknown";
}

ExperimentResult run_experiment(const ExperimentConfig& config, Stage last, unsigned jobs) {
  validate_config(config);
  prepare_dir(config.output_dir);
  Bundle bundle(config.output_dir);
  Pipeline pipeline(config, std::max(1u, jobs), bundle);

  const std::vector<std::pair<Stage, std::function<json()>>> stages{
      {Stage::partition, [&] { return pipeline.run_partition(); }},
      {Stage::stepskew, [&] { return pipeline.run_stepskew(); }},
      {Stage::network, [&] { return pipeline.run_network(); }},
      {Stage::pipeflow, [&] { return pipeline.run_pipeflow(); }},
      {Stage::compare, [&] { return pipeline.run_compare(); }},
      {Stage::shadowing, [&] { return pipeline.run_shadowing(); }},
  };
  json reports = json::array();
  std::optional<std::string> failure;
  for (const auto& [stage, body] : stages) {
    try {
      json report = body();
      reports.push_back({{"stage", to_string(stage)}, {"passed", all_checks_pass(report)}, {"report", report}});
    } catch (const std::exception& e) {
      failure = to_string(stage) + ": " + e.what();
      reports.push_back({{"stage", to_string(stage)}, {"passed", false}, {"report", {{"error", e.what()}}}});
      break;
    }
    if (stage == last) break;
  }
  return finish(config, bundle, reports, failure, to_string(last));
}

ExperimentResult run_driver_battery(const ExperimentConfig& config, unsigned /*jobs*/) {
  validate_config(config);
  prepare_dir(config.output_dir);
  Bundle bundle(config.output_dir);
  json reports = json::array();
  std::optional<std::string> failure;
  try {
    const auto& d = config.driver;
    const SuspensionDriver driver(d.block_bits, d.ceiling, d.tape_seed);
    const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(
        d.test_beta.data(), static_cast<Eigen::Index>(d.test_beta.size()));
    const SectorReadout readout = assign_groups(beta, d.block_bits);
    const std::size_t k = readout.branches;
    const auto trials = static_cast<double>(d.test_trials);
    const double block_span = d.ceiling * static_cast<double>(d.block_bits);
    const std::uint64_t base = derive_seed(config.seed, battery_stream);
    json checks = json::array();

    const double quota_bound = std::ldexp(1.0, -static_cast<int>(d.block_bits));
    checks.push_back(check("quota_error", readout.quota_error(), quota_bound,
                           readout.quota_error() <= quota_bound));

    const SeparatedEventsReport separated =
        separated_events_test(driver, readout, block_span, 2, d.test_trials, derive_seed(base, 0));
    double separated_sigma = 0.0;
    for (double p : separated.product) separated_sigma = std::max(separated_sigma, binomial_sigma(p, trials));
    checks.push_back(check("separated_pair_deviation", separated.max_deviation, 3.0 * separated_sigma,
                           separated.max_deviation <= 3.0 * separated_sigma));

    Eigen::MatrixXd table(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t w = 0; w < k * k; ++w)
      table(static_cast<Eigen::Index>(w / k), static_cast<Eigen::Index>(w % k)) = separated.empirical[w] * trials;
    const IndependenceTest independence = independence_test(table.array().round().matrix());
    checks.push_back(check("pair_chi_squared", independence.statistic, independence.quantile,
                           independence.passed()));

    const std::uint64_t half = driver.alphabet_size() / 2;
    const BlockEvent low{[half](std::uint64_t s) { return s < half; }};
    const BlockEvent odd{[](std::uint64_t s) { return (s & 1U) == 1U; }};
    const BlockEvent third{[](std::uint64_t s) { return s % 3 == 0; }};
    const JointEventEstimate same = correlation_estimate(driver, low, low, 0.0, d.test_trials, derive_seed(base, 1));
    const JointEventEstimate lagged =
        correlation_estimate(driver, low, odd, block_span, d.test_trials, derive_seed(base, 2));
    const JointEventEstimate triple = joint_event_estimate(
        driver, {low, odd, third}, {0.0, block_span, 2.0 * block_span}, d.test_trials, derive_seed(base, 3));
    checks.push_back(check("lagged_correlation", std::abs(lagged.joint - lagged.product), 3.0 * lagged.sigma(),
                           std::abs(lagged.joint - lagged.product) <= 3.0 * lagged.sigma()));
    checks.push_back(check("triple_joint", std::abs(triple.joint - triple.product), 3.0 * triple.sigma(),
                           std::abs(triple.joint - triple.product) <= 3.0 * triple.sigma()));

    // Sector law of the window average over random starts.
    const UnitWeight weight = bump_weight();
    Stream rng(derive_seed(base, 4));
    std::vector<double> hits(k, 0.0);
    std::size_t indeterminate = 0;
    std::size_t crossings = 0;
    for (std::size_t t = 0; t < d.test_trials; ++t) {
      const WindowAverage z =
          zeta_bar(driver, readout, driver.random_state(rng), d.speed * d.window, weight);
      crossings += z.crossings > 0 ? 1 : 0;
      if (auto b = select_branch(z.value, k)) hits[*b] += 1.0;
      else ++indeterminate;
    }
    double sector_deviation = 0.0;
    double sector_sigma = 0.0;
    json frequencies = json::array();
    for (std::size_t g = 0; g < k; ++g) {
      const double p = readout.group_mass(g);
      frequencies.push_back(hits[g] / trials);
      sector_deviation = std::max(sector_deviation, std::abs(hits[g] / trials - p));
      sector_sigma = std::max(sector_sigma, binomial_sigma(p, trials));
    }
    const double crossing_rate = std::min(1.0, d.speed * d.window / d.ceiling);
    const double sector_budget = crossing_rate + 3.0 * sector_sigma;
    checks.push_back(check("sector_frequency_deviation", sector_deviation, sector_budget,
                           sector_deviation <= sector_budget));
    const double indeterminate_rate = static_cast<double>(indeterminate) / trials;
    checks.push_back(check("indeterminate_fraction", indeterminate_rate, config.checks.max_indeterminate_fraction,
                           indeterminate_rate <= config.checks.max_indeterminate_fraction));

    Stream label_rng(derive_seed(base, 5));
    const DriverState label_start = driver.random_state(label_rng);
    bundle.text("labels.csv", [&](std::ostream& out) {
      io::write_label_stream_csv(out, driver, readout, label_start, d.ceiling, d.export_labels);
    });

    json groups = json::array();
    for (std::size_t g = 0; g < k; ++g) groups.push_back(readout.group_sizes[g]);
    json report = {{"block_bits", d.block_bits},
                   {"ceiling", d.ceiling},
                   {"trials", d.test_trials},
                   {"group_sizes", groups},
                   {"separated_pairs", {{"separation", block_span},
                                        {"max_deviation", separated.max_deviation},
                                        {"chi_squared", independence.statistic},
                                        {"dof", independence.dof},
                                        {"quantile_99", independence.quantile},
                                        {"total_variation", independence.total_variation}}},
                   {"identical_events", {{"joint", same.joint}, {"product", same.product}}},
                   {"lagged_events", {{"joint", lagged.joint}, {"product", lagged.product}, {"sigma", lagged.sigma()}}},
                   {"triple_events", {{"joint", triple.joint}, {"product", triple.product}, {"sigma", triple.sigma()}}},
                   {"sector_law", {{"frequencies", frequencies},
                                   {"window_crossings", crossings},
                                   {"indeterminate", indeterminate}}},
                   {"checks", checks}};
    bundle.document("driver_battery.json", report);
    reports.push_back({{"stage", "driver-test"}, {"passed", all_checks_pass(report)}, {"report", report}});
  } catch (const std::exception& e) {
    failure = std::string("driver-test: ") + e.what();
    reports.push_back({{"stage", "driver-test"}, {"passed", false}, {"report", {{"error", e.what()}}}});
  }
  return finish(config, bundle, reports, failure, "driver-test");
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 unavailable");
  }
  char buffer[1 << 16];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
    if (!in) break;
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  EVP_DigestFinal_ex(ctx, digest, &size);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < size; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

}  // namespace skewflow
