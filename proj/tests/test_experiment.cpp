#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "skewflow/errors.hpp"
#include "skewflow/experiment.hpp"
#include "skewflow/io.hpp"
#include "skewflow/partition.hpp"

using namespace skewflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("skewflow-test-" + name);
  fs::remove_all(dir);
  return dir;
}

json small_document() {
  return {{"system", {{"name", "doubling"}}},
          {"mesh", 0.25},
          {"orbit_length", 100000},
          {"cloud_size", 5000},
          {"stepskew", {{"trials", 20000}, {"samples", 2000}, {"export_paths", 50}}},
          {"driver", {{"test_trials", 20000}, {"export_labels", 50}}},
          {"pipeflow", {{"orbits", 20000}, {"export_orbits", 50}}},
          {"checks", {{"max_law_deviation", 0.05}}},
          {"seed", 7}};
}

ExperimentConfig small_config(const fs::path& out) {
  auto c = parse_config(small_document());
  c.output_dir = out.string();
  return c;
}

std::map<std::string, std::string> hashes(const json& manifest) {
  std::map<std::string, std::string> out;
  for (const auto& f : manifest["files"]) out[f["path"].get<std::string>()] = f["sha256"].get<std::string>();
  return out;
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("SKEWFLOW_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "SKEWFLOW_CLI is not set");
  const int status = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(json::object());
  CHECK(c.system == "doubling");
  CHECK(c.mesh == 0.125);
  CHECK(c.shadow_tolerance() == 0.25);
  CHECK(c.shadow_steps() == c.pipeflow.steps);

  const auto round = parse_config(config_json(small_config("x")));
  CHECK(config_json(round) == config_json(small_config("x")));

  auto doc = small_document();
  doc["meshh"] = 0.1;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = small_document();
  doc["stepskew"]["trails"] = 5;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = small_document();
  doc["mesh"] = "0.1";
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = small_document();
  doc["driver"]["window"] = 1.5;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = small_document();
  doc["driver"]["test_beta"] = {0.5, 0.6};
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = small_document();
  doc["system"]["name"] = "tent";
  CHECK_THROWS(parse_config(doc));

  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("invalid configs write nothing") {
  const auto dir = scratch("invalid");
  for (double mesh : {0.0, -0.1}) {
    auto c = small_config(dir);
    c.mesh = mesh;
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
    CHECK_FALSE(fs::exists(dir));
  }
}

TEST_CASE("full pipeline") {
  const auto dir = scratch("full");
  const auto result = run_experiment(small_config(dir));
  CHECK(result.passed);
  CHECK_FALSE(result.failure.has_value());
  const auto& m = result.manifest;
  CHECK(m["status"] == "completed");
  CHECK(m["partial"] == false);
  REQUIRE(m["stages"].size() == 6);
  const char* names[] = {"partition", "stepskew", "network", "pipeflow", "compare", "shadowing"};
  for (std::size_t s = 0; s < 6; ++s) {
    CHECK(m["stages"][s]["stage"] == names[s]);
    CHECK(m["stages"][s]["passed"] == true);
  }
  for (const auto& [path, hash] : hashes(m)) {
    CHECK(fs::exists(dir / path));
    CHECK(sha256_file((dir / path).string()) == hash);
  }
  CHECK(fs::exists(dir / "manifest.json"));

  SUBCASE("transition matrix round trip") {
    std::ifstream in(dir / "transition.csv");
    const auto p = io::read_transition_csv(in);
    CHECK(p.size() == 4);
    std::ostringstream again;
    io::write_transition_csv(again, p);
    std::ifstream original(dir / "transition.csv");
    std::stringstream text;
    text << original.rdbuf();
    CHECK(again.str() == text.str());
  }
  SUBCASE("outputs are reproducible and independent of the job count") {
    const auto again = run_experiment(small_config(scratch("full-again")), Stage::shadowing, 3);
    CHECK(hashes(again.manifest) == hashes(m));
  }
}

TEST_CASE("partial runs stop at the requested stage") {
  const auto dir = scratch("partial");
  const auto result = run_experiment(small_config(dir), Stage::network);
  CHECK(result.manifest["stages"].size() == 3);
  CHECK(fs::exists(dir / "network.json"));
  CHECK_FALSE(fs::exists(dir / "orbits.csv"));
}

TEST_CASE("stage failures are recorded in the manifest") {
  const auto dir = scratch("failure");
  auto c = small_config(dir);
  c.mesh = 1e-3;
  c.orbit_length = 2;
  const auto result = run_experiment(c);
  CHECK_FALSE(result.passed);
  REQUIRE(result.failure.has_value());
  CHECK(result.manifest["status"] == "failed");
  CHECK(result.manifest["partial"] == true);
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("identical seeds give identical driver batteries") {
  const auto a = run_driver_battery(small_config(scratch("battery-a")));
  const auto b = run_driver_battery(small_config(scratch("battery-b")));
  CHECK(a.passed);
  CHECK(hashes(a.manifest) == hashes(b.manifest));
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "good.json") << small_document().dump();
    auto bad = small_document();
    bad["unknown"] = 1;
    std::ofstream(dir / "bad.json") << bad.dump();
  }
  const std::string out = " --out " + (dir / "run").string();
  CHECK(run_cli("driver-test --config " + (dir / "good.json").string() + out) == 0);
  CHECK(fs::exists(dir / "run" / "driver_battery.json"));
  CHECK(run_cli("partition --config " + (dir / "good.json").string() + " --seed 3" + out) == 0);
  CHECK(run_cli("all --config " + (dir / "bad.json").string() + out) == 2);
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("") != 0);
}
