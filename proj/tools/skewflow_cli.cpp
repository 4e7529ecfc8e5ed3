#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "skewflow/errors.hpp"
#include "skewflow/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned jobs = 1;
};

void add_options(CLI::App* command, Options& options) {
  command->add_option("--config", options.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  command->add_option("--seed", options.seed, "master seed, overrides the config");
  command->add_option("--out", options.out, "output directory, overrides the config");
  command->add_option("--jobs", options.jobs, "worker threads")->check(CLI::PositiveNumber);
}

void print_summary(const skewflow::ExperimentResult& result) {
  for (const auto& stage : result.manifest["stages"]) {
    std::cout << stage["stage"].get<std::string>() << ": "
              << (stage["passed"].get<bool>() ? "pass" : "FAIL") << '\n';
    const auto& report = stage["report"];
    if (!report.contains("checks")) continue;
    for (const auto& c : report["checks"])
      std::cout << "  " << c["name"].get<std::string>() << " = " << c["value"].dump()
                << " (limit " << c["limit"].dump() << ") "
                << (c["passed"].get<bool>() ? "ok" : "FAIL") << '\n';
  }
  if (result.failure) std::cerr << "error: " << *result.failure << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ergodic map, step-skew product and pipe-flow experiments"};
  app.require_subcommand(1);
  Options options;

  const std::pair<const char*, const char*> commands[] = {
      {"partition", "partition the attractor and estimate the transition matrix"},
      {"stepskew", "sample the step-skew product and its diagnostics"},
      {"driver-test", "run the driver decorrelation and sector-law battery"},
      {"pipeflow", "build the network and run time-3 pipe-flow orbits"},
      {"compare", "compare cylinder laws of both samplers with the Markov law"},
      {"all", "run the full pipeline including shadowing"},
  };
  for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), options);

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    skewflow::ExperimentConfig config =
        options.config.empty() ? skewflow::ExperimentConfig{} : skewflow::load_config(options.config);
    if (options.seed) config.seed = *options.seed;
    if (!options.out.empty()) config.output_dir = options.out;
    skewflow::validate_config(config);

    skewflow::ExperimentResult result;
    if (command == "driver-test") {
      result = skewflow::run_driver_battery(config, options.jobs);
    } else {
      skewflow::Stage last = skewflow::Stage::shadowing;
      if (command == "partition") last = skewflow::Stage::partition;
      else if (command == "stepskew") last = skewflow::Stage::stepskew;
      else if (command == "pipeflow") last = skewflow::Stage::pipeflow;
      else if (command == "compare") last = skewflow::Stage::compare;
      result = skewflow::run_experiment(config, last, options.jobs);
    }
    print_summary(result);
    std::cout << "manifest: " << config.output_dir << "/manifest.json\n";
    return result.passed ? 0 : 1;
  } catch (const skewflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
