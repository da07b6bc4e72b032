#include "contraction/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace contraction::cli;
  CLI::App app{"Contraction analysis scenario runner"};
  app.require_subcommand(1);

  std::string file, out;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write report.json plus CSV series");
  run_cmd->add_option("file", file, "Scenario file (JSON)")->required();
  auto* out_opt = run_cmd->add_option("--out", out, "Output directory");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the scenario seed");

  std::string vfile;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario without running it");
  validate_cmd->add_option("file", vfile, "Scenario file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*run_cmd) {
    return run_scenario(file, out_opt->count() ? std::optional<std::string>(out) : std::nullopt,
                        seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, std::cerr);
  }
  return validate_scenario(vfile, std::cerr);
}
