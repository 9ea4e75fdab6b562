#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>

int main(int argc, char** argv) {
  using namespace hjforms::cli;
  CLI::App app{"Hamilton-Jacobi equations with closed forms on weighted graphs"};
  app.require_subcommand(1);
  std::string config;
  std::string output_dir;
  bool quiet = false;
  const std::map<std::string, std::string> help{
      {"solve-inviscid", "Bellman recursion for the deterministic value, with optional cover lift"},
      {"solve-viscous", "Viscous value by Picard, method of lines, gradient flow or direct HJ"},
      {"solve-fp", "Fokker-Planck density under the optimal drift"},
      {"duality", "Compare the viscous value with the stochastic control value"},
      {"convergence", "Refinement study with fitted order"},
      {"check-form", "Closure, harmonicity and periods of the form"},
      {"check-hypotheses", "Estimate the regularity constants of form and potential"},
  };
  for (const std::string& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("-c,--config", config, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", output_dir, "Directory for CSV and JSON output");
    sub->add_flag("-q,--quiet", quiet, "Do not print the summary");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    Scenario s = load_scenario(config);
    std::string dir = s.output_directory;
    if (const char* env = std::getenv("HJFORMS_OUTPUT_DIR"); env && *env) dir = env;
    if (!output_dir.empty()) dir = output_dir;
    const auto summary = run_command(command, s, dir);
    if (!quiet) std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "hjforms " << command << ": " << e.what() << '\n';
    return exit_code_for(e);
  }
}
