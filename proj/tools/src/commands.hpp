#pragma once

#include "scenario.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace hjforms::cli {

const std::vector<std::string>& command_names();

/// Runs one subcommand and returns its JSON summary. When `output_dir` is
/// nonempty the summary and CSV fields are written there as
/// <prefix>_<command>.json and <prefix>_<command>_<field>.csv.
nlohmann::ordered_json run_command(const std::string& command, const Scenario& scenario,
                                   const std::string& output_dir);

/// Exit code for an exception escaping run_command: 2 for validation
/// failures, 3 for solver failures, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace hjforms::cli
