#pragma once

#include "hjforms/error.hpp"
#include "hjforms/fields.hpp"
#include "hjforms/forms.hpp"
#include "hjforms/space.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hjforms::cli {

/// Malformed or inconsistent scenario file.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Raw scenario document. Descriptions that depend on the graph size stay as JSON so
/// refinement sweeps can rebuild them at each N.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  nlohmann::json space;
  nlohmann::json form;
  nlohmann::json potential;
  nlohmann::json final_condition;
  nlohmann::json density;
  double beta = 1.0;
  double horizon = 1.0;
  double dt = 1e-2;

  std::string method = "mol";
  double picard_window = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 200;
  double max_ratio = 0.5;
  std::string mol_scheme = "crank-nicolson";
  std::string twist = "midpoint";
  double fp_theta = 0.5;
  std::string value_source = "direct-hj";
  std::optional<int> minimizer_start;

  std::optional<int> h_max;
  int h_max_cap = 8;

  std::string study;
  std::vector<int> sizes;
  std::vector<double> dts;
  double dt_factor = 0.5;
  double dt_power = 2.0;
  std::optional<double> reference;

  int probes = 200;

  std::string output_directory = ".";
  std::string output_prefix;
  bool write_csv = true;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

/// Built objects for one graph size.
struct Instance {
  GraphSpace space;
  Cocycle omega;
  Potential potential;
  Field final_condition;
};

GraphSpace build_space(const nlohmann::json& spec, std::uint64_t seed, std::optional<int> n_override = {});
Cocycle build_form(const nlohmann::json& spec, const GraphSpace& space, std::uint64_t seed);
/// Vertex field from its JSON description; `what` names it in error messages.
Field build_field(const nlohmann::json& spec, const GraphSpace& space, std::uint64_t seed, const std::string& what);
Instance build_instance(const Scenario& s, std::optional<int> n_override = {});

}  // namespace hjforms::cli
