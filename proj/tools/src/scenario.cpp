#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace hjforms::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
T get(const json& obj, const std::string& key, const T& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return get<T>(obj, key, T{}, where);
}

std::string kind_of(const json& spec, const std::string& where) {
  if (!spec.is_object()) throw ConfigError(where + ": expected an object");
  return require<std::string>(spec, "kind", where);
}

// Independent streams per component so editing one section leaves the others fixed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

Field uniform_field(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Field f(n);
  for (int i = 0; i < n; ++i) f[i] = u(rng);
  return f;
}

GraphSpace random_space(int n, int chords, std::uint64_t seed) {
  if (n < 3) throw ConfigError("space: random graphs need n >= 3");
  std::mt19937_64 rng = stream(seed, 1);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, weight(rng), weight(rng)});
  std::uniform_int_distribution<int> vertex(0, n - 1);
  for (int c = 0; c < chords; ++c) {
    const int a = vertex(rng);
    const int b = vertex(rng);
    if (a == b) continue;
    bool duplicate = false;
    for (const auto& e : edges) duplicate |= (e.tail == a && e.head == b) || (e.tail == b && e.head == a);
    if (!duplicate) edges.push_back({a, b, weight(rng), weight(rng)});
  }
  Field m(n);
  for (int i = 0; i < n; ++i) m[i] = weight(rng);
  return GraphSpace(n, std::move(edges), m / m.sum());
}

// Position in [0, 1) used by the profile fields.
double unit_coordinate(const GraphSpace& space, int i) {
  const auto& c = space.coordinates();
  if (!c.empty() && space.period_length() > 0.0) return c[static_cast<std::size_t>(i)] / space.period_length();
  return static_cast<double>(i) / space.num_vertices();
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  check_keys(doc,
             {"name", "seed", "space", "form", "potential", "final_condition", "density", "beta", "grid", "solver",
              "cover", "convergence", "hypotheses", "output"},
             "scenario");
  Scenario s;
  s.name = get<std::string>(doc, "name", s.name, "scenario");
  s.seed = get<std::uint64_t>(doc, "seed", s.seed, "scenario");
  if (!doc.contains("space")) throw ConfigError("scenario: missing key 'space'");
  s.space = doc.at("space");
  s.form = doc.value("form", json{{"kind", "zero"}});
  s.potential = doc.value("potential", json{{"kind", "zero"}});
  s.final_condition = doc.value("final_condition", json{{"kind", "zero"}});
  s.density = doc.value("density", json{{"kind", "constant"}, {"value", 1.0}});
  s.beta = get<double>(doc, "beta", s.beta, "scenario");
  if (!(s.beta > 0.0)) throw ConfigError("scenario.beta: must be positive");

  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    check_keys(g, {"horizon", "dt"}, "grid");
    s.horizon = get<double>(g, "horizon", s.horizon, "grid");
    s.dt = get<double>(g, "dt", s.dt, "grid");
  }
  if (doc.contains("solver")) {
    const json& v = doc.at("solver");
    check_keys(v,
               {"method", "picard_window", "tolerance", "max_iterations", "max_ratio", "mol_scheme", "twist",
                "fp_theta", "value_source", "minimizer_start"},
               "solver");
    s.method = get<std::string>(v, "method", s.method, "solver");
    s.picard_window = get<double>(v, "picard_window", s.picard_window, "solver");
    s.tolerance = get<double>(v, "tolerance", s.tolerance, "solver");
    s.max_iterations = get<int>(v, "max_iterations", s.max_iterations, "solver");
    s.max_ratio = get<double>(v, "max_ratio", s.max_ratio, "solver");
    s.mol_scheme = get<std::string>(v, "mol_scheme", s.mol_scheme, "solver");
    s.twist = get<std::string>(v, "twist", s.twist, "solver");
    s.fp_theta = get<double>(v, "fp_theta", s.fp_theta, "solver");
    s.value_source = get<std::string>(v, "value_source", s.value_source, "solver");
    if (v.contains("minimizer_start")) s.minimizer_start = get<int>(v, "minimizer_start", 0, "solver");
  }
  const std::set<std::string> methods{"picard", "mol", "gradient-flow", "direct-hj"};
  if (!methods.count(s.method)) throw ConfigError("solver.method: unknown method '" + s.method + "'");
  if (s.mol_scheme != "crank-nicolson" && s.mol_scheme != "implicit-euler") {
    throw ConfigError("solver.mol_scheme: expected crank-nicolson or implicit-euler");
  }
  if (s.twist != "midpoint" && s.twist != "left") throw ConfigError("solver.twist: expected midpoint or left");
  if (s.value_source != "direct-hj" && s.value_source != "cole-hopf-mol") {
    throw ConfigError("solver.value_source: expected direct-hj or cole-hopf-mol");
  }

  if (doc.contains("cover")) {
    const json& c = doc.at("cover");
    check_keys(c, {"h_max", "h_max_cap"}, "cover");
    if (c.contains("h_max")) s.h_max = get<int>(c, "h_max", 0, "cover");
    s.h_max_cap = get<int>(c, "h_max_cap", s.h_max_cap, "cover");
    if (s.h_max && (*s.h_max < 0 || *s.h_max > s.h_max_cap)) throw ConfigError("cover.h_max: must lie in [0, h_max_cap]");
  }
  if (doc.contains("convergence")) {
    const json& c = doc.at("convergence");
    check_keys(c, {"study", "sizes", "dts", "dt_factor", "dt_power", "reference"}, "convergence");
    s.study = require<std::string>(c, "study", "convergence");
    s.sizes = get<std::vector<int>>(c, "sizes", {}, "convergence");
    s.dts = get<std::vector<double>>(c, "dts", {}, "convergence");
    s.dt_factor = get<double>(c, "dt_factor", s.dt_factor, "convergence");
    s.dt_power = get<double>(c, "dt_power", s.dt_power, "convergence");
    if (c.contains("reference")) s.reference = get<double>(c, "reference", 0.0, "convergence");
  }
  if (doc.contains("hypotheses")) {
    const json& h = doc.at("hypotheses");
    check_keys(h, {"probes"}, "hypotheses");
    s.probes = get<int>(h, "probes", s.probes, "hypotheses");
  }
  s.output_prefix = s.name;
  if (doc.contains("output")) {
    const json& o = doc.at("output");
    check_keys(o, {"directory", "prefix", "csv"}, "output");
    s.output_directory = get<std::string>(o, "directory", s.output_directory, "output");
    s.output_prefix = get<std::string>(o, "prefix", s.output_prefix, "output");
    s.write_csv = get<bool>(o, "csv", s.write_csv, "output");
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(doc);
}

GraphSpace build_space(const json& spec, std::uint64_t seed, std::optional<int> n_override) {
  const std::string kind = kind_of(spec, "space");
  if (kind == "cycle" || kind == "path") {
    check_keys(spec, {"kind", "n", "length"}, "space");
    const int n = n_override ? *n_override : require<int>(spec, "n", "space");
    const double length = get<double>(spec, "length", 1.0, "space");
    return kind == "cycle" ? GraphSpace::cycle(n, length) : GraphSpace::path(n, length);
  }
  if (n_override) throw ConfigError("space: refinement sweeps need a cycle or path space");
  if (kind == "torus") {
    check_keys(spec, {"kind", "nx", "ny", "length_x", "length_y"}, "space");
    return GraphSpace::torus(require<int>(spec, "nx", "space"), require<int>(spec, "ny", "space"),
                             get<double>(spec, "length_x", 1.0, "space"), get<double>(spec, "length_y", 1.0, "space"));
  }
  if (kind == "random") {
    check_keys(spec, {"kind", "n", "chords"}, "space");
    return random_space(require<int>(spec, "n", "space"), get<int>(spec, "chords", 2, "space"), seed);
  }
  if (kind == "explicit") {
    check_keys(spec, {"kind", "vertices", "edges", "measure", "faces"}, "space");
    const int n = require<int>(spec, "vertices", "space");
    if (n < 1) throw ConfigError("space.vertices: must be positive");
    std::vector<Edge> edges;
    for (const json& e : require<json>(spec, "edges", "space")) {
      check_keys(e, {"tail", "head", "length", "conductance"}, "space.edges[]");
      Edge ed{require<int>(e, "tail", "space.edges[]"), require<int>(e, "head", "space.edges[]"),
              get<double>(e, "length", 1.0, "space.edges[]"), get<double>(e, "conductance", 1.0, "space.edges[]")};
      if (ed.tail < 0 || ed.tail >= n || ed.head < 0 || ed.head >= n) {
        throw ConfigError("space.edges[]: vertex out of range in edge " + std::to_string(ed.tail) + " -> " +
                          std::to_string(ed.head));
      }
      edges.push_back(ed);
    }
    Field m = Field::Constant(n, 1.0 / n);
    if (spec.contains("measure")) {
      const auto values = get<std::vector<double>>(spec, "measure", {}, "space");
      if (static_cast<int>(values.size()) != n) throw ConfigError("space.measure: needs one mass per vertex");
      m = Eigen::Map<const Field>(values.data(), n);
    }
    const auto faces = get<std::vector<std::vector<int>>>(spec, "faces", {}, "space");
    for (const auto& f : faces) {
      for (int v : f) {
        if (v < 0 || v >= n) throw ConfigError("space.faces: vertex " + std::to_string(v) + " out of range");
      }
    }
    return GraphSpace(n, std::move(edges), m, faces);
  }
  throw ConfigError("space.kind: unknown kind '" + kind + "'");
}

Cocycle build_form(const json& spec, const GraphSpace& space, std::uint64_t seed) {
  const std::string kind = kind_of(spec, "form");
  const bool harmonize = get<bool>(spec, "harmonize", false, "form");
  Cocycle omega;
  if (kind == "zero") {
    check_keys(spec, {"kind", "harmonize"}, "form");
    omega = Cocycle::zero(space);
  } else if (kind == "constant") {
    check_keys(spec, {"kind", "c", "harmonize"}, "form");
    omega = Cocycle::constant(space, require<double>(spec, "c", "form"));
  } else if (kind == "edges") {
    check_keys(spec, {"kind", "values", "harmonize"}, "form");
    const auto values = require<std::vector<double>>(spec, "values", "form");
    if (static_cast<int>(values.size()) != space.num_edges()) throw ConfigError("form.values: needs one value per edge");
    omega.values = Eigen::Map<const Field>(values.data(), space.num_edges());
  } else if (kind == "charts") {
    check_keys(spec, {"kind", "charts", "harmonize"}, "form");
    ChartForm form;
    for (const json& c : require<json>(spec, "charts", "form")) {
      check_keys(c, {"vertices", "values"}, "form.charts[]");
      Chart chart;
      chart.vertices = require<std::vector<int>>(c, "vertices", "form.charts[]");
      const auto values = require<std::vector<double>>(c, "values", "form.charts[]");
      if (values.size() != chart.vertices.size()) throw ConfigError("form.charts[]: vertices and values differ in length");
      for (int v : chart.vertices) {
        if (v < 0 || v >= space.num_vertices()) {
          throw ConfigError("form.charts[]: vertex " + std::to_string(v) + " out of range");
        }
      }
      chart.values = Eigen::Map<const Field>(values.data(), static_cast<Eigen::Index>(values.size()));
      form.charts.push_back(std::move(chart));
    }
    validate_chart_form(space, form);
    omega = to_cocycle(space, form);
  } else if (kind == "random") {
    check_keys(spec, {"kind", "scale", "harmonize"}, "form");
    std::mt19937_64 rng = stream(seed, 2);
    omega.values = uniform_field(rng, space.num_edges(), get<double>(spec, "scale", 1.0, "form"));
  } else {
    throw ConfigError("form.kind: unknown kind '" + kind + "'");
  }
  return harmonize ? harmonic_representative(space, omega) : omega;
}

Field build_field(const json& spec, const GraphSpace& space, std::uint64_t seed, const std::string& what) {
  const std::string kind = kind_of(spec, what);
  const int n = space.num_vertices();
  Field f;
  if (kind == "zero") {
    check_keys(spec, {"kind", "normalize"}, what);
    f = Field::Zero(n);
  } else if (kind == "constant") {
    check_keys(spec, {"kind", "value", "normalize"}, what);
    f = Field::Constant(n, require<double>(spec, "value", what));
  } else if (kind == "values") {
    check_keys(spec, {"kind", "values", "normalize"}, what);
    const auto values = require<std::vector<double>>(spec, "values", what);
    if (static_cast<int>(values.size()) != n) throw ConfigError(what + ".values: needs one value per vertex");
    f = Eigen::Map<const Field>(values.data(), n);
  } else if (kind == "cosine") {
    check_keys(spec, {"kind", "amplitude", "frequency", "phase", "offset", "normalize"}, what);
    const double a = get<double>(spec, "amplitude", 1.0, what);
    const double k = get<double>(spec, "frequency", 1.0, what);
    const double phase = get<double>(spec, "phase", 0.0, what);
    const double offset = get<double>(spec, "offset", 0.0, what);
    f.resize(n);
    for (int i = 0; i < n; ++i) {
      f[i] = offset + a * std::cos(2.0 * std::numbers::pi * k * unit_coordinate(space, i) + phase);
    }
  } else if (kind == "random") {
    check_keys(spec, {"kind", "scale", "offset", "normalize"}, what);
    std::mt19937_64 rng = stream(seed, what == "potential" ? 3 : what == "final_condition" ? 4 : 5);
    f = uniform_field(rng, n, get<double>(spec, "scale", 1.0, what)).array() + get<double>(spec, "offset", 0.0, what);
  } else {
    throw ConfigError(what + ".kind: unknown kind '" + kind + "'");
  }
  if (get<bool>(spec, "normalize", false, what)) {
    const double mass = space.integrate(f);
    if (!(mass > 0.0)) throw ConfigError(what + ": cannot normalize a field with nonpositive mass");
    f /= mass;
  }
  return f;
}

Instance build_instance(const Scenario& s, std::optional<int> n_override) {
  GraphSpace space = build_space(s.space, s.seed, n_override);
  Cocycle omega = build_form(s.form, space, s.seed);
  Potential potential = Potential::autonomous(build_field(s.potential, space, s.seed, "potential"));
  Field g = build_field(s.final_condition, space, s.seed, "final_condition");
  return {std::move(space), std::move(omega), std::move(potential), std::move(g)};
}

}  // namespace hjforms::cli
