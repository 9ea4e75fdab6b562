#include "commands.hpp"

#include "hjforms/cover.hpp"
#include "hjforms/error.hpp"
#include "hjforms/fokker_planck.hpp"
#include "hjforms/forms.hpp"
#include "hjforms/inviscid.hpp"
#include "hjforms/viscous.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

namespace hjforms::cli {

namespace {

using ojson = nlohmann::ordered_json;

struct Output {
  std::string dir;
  std::string stem;
  ojson files = ojson::array();

  std::string path(const std::string& suffix) const { return (std::filesystem::path(dir) / (stem + suffix)).string(); }
};

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ojson number(double x) { return std::isfinite(x) ? ojson(x) : ojson(nullptr); }

ojson vector_json(const Field& f) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < f.size(); ++i) a.push_back(number(f[i]));
  return a;
}

// Rows (time, vertex, value), time descending from 0.
void write_path_csv(Output& out, const std::string& field, const ScalarFieldPath& p, bool enabled) {
  if (!enabled || out.dir.empty()) return;
  const std::string file = out.path("_" + field + ".csv");
  std::ofstream csv(file);
  if (!csv) throw ConfigError("cannot write '" + file + "'");
  csv << "time,vertex,value\n";
  for (int k = p.grid.nodes() - 1; k >= 0; --k) {
    const std::string t = fmt(p.grid.time(k));
    const Field& f = p.at(k);
    for (Eigen::Index x = 0; x < f.size(); ++x) csv << t << ',' << x << ',' << fmt(f[x]) << '\n';
  }
  out.files.push_back(std::filesystem::path(file).filename().string());
}

TimeGrid grid_of(const Scenario& s, double dt) {
  if (!(dt > 0.0) || !(s.horizon >= 0.0)) throw ValidationError("grid: horizon must be >= 0 and dt > 0");
  return TimeGrid::over(s.horizon, dt);
}

ViscousProblem viscous_problem(const Scenario& s, const Instance& in, double dt) {
  return {in.space, in.omega, in.potential, s.beta, in.final_condition, grid_of(s, dt)};
}

ojson field_stats(const Field& f) {
  return {{"min", number(f.minCoeff())}, {"max", number(f.maxCoeff())}, {"mean", number(f.mean())}};
}

ojson grid_json(const TimeGrid& g) {
  return {{"t_start", g.t_start()}, {"dt", g.dt()}, {"steps", g.steps()}};
}

PicardOptions picard_options(const Scenario& s) {
  PicardOptions o;
  o.window = s.picard_window;
  o.tolerance = s.tolerance;
  o.max_iterations = s.max_iterations;
  o.max_ratio = s.max_ratio;
  return o;
}

MolScheme mol_scheme(const Scenario& s) {
  return s.mol_scheme == "implicit-euler" ? MolScheme::kImplicitEuler : MolScheme::kCrankNicolson;
}

ScalarFieldPath value_from_source(const Scenario& s, const ViscousProblem& p) {
  if (s.value_source == "cole-hopf-mol") return inverse_cole_hopf(mol_solve(p, mol_scheme(s)).v, p.beta);
  return solve_viscous_hj_direct(p);
}

ojson envelope_json(const BoundEnvelopes& env) {
  const Eigen::Index last = env.d1.size() - 1;
  return {{"d1", number(env.d1[last])}, {"gradient", number(env.gradient[last])}, {"d2", number(env.d2[last])}};
}

// ---------------------------------------------------------------------------

ojson solve_inviscid(const Scenario& s, Output& out) {
  const Instance in = build_instance(s);
  const InviscidProblem p{in.space, in.omega, in.potential, in.final_condition, grid_of(s, s.dt), {}};
  const ValueTable table = solve_value(p);
  ojson j;
  j["grid"] = grid_json(p.grid);
  j["vertices"] = p.space.num_vertices();
  j["value_at_start"] = field_stats(table.u.at(0));
  j["continuity_modulus"] = number(continuity_modulus(p.space, table));
  if (s.minimizer_start) {
    if (*s.minimizer_start < 0 || *s.minimizer_start >= p.space.num_vertices()) {
      throw ValidationError("solver.minimizer_start: vertex out of range");
    }
    const VertexPath path = extract_minimizer(table, *s.minimizer_start);
    j["minimizer"] = {{"start", *s.minimizer_start}, {"vertices", path.vertices}, {"action", number(action(p, path))}};
  }
  if (s.h_max) {
    int h = *s.h_max;
    ojson attempts = ojson::array();
    while (true) {
      const CoverWindow cover = CoverWindow::build(p.space, p.omega, h, s.beta);
      try {
        const double gap = cover_equivalence_check(p, cover);
        attempts.push_back(h);
        j["cover"] = {{"h_max", h},       {"attempts", attempts},
                      {"rank", cover.rank()}, {"periods", vector_json(cover.periods())},
                      {"sheets", cover.num_sheets()}, {"lift_discrepancy", number(gap)}};
        break;
      } catch (const WindowExceeded&) {
        attempts.push_back(h);
        const int next = h == 0 ? 1 : 2 * h;
        if (next > s.h_max_cap) {
          throw WindowExceeded("cover window still too small at H_max = " + std::to_string(h) + " (cap " +
                               std::to_string(s.h_max_cap) + ")");
        }
        h = next;
      }
    }
  }
  write_path_csv(out, "u", table.u, s.write_csv);
  return j;
}

ojson solve_viscous(const Scenario& s, Output& out) {
  const Instance in = build_instance(s);
  const ViscousProblem p = viscous_problem(s, in, s.dt);
  ojson j;
  j["method"] = s.method;
  j["grid"] = grid_json(p.grid);
  j["vertices"] = p.space.num_vertices();
  j["beta"] = p.beta;
  ScalarFieldPath v, u;
  if (s.method == "picard") {
    const SchrodingerSolution sol = picard_solve(p, picard_options(s));
    v = sol.v;
    j["iterations"] = sol.iterations;
    j["residual"] = number(sol.residual);
    j["window_halvings"] = sol.window_halvings;
    ojson windows = ojson::array();
    for (const auto& w : sol.windows) {
      windows.push_back({{"first_node", w.first_node},
                         {"last_node", w.last_node},
                         {"width", w.width},
                         {"iterations", w.iterations},
                         {"max_ratio", number(w.max_ratio)},
                         {"residual", number(w.residual)}});
    }
    j["windows"] = windows;
  } else if (s.method == "mol") {
    v = mol_solve(p, mol_scheme(s)).v;
    j["scheme"] = s.mol_scheme;
  } else if (s.method == "gradient-flow") {
    const CoverWindow cover = CoverWindow::build(p.space, p.omega, s.h_max.value_or(1), p.beta);
    const GradientFlowSolution gf =
        gradient_flow_solve(p, cover, s.twist == "left" ? TwistConvention::kLeft : TwistConvention::kMidpoint);
    v = gf.solution.v;
    int violations = 0;
    double margin = INFINITY;
    for (const auto& st : gf.steps) {
      const double bound = (1.0 - gf.d5 * gf.tau) * st.inf_before;
      violations += st.inf_after < bound;
      margin = std::min(margin, st.inf_after - bound);
    }
    j["twist"] = s.twist;
    j["tau"] = gf.tau;
    j["d5"] = gf.d5;
    j["minimum_principle"] = {{"steps", gf.steps.size()}, {"violations", violations}, {"min_margin", number(margin)}};
  } else {
    u = solve_viscous_hj_direct(p);
    v = cole_hopf(u, p.beta);
  }
  if (u.slices.empty()) u = inverse_cole_hopf(v, p.beta);
  j["u_at_start"] = field_stats(u.at(0));
  j["v_at_start"] = field_stats(v.at(0));
  j["v_min"] = number(std::invoke([&] {
    double m = INFINITY;
    for (const Field& f : v.slices) m = std::min(m, f.minCoeff());
    return m;
  }));
  j["envelopes"] = envelope_json(bound_envelopes(p.space, v, p.beta));
  write_path_csv(out, "u", u, s.write_csv);
  write_path_csv(out, "v", v, s.write_csv);
  return j;
}

ojson solve_fp(const Scenario& s, Output& out) {
  const Instance in = build_instance(s);
  const ViscousProblem p = viscous_problem(s, in, s.dt);
  validate(p);
  const Field nu = build_field(s.density, p.space, s.seed, "density");
  validate_density(p.space, nu);
  const ScalarFieldPath u = value_from_source(s, p);
  const DriftPath drift = optimal_drift(p.space, p.omega, u);
  FpOptions opt;
  opt.theta = s.fp_theta;
  const FpSolution fp = fp_solve(p.space, nu, drift, p.beta, opt);
  ojson j;
  j["grid"] = grid_json(p.grid);
  j["vertices"] = p.space.num_vertices();
  j["value_source"] = s.value_source;
  j["theta"] = s.fp_theta;
  j["min_density"] = number(fp.min_density);
  j["positivity_loss"] = fp.positivity_loss;
  j["max_mass_error"] = number(fp.max_mass_error);
  j["fp_residual"] = number(fp_residual(p.space, fp.rho, drift, p.beta, s.fp_theta));
  j["stochastic_value"] = number(stochastic_value(p, fp.rho, drift, s.fp_theta));
  write_path_csv(out, "rho", fp.rho, s.write_csv);
  return j;
}

ojson duality(const Scenario& s, Output& out) {
  const Instance in = build_instance(s);
  const ViscousProblem p = viscous_problem(s, in, s.dt);
  const Field nu = build_field(s.density, p.space, s.seed, "density");
  DualityOptions opt;
  opt.source = s.value_source == "cole-hopf-mol" ? ValueSource::kColeHopfMol : ValueSource::kDirectHj;
  opt.theta = s.fp_theta;
  const DualityReport r = duality_check(p, nu, opt);
  ojson j;
  j["grid"] = grid_json(p.grid);
  j["vertices"] = r.vertices;
  j["value_source"] = s.value_source;
  j["lhs"] = number(r.lhs);
  j["rhs"] = number(r.rhs);
  j["gap"] = number(r.gap);
  j["fp_residual"] = number(r.fp_residual);
  j["min_density"] = number(r.min_density);
  j["b_rho_constant"] = number(r.b_rho_constant);
  write_path_csv(out, "u", r.u, s.write_csv);
  write_path_csv(out, "rho", r.rho, s.write_csv);
  return j;
}

// Step chosen as factor * h^power, shrunk so it divides the horizon.
double refined_dt(const Scenario& s, double h) {
  const double target = s.dt_factor * std::pow(h, s.dt_power);
  if (!(target > 0.0)) throw ValidationError("convergence: dt_factor must be positive");
  if (s.horizon == 0.0) return target;
  const double steps = std::ceil(s.horizon / target - 1e-9);
  return s.horizon / steps;
}

double fitted_order(const std::vector<double>& x, const std::vector<double>& err) {
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(err[i] > 0.0)) return NAN;
    mx += std::log(x[i]) / n;
    my += std::log(err[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(err[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxx > 0.0 ? sxy / sxx : NAN;
}

ojson convergence(const Scenario& s, Output& out) {
  struct Row {
    int n;
    double h;
    double dt;
    double error;
  };
  std::vector<Row> rows;
  bool spatial = true;
  if (s.study == "cole-hopf" || s.study == "inviscid") {
    if (s.sizes.size() < 2) throw ValidationError("convergence.sizes: need at least two sizes");
    if (s.study == "inviscid" && !s.reference) throw ValidationError("convergence.reference: required for inviscid");
    for (int n : s.sizes) {
      const Instance in = build_instance(s, n);
      const double h = in.space.edge(0).length;
      const double dt = refined_dt(s, h);
      double err = 0.0;
      if (s.study == "cole-hopf") {
        const ViscousProblem p = viscous_problem(s, in, dt);
        const ScalarFieldPath direct = solve_viscous_hj_direct(p);
        const ScalarFieldPath via = inverse_cole_hopf(mol_solve(p, mol_scheme(s)).v, p.beta);
        err = sup_distance(direct, via);
      } else {
        const InviscidProblem p{in.space, in.omega, in.potential, in.final_condition, grid_of(s, dt), {}};
        err = (solve_value(p).u.at(0).array() - *s.reference).abs().maxCoeff();
      }
      rows.push_back({n, h, dt, err});
    }
  } else if (s.study == "duality" || s.study == "picard-mol") {
    spatial = false;
    if (s.dts.size() < 2) throw ValidationError("convergence.dts: need at least two steps");
    const Instance in = build_instance(s);
    for (double dt : s.dts) {
      const ViscousProblem p = viscous_problem(s, in, dt);
      double err = 0.0;
      if (s.study == "duality") {
        DualityOptions opt;
        opt.source = s.value_source == "cole-hopf-mol" ? ValueSource::kColeHopfMol : ValueSource::kDirectHj;
        opt.theta = s.fp_theta;
        err = std::abs(duality_check(p, build_field(s.density, in.space, s.seed, "density"), opt).gap);
      } else {
        err = sup_distance(picard_solve(p, picard_options(s)).v, mol_solve(p, mol_scheme(s)).v);
      }
      rows.push_back({in.space.num_vertices(), in.space.edge(0).length, dt, err});
    }
  } else {
    throw ValidationError("convergence.study: expected cole-hopf, inviscid, duality or picard-mol");
  }

  std::vector<double> x, e;
  ojson table = ojson::array();
  bool decreasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    x.push_back(spatial ? r.h : r.dt);
    e.push_back(r.error);
    table.push_back({{"n", r.n}, {"h", r.h}, {"dt", r.dt}, {"error", number(r.error)}});
    if (i > 0) decreasing &= r.error < rows[i - 1].error;
  }
  ojson j;
  j["study"] = s.study;
  j["refined"] = spatial ? "h" : "dt";
  j["rows"] = table;
  j["monotone_decreasing"] = decreasing;
  j["fitted_order"] = number(fitted_order(x, e));
  if (s.write_csv && !out.dir.empty()) {
    const std::string file = out.path(".csv");
    std::ofstream csv(file);
    if (!csv) throw ConfigError("cannot write '" + file + "'");
    csv << "n,h,dt,error\n";
    for (const Row& r : rows) csv << r.n << ',' << fmt(r.h) << ',' << fmt(r.dt) << ',' << fmt(r.error) << '\n';
    out.files.push_back(std::filesystem::path(file).filename().string());
  }
  return j;
}

ojson check_form(const Scenario& s, Output&) {
  const Instance in = build_instance(s);
  const GraphSpace& space = in.space;
  const CycleBasis basis = cycle_basis(space);
  const Field P = periods(space, in.omega, basis);
  const HarmonicReport h = is_harmonic(space, in.omega);
  const double zero_tol = 1e-12 * std::max(1.0, in.omega.values.cwiseAbs().sum());
  ojson j;
  j["vertices"] = space.num_vertices();
  j["edges"] = space.num_edges();
  j["faces"] = space.faces().size();
  j["closure_defect"] = number(closure_defect(space, in.omega));
  j["harmonic"] = h.harmonic;
  j["divergence_residual"] = number(h.max_residual);
  j["first_betti_number"] = basis.rank();
  j["periods"] = vector_json(P);
  j["exact"] = P.size() == 0 || P.cwiseAbs().maxCoeff() <= zero_tol;
  j["path_bound_constant"] = number(path_bound_constant(space, in.omega));
  return j;
}

ojson check_hypotheses_cmd(const Scenario& s, Output&) {
  const Instance in = build_instance(s);
  const HypothesisReport r =
      check_hypotheses(in.space, in.omega, in.potential, grid_of(s, s.dt), s.beta, s.probes, s.seed);
  ojson j;
  j["gamma_hat_linf"] = number(r.gamma_hat_linf);
  j["gamma_hat_v1"] = number(r.gamma_hat_v1);
  j["d5_estimate"] = number(r.d5_estimate);
  j["d5_argmax"] = r.d5_argmax;
  j["sup_v"] = number(r.sup_v);
  j["v_lipschitz_space"] = number(r.v_lipschitz_space);
  j["v_lipschitz_time"] = number(r.v_lipschitz_time);
  j["harmonic_residual"] = number(r.harmonic_residual);
  j["closure_defect"] = number(r.closure_defect);
  j["gradient_flow_tau_bound"] = number(r.gradient_flow_tau_bound);
  j["generator_bound"] = number(r.generator_bound);
  return j;
}

using Handler = std::function<ojson(const Scenario&, Output&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"solve-inviscid", solve_inviscid}, {"solve-viscous", solve_viscous},
      {"solve-fp", solve_fp},             {"duality", duality},
      {"convergence", convergence},       {"check-form", check_form},
      {"check-hypotheses", check_hypotheses_cmd},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"solve-inviscid", "solve-viscous",    "solve-fp",        "duality",
                                              "convergence",    "check-form", "check-hypotheses"};
  return names;
}

ojson run_command(const std::string& command, const Scenario& scenario, const std::string& output_dir) {
  const auto it = handlers().find(command);
  if (it == handlers().end()) throw ValidationError("unknown command '" + command + "'");
  Output out{output_dir, scenario.output_prefix + "_" + command};
  if (!output_dir.empty()) std::filesystem::create_directories(output_dir);
  ojson summary;
  summary["scenario"] = scenario.name;
  summary["command"] = command;
  summary["seed"] = scenario.seed;
  summary["result"] = it->second(scenario, out);
  summary["artifacts"] = out.files;
  if (!output_dir.empty()) {
    const std::string file = out.path(".json");
    std::ofstream js(file);
    if (!js) throw ConfigError("cannot write '" + file + "'");
    js << summary.dump(2) << '\n';
  }
  return summary;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const Error*>(&e)) return 3;
  return 1;
}

}  // namespace hjforms::cli
