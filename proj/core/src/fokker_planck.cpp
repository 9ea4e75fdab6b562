#include "hjforms/fokker_planck.hpp"

#include "hjforms/error.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <string>

namespace hjforms {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

void check_drift(const GraphSpace& space, const DriftPath& drift, int nodes) {
  if (static_cast<int>(drift.slices.size()) != nodes) throw ValidationError("drift path needs one cocycle per node");
  for (const auto& y : drift.slices) {
    if (y.values.size() != space.num_edges()) throw ValidationError("drift cocycle does not match the graph");
  }
}

}  // namespace

double drift_inner(const GraphSpace& space, const Cocycle& a, const Cocycle& b, const Field& rho) {
  if (rho.size() != space.num_vertices()) throw ValidationError("density does not match the graph");
  return space.integrate(gamma_hat(space, a, b).cwiseProduct(rho));
}

double trapezoid_weight(const TimeGrid& grid, int k) {
  if (grid.steps() == 0) return 0.0;
  return (k == 0 || k == grid.steps()) ? 0.5 * grid.dt() : grid.dt();
}

double drift_inner(const GraphSpace& space, const DriftPath& a, const DriftPath& b, const MeasurePath& rho) {
  const int nodes = static_cast<int>(rho.slices.size());
  check_drift(space, a, nodes);
  check_drift(space, b, nodes);
  double s = 0.0;
  for (int k = 0; k < nodes; ++k) s += trapezoid_weight(rho.grid, k) * drift_inner(space, a.at(k), b.at(k), rho.at(k));
  return s;
}

Field drift_divergence(const GraphSpace& space, const Cocycle& drift, const Field& rho) {
  Field out(space.num_vertices());
  for (int x = 0; x < space.num_vertices(); ++x) {
    double s = 0.0;
    for (const auto& inc : space.incident(x)) {
      s += space.edge(inc.edge).conductance * drift.along(inc) * (rho[x] + rho[inc.neighbor]);
    }
    out[x] = -s / (2.0 * space.measure()[x]);
  }
  return out;
}

SparseMatrix drift_divergence_matrix(const GraphSpace& space, const Cocycle& drift) {
  const int n = space.num_vertices();
  std::vector<Eigen::Triplet<double>> trip;
  for (int x = 0; x < n; ++x) {
    const double scale = -1.0 / (2.0 * space.measure()[x]);
    double diag = 0.0;
    for (const auto& inc : space.incident(x)) {
      const double c = scale * space.edge(inc.edge).conductance * drift.along(inc);
      trip.emplace_back(x, inc.neighbor, c);
      diag += c;
    }
    trip.emplace_back(x, x, diag);
  }
  SparseMatrix D(n, n);
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

Field fp_step(const GraphSpace& space, const Field& rho, const Cocycle& now, const Cocycle& next, double dt,
              double beta, const FpOptions& opt) {
  if (!(dt > 0.0) || !(beta > 0.0)) throw ValidationError("fp_step: dt and beta must be positive");
  if (opt.theta != 0.0 && opt.theta != 0.5) throw ValidationError("fp_step: theta must be 0 or 1/2");
  const int n = space.num_vertices();
  SparseMatrix I(n, n);
  I.setIdentity();
  SparseMatrix A = I - (dt / (2.0 * beta)) * space.laplacian_matrix();
  if (opt.theta > 0.0) A -= opt.theta * dt * drift_divergence_matrix(space, next);
  Field rhs = rho;
  if (opt.theta < 1.0) rhs += (1.0 - opt.theta) * dt * drift_divergence(space, now, rho);
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw StepRejected("fp_step: factorization failed");
  Field out = lu.solve(rhs);
  if (!out.allFinite()) throw StepRejected("fp_step: non-finite density");
  const double mass = space.integrate(out);
  if (std::abs(mass - 1.0) > opt.mass_tolerance) {
    throw MassDrift("density mass drifted to " + std::to_string(mass));
  }
  return out;
}

FpSolution fp_solve(const GraphSpace& space, const Field& rho0, const DriftPath& drift, double beta,
                    const FpOptions& opt) {
  const TimeGrid& grid = drift.grid;
  check_drift(space, drift, grid.nodes());
  validate_density(space, rho0);
  FpSolution sol;
  std::vector<Field> slices;
  slices.reserve(static_cast<std::size_t>(grid.nodes()));
  slices.push_back(rho0);
  sol.min_density = rho0.minCoeff();
  sol.max_mass_error = std::abs(space.integrate(rho0) - 1.0);
  for (int k = 0; k < grid.steps(); ++k) {
    Field next = fp_step(space, slices.back(), drift.at(k), drift.at(k + 1), grid.dt(), beta, opt);
    sol.min_density = std::min(sol.min_density, next.minCoeff());
    sol.max_mass_error = std::max(sol.max_mass_error, std::abs(space.integrate(next) - 1.0));
    slices.push_back(std::move(next));
  }
  sol.positivity_loss = sol.min_density < opt.positivity_floor;
  sol.rho = MeasurePath(grid, std::move(slices));
  return sol;
}

double fp_residual(const GraphSpace& space, const MeasurePath& rho, const DriftPath& drift, double beta,
                   double theta) {
  const int nodes = static_cast<int>(rho.slices.size());
  check_drift(space, drift, nodes);
  const double dt = rho.grid.dt();
  double worst = 0.0;
  for (int k = 0; k + 1 < nodes; ++k) {
    const Field& a = rho.at(k);
    const Field& b = rho.at(k + 1);
    const Field r = b - a -
                    dt * (laplacian(space, b) / (2.0 * beta) + (1.0 - theta) * drift_divergence(space, drift.at(k), a) +
                          theta * drift_divergence(space, drift.at(k + 1), b));
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

double stochastic_value(const ViscousProblem& p, const MeasurePath& rho, const DriftPath& drift, double theta) {
  const GraphSpace& space = p.space;
  const int nodes = static_cast<int>(rho.slices.size());
  check_drift(space, drift, nodes);
  const double residual = fp_residual(space, rho, drift, p.beta, theta);
  if (!(residual <= 1e-8)) {
    throw ValidationError("candidate does not solve the Fokker-Planck equation (residual " +
                          std::to_string(residual) + ")");
  }
  double value = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double w = trapezoid_weight(rho.grid, k);
    const Cocycle& Y = drift.at(k);
    const Field& r = rho.at(k);
    const Field V = p.potential.at(rho.grid.time(k));
    value += w * (0.5 * drift_inner(space, Y, Y, r) - drift_inner(space, p.omega, Y, r) - space.integrate(V.cwiseProduct(r)));
  }
  return value + space.integrate(p.u0.cwiseProduct(rho.final_slice()));
}

DriftPath optimal_drift(const GraphSpace& space, const Cocycle& omega, const ScalarFieldPath& u) {
  DriftPath d{u.grid, {}};
  d.slices.reserve(u.slices.size());
  for (const Field& uk : u.slices) d.slices.push_back(omega - coboundary(space, uk));
  return d;
}

void validate_density(const GraphSpace& space, const Field& nu) {
  if (nu.size() != space.num_vertices() || !nu.allFinite()) throw ValidationError("density must be finite on every vertex");
  if (!(nu.minCoeff() > 0.0)) throw ValidationError("density must be strictly positive");
  const double mass = space.integrate(nu);
  if (std::abs(mass - 1.0) > 1e-10) throw ValidationError("density must have unit mass, got " + std::to_string(mass));
}

double candidate_value(const ViscousProblem& p, const Field& nu, const DriftPath& drift, double theta) {
  FpOptions opt;
  opt.theta = theta;
  const FpSolution fp = fp_solve(p.space, nu, drift, p.beta, opt);
  return stochastic_value(p, fp.rho, drift, theta);
}

DualityReport duality_check(const ViscousProblem& p, const Field& nu, const DualityOptions& options) {
  validate(p);
  validate_density(p.space, nu);
  DualityReport r;
  if (options.source == ValueSource::kDirectHj) {
    r.u = solve_viscous_hj_direct(p);
  } else {
    r.u = inverse_cole_hopf(mol_solve(p, MolScheme::kCrankNicolson).v, p.beta);
  }
  r.drift = optimal_drift(p.space, p.omega, r.u);
  FpOptions opt;
  opt.theta = options.theta;
  const FpSolution fp = fp_solve(p.space, nu, r.drift, p.beta, opt);
  r.rho = fp.rho;
  r.min_density = fp.min_density;
  r.fp_residual = fp_residual(p.space, r.rho, r.drift, p.beta, options.theta);
  r.rhs = stochastic_value(p, r.rho, r.drift, options.theta);
  r.lhs = p.space.integrate(r.u.initial_slice().cwiseProduct(nu));
  r.gap = r.rhs - r.lhs;
  r.dt = p.grid.dt();
  r.vertices = p.space.num_vertices();
  for (int k = 0; k < p.grid.nodes(); ++k) {
    const Field& rho = r.rho.at(k);
    const double denom = (1.0 + v_norms(p.space, r.u.at(k)).v2) *
                         (p.space.l2_norm(rho) + std::sqrt(p.space.integrate(gamma(p.space, rho, rho))));
    if (denom > 0.0) {
      r.b_rho_constant =
          std::max(r.b_rho_constant, p.space.l2_norm(drift_divergence(p.space, r.drift.at(k), rho)) / denom);
    }
  }
  return r;
}

}  // namespace hjforms
