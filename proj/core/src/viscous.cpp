#include "hjforms/viscous.hpp"

#include "hjforms/error.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace hjforms {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix identity(int n) {
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

class Factorization {
 public:
  explicit Factorization(const SparseMatrix& A) {
    lu_.analyzePattern(A);
    lu_.factorize(A);
    if (lu_.info() != Eigen::Success) throw StepRejected("sparse LU factorization failed");
  }
  Field solve(const Field& b) const {
    Field x = lu_.solve(b);
    if (!x.allFinite()) throw StepRejected("linear solve produced non-finite values");
    return x;
  }

 private:
  Eigen::SparseLU<SparseMatrix> lu_;
};

double sup_norm(const Field& f) { return f.size() ? f.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

void validate(const ViscousProblem& p, double harmonic_tol) {
  const int n = p.space.num_vertices();
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) throw ValidationError("beta must be positive");
  if (p.omega.values.size() != p.space.num_edges()) throw ValidationError("cocycle does not match the graph");
  if (p.u0.size() != n || !p.u0.allFinite()) throw ValidationError("final condition must be finite on every vertex");
  if (p.potential.size() != n) throw ValidationError("potential does not match the graph");
  const HarmonicReport h = is_harmonic(p.space, p.omega, harmonic_tol);
  if (!h.harmonic) {
    throw ValidationError("form is not harmonic: max |div omega| = " + std::to_string(h.max_residual));
  }
}

Field b_operator(const ViscousProblem& p, const Field& v, double t) {
  const Field gh = gamma_hat(p.space, p.omega, p.omega);
  const Field mixed = gamma_hat(p.space, p.omega, coboundary(p.space, v));
  const Field V = p.potential.at(t);
  return (0.5 * p.beta * gh.array() * v.array() + mixed.array() + p.beta * V.array() * v.array()).matrix();
}

SparseMatrix b_matrix(const ViscousProblem& p, double t) {
  const int n = p.space.num_vertices();
  const Field gh = gamma_hat(p.space, p.omega, p.omega);
  const Field V = p.potential.at(t);
  Triplets trip;
  for (int x = 0; x < n; ++x) {
    const double m = p.space.measure()[x];
    double diag = 0.5 * p.beta * gh[x] + p.beta * V[x];
    for (const auto& inc : p.space.incident(x)) {
      const double c = p.space.edge(inc.edge).conductance * p.omega.along(inc) / (2.0 * m);
      trip.emplace_back(x, inc.neighbor, c);
      diag -= c;
    }
    trip.emplace_back(x, x, diag);
  }
  SparseMatrix B(n, n);
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

SparseMatrix generator_matrix(const ViscousProblem& p, double t) {
  return SparseMatrix(p.space.laplacian_matrix() / (2.0 * p.beta) + b_matrix(p, t));
}

std::vector<Field> duhamel_map(const ViscousProblem& p, const HeatSemigroup& heat, int first, int last,
                               const std::vector<Field>& v) {
  const int m = last - first;
  if (m < 0 || static_cast<int>(v.size()) != m + 1) throw ValidationError("duhamel_map: window size mismatch");
  const double dt = p.grid.dt();
  const Field E = heat.decay(dt);
  std::vector<Field> bhat(static_cast<std::size_t>(m + 1));
  for (int i = 0; i <= m; ++i) {
    bhat[static_cast<std::size_t>(i)] = heat.to_spectral(b_operator(p, v[static_cast<std::size_t>(i)], p.grid.time(first + i)));
  }
  std::vector<Field> out(static_cast<std::size_t>(m + 1));
  out[static_cast<std::size_t>(m)] = v[static_cast<std::size_t>(m)];
  Field R = bhat[static_cast<std::size_t>(m)];
  Field G = heat.to_spectral(v[static_cast<std::size_t>(m)]) - 0.5 * dt * bhat[static_cast<std::size_t>(m)];
  for (int i = m - 1; i >= 0; --i) {
    R = bhat[static_cast<std::size_t>(i)] + E.cwiseProduct(R);
    G = E.cwiseProduct(G);
    out[static_cast<std::size_t>(i)] = heat.from_spectral(G + dt * (R - 0.5 * bhat[static_cast<std::size_t>(i)]));
  }
  return out;
}

SchrodingerSolution picard_solve(const ViscousProblem& p, const PicardOptions& opt) {
  validate(p);
  if (!(opt.window > 0.0) || opt.max_iterations < 1 || !(opt.tolerance > 0.0)) {
    throw ValidationError("picard: window, tolerance and iteration cap must be positive");
  }
  const HeatSemigroup heat(p.space, p.beta);
  const int K = p.grid.steps();
  const double dt = p.grid.dt();
  const Field E = heat.decay(dt);

  SchrodingerSolution sol;
  sol.method = "picard";
  std::vector<Field> slices(static_cast<std::size_t>(K + 1));
  slices[static_cast<std::size_t>(K)] = p.v0();
  double width = opt.window;
  int last = K;
  while (last > 0) {
    const int span = std::min(last, std::max(1, static_cast<int>(std::lround(width / dt))));
    const int first = last - span;

    std::vector<Field> v(static_cast<std::size_t>(span + 1));
    Field c = heat.to_spectral(slices[static_cast<std::size_t>(last)]);
    v[static_cast<std::size_t>(span)] = slices[static_cast<std::size_t>(last)];
    for (int i = span - 1; i >= 0; --i) {
      c = E.cwiseProduct(c);
      v[static_cast<std::size_t>(i)] = heat.from_spectral(c);
    }

    PicardWindow win;
    win.first_node = first;
    win.last_node = last;
    win.width = span * dt;
    bool converged = false;
    bool contracting = true;
    for (int it = 0; it < opt.max_iterations; ++it) {
      std::vector<Field> next = duhamel_map(p, heat, first, last, v);
      double update = 0.0;
      double scale = 0.0;
      for (int i = 0; i <= span; ++i) {
        update = std::max(update, sup_norm(next[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)]));
        scale = std::max(scale, sup_norm(next[static_cast<std::size_t>(i)]));
      }
      if (!std::isfinite(update)) {
        contracting = false;
        break;
      }
      v = std::move(next);
      const double threshold = opt.tolerance * std::max(1.0, scale);
      if (!win.updates.empty() && win.updates.back() > 10.0 * threshold) {
        const double ratio = update / win.updates.back();
        win.max_ratio = std::max(win.max_ratio, ratio);
        if (ratio > opt.max_ratio) contracting = false;
      }
      win.updates.push_back(update);
      win.iterations = it + 1;
      if (!contracting) break;
      if (update <= threshold) {
        converged = true;
        break;
      }
    }
    if (!contracting) {
      if (span == 1) throw NoContraction("picard: updates do not contract even on a single time step");
      width = 0.5 * span * dt;
      ++sol.window_halvings;
      continue;
    }
    if (!converged) {
      throw NotConverged("picard: no convergence after " + std::to_string(opt.max_iterations) + " iterations");
    }
    const std::vector<Field> check = duhamel_map(p, heat, first, last, v);
    for (int i = 0; i <= span; ++i) {
      win.residual = std::max(win.residual, sup_norm(check[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)]));
    }
    for (int i = 0; i < span; ++i) {
      const Field& f = v[static_cast<std::size_t>(i)];
      slices[static_cast<std::size_t>(first + i)] = f;
    }
    sol.iterations += win.iterations;
    sol.residual = std::max(sol.residual, win.residual);
    sol.windows.push_back(std::move(win));
    last = first;
  }
  sol.v = ScalarFieldPath(p.grid, std::move(slices));
  return sol;
}

SchrodingerSolution mol_solve(const ViscousProblem& p, MolScheme scheme) {
  validate(p);
  const int n = p.space.num_vertices();
  const int K = p.grid.steps();
  const double dt = p.grid.dt();
  const double theta = scheme == MolScheme::kCrankNicolson ? 0.5 : 1.0;
  const SparseMatrix I = identity(n);

  SchrodingerSolution sol;
  sol.method = scheme == MolScheme::kCrankNicolson ? "mol-crank-nicolson" : "mol-implicit-euler";
  std::vector<Field> slices(static_cast<std::size_t>(K + 1));
  slices[static_cast<std::size_t>(K)] = p.v0();

  const bool autonomous = p.potential.is_autonomous();
  std::unique_ptr<Factorization> cached;
  SparseMatrix explicit_part;
  if (autonomous) {
    const SparseMatrix A = generator_matrix(p, 0.0);
    cached = std::make_unique<Factorization>(SparseMatrix(I - theta * dt * A));
    explicit_part = I + (1.0 - theta) * dt * A;
  }
  for (int k = K - 1; k >= 0; --k) {
    const Field& later = slices[static_cast<std::size_t>(k + 1)];
    Field v;
    if (autonomous) {
      v = cached->solve(explicit_part * later);
    } else {
      const SparseMatrix Ak = generator_matrix(p, p.grid.time(k));
      const SparseMatrix Ak1 = generator_matrix(p, p.grid.time(k + 1));
      const Factorization f(SparseMatrix(I - theta * dt * Ak));
      v = f.solve(later + (1.0 - theta) * dt * (Ak1 * later));
    }
    slices[static_cast<std::size_t>(k)] = std::move(v);
  }
  sol.v = ScalarFieldPath(p.grid, std::move(slices));
  return sol;
}

ScalarFieldPath cole_hopf(const ScalarFieldPath& u, double beta) {
  if (!(beta > 0.0)) throw ValidationError("cole_hopf: beta must be positive");
  std::vector<Field> out;
  out.reserve(u.slices.size());
  for (const Field& f : u.slices) out.push_back((-beta * f.array()).exp().matrix());
  return {u.grid, std::move(out)};
}

ScalarFieldPath inverse_cole_hopf(const ScalarFieldPath& v, double beta) {
  if (!(beta > 0.0)) throw ValidationError("inverse_cole_hopf: beta must be positive");
  std::vector<Field> out;
  out.reserve(v.slices.size());
  for (std::size_t k = 0; k < v.slices.size(); ++k) {
    const Field& f = v.slices[k];
    for (Eigen::Index x = 0; x < f.size(); ++x) {
      if (!(f[x] > 0.0)) {
        throw NonPositive("v is not positive at node " + std::to_string(k) + ", vertex " + std::to_string(x) +
                          " (value " + std::to_string(f[x]) + ")");
      }
    }
    out.push_back((-f.array().log() / beta).matrix());
  }
  return {v.grid, std::move(out)};
}

Field hamiltonian_gradient_term(const GraphSpace& space, const Field& u, const Cocycle& omega) {
  const Cocycle d = coboundary(space, u) - omega;
  return gamma_hat(space, d, d);
}

ScalarFieldPath solve_viscous_hj_direct(const ViscousProblem& p) {
  validate(p);
  const int n = p.space.num_vertices();
  const int K = p.grid.steps();
  const double dt = p.grid.dt();
  const Factorization f(SparseMatrix(identity(n) - (dt / (2.0 * p.beta)) * p.space.laplacian_matrix()));
  std::vector<Field> slices(static_cast<std::size_t>(K + 1));
  slices[static_cast<std::size_t>(K)] = p.u0;
  const double limit = 1e12;
  for (int k = K - 1; k >= 0; --k) {
    const Field& later = slices[static_cast<std::size_t>(k + 1)];
    const Field rhs = later - dt * (0.5 * hamiltonian_gradient_term(p.space, later, p.omega) +
                                    p.potential.at(p.grid.time(k + 1)));
    Field u = f.solve(rhs);
    if (!(sup_norm(u) < limit)) {
      throw StepRejected("direct HJ step at node " + std::to_string(k) + " blew up; reduce dt");
    }
    slices[static_cast<std::size_t>(k)] = std::move(u);
  }
  return {p.grid, std::move(slices)};
}

SparseMatrix twisted_laplacian(const CoverWindow& cover, TwistConvention convention) {
  const GraphSpace& base = cover.base();
  const int n = base.num_vertices();
  const std::vector<int> zero = cover.fundamental_domain();
  std::vector<int> deck_of_edge(static_cast<std::size_t>(base.num_edges()), -1);
  for (int j = 0; j < cover.rank(); ++j) deck_of_edge[static_cast<std::size_t>(cover.deck_chords()[static_cast<std::size_t>(j)])] = j;
  const double beta = cover.beta();

  Triplets trip;
  Field diag = Field::Zero(n);
  for (int e = 0; e < base.num_edges(); ++e) {
    const Edge& ed = base.edge(e);
    const int j = deck_of_edge[static_cast<std::size_t>(e)];
    // phi(head lift) - phi(tail lift), with the head on the shifted sheet for deck chords.
    const double rise = cover.phi()[zero[static_cast<std::size_t>(ed.head)]] + (j >= 0 ? cover.periods()[j] : 0.0) -
                        cover.phi()[zero[static_cast<std::size_t>(ed.tail)]];
    double tail_factor = 1.0;
    double head_factor = 1.0;
    if (convention == TwistConvention::kMidpoint) {
      tail_factor = std::exp(beta * rise);
      head_factor = std::exp(-beta * rise);
    } else {
      head_factor = std::exp(-2.0 * beta * rise);
    }
    const double wa = ed.conductance * tail_factor / base.measure()[ed.tail];
    const double wb = ed.conductance * head_factor / base.measure()[ed.head];
    trip.emplace_back(ed.tail, ed.head, wa);
    trip.emplace_back(ed.head, ed.tail, wb);
    diag[ed.tail] -= wa;
    diag[ed.head] -= wb;
  }
  for (int x = 0; x < n; ++x) trip.emplace_back(x, x, diag[x]);
  SparseMatrix L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

GradientFlowSolution gradient_flow_solve(const ViscousProblem& p, const CoverWindow& cover,
                                         TwistConvention convention) {
  validate(p);
  if (!p.potential.is_autonomous()) throw ValidationError("gradient flow needs a time-independent potential");
  if (cover.base().num_vertices() != p.space.num_vertices() || cover.base().num_edges() != p.space.num_edges()) {
    throw ValidationError("cover was built over a different graph");
  }
  if (std::abs(cover.beta() - p.beta) > 0.0) throw ValidationError("cover was built with a different beta");
  const int n = p.space.num_vertices();
  const int K = p.grid.steps();
  const double tau = p.grid.dt();
  const Field V = p.potential.at(0.0);
  const double sup_v = sup_norm(V);
  if (!(1.0 / (2.0 * tau) > p.beta * sup_v)) {
    throw ValidationError("gradient flow step tau = " + std::to_string(tau) + " violates 1/(2 tau) > beta sup|V|");
  }
  const Field gh = gamma_hat(p.space, p.omega, p.omega);
  const Field zeroth = p.beta * V + 0.5 * p.beta * gh;
  if (!(1.0 / tau > zeroth.maxCoeff())) {
    throw ValidationError("gradient flow step tau = " + std::to_string(tau) +
                          " violates 1/tau > beta max(V + Gamma^(omega,omega)/2)");
  }

  SparseMatrix A = identity(n) / tau - twisted_laplacian(cover, convention) / (2.0 * p.beta);
  for (int x = 0; x < n; ++x) A.coeffRef(x, x) -= zeroth[x];
  const Factorization f(A);

  GradientFlowSolution out;
  out.tau = tau;
  out.d5 = 2.0 * p.beta * sup_v + 1e-9;
  out.forward.reserve(static_cast<std::size_t>(K + 1));
  out.forward.push_back(p.v0());
  for (int k = 0; k < K; ++k) {
    const Field& w = out.forward.back();
    Field next = f.solve(w / tau);
    if (!(next.minCoeff() > 0.0)) {
      throw StepRejected("gradient flow lost positivity at step " + std::to_string(k + 1));
    }
    out.steps.push_back({w.minCoeff(), next.minCoeff()});
    out.forward.push_back(std::move(next));
  }
  std::vector<Field> slices(out.forward.rbegin(), out.forward.rend());
  out.solution.method = "gradient-flow";
  out.solution.v = ScalarFieldPath(p.grid, std::move(slices));
  return out;
}

double gradient_flow_functional(const ViscousProblem& p, const CoverWindow& cover, const Field& w,
                                const Field& previous, double tau) {
  const GraphSpace& lifted = cover.lifted();
  if (w.size() != lifted.num_vertices() || previous.size() != lifted.num_vertices()) {
    throw ValidationError("functional: fields must live on the cover window");
  }
  const Field mhat = cover.weighted_measure();
  const Field V = cover.lift_field(p.potential.at(0.0));
  const Field gh = cover.lift_field(gamma_hat(p.space, p.omega, p.omega));
  const double beta = p.beta;
  double g = 0.0;
  for (int v = 0; v < lifted.num_vertices(); ++v) {
    const double d = w[v] - previous[v];
    g += (d * d / (2.0 * tau) - 0.5 * beta * V[v] * w[v] * w[v] - 0.25 * beta * gh[v] * w[v] * w[v]) * mhat[v];
  }
  // Edge energy with the midpoint weight e^{beta (phi(x) + phi(y))}.
  for (const auto& e : lifted.edges()) {
    const double d = w[e.head] - w[e.tail];
    g += e.conductance * std::exp(beta * (cover.phi()[e.head] + cover.phi()[e.tail])) * d * d / (4.0 * beta);
  }
  return g;
}

BoundEnvelopes bound_envelopes(const GraphSpace& space, const ScalarFieldPath& v, double beta) {
  const ScalarFieldPath u = inverse_cole_hopf(v, beta);
  const int nodes = static_cast<int>(v.slices.size());
  BoundEnvelopes env{Field(nodes), Field(nodes), Field(nodes)};
  double d1 = 0.0;
  double grad = 0.0;
  double d2 = 1.0;
  for (int j = 0; j < nodes; ++j) {
    const int k = nodes - 1 - j;
    const Field& uk = u.at(k);
    const Field& vk = v.at(k);
    d1 = std::max(d1, sup_norm(uk));
    grad = std::max(grad, std::sqrt(sup_norm(gamma(space, uk, uk))));
    d2 = std::max({d2, vk.maxCoeff(), 1.0 / vk.minCoeff()});
    env.d1[j] = d1;
    env.gradient[j] = grad;
    env.d2[j] = d2;
  }
  return env;
}

}  // namespace hjforms
