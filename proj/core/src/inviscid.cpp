#include "hjforms/inviscid.hpp"

#include "hjforms/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hjforms {

namespace {

double step_length(const InviscidProblem& p, int e) {
  return p.step_lengths.empty() ? p.space.hop_distance(e) : p.step_lengths[static_cast<std::size_t>(e)];
}

}  // namespace

void validate(const InviscidProblem& p) {
  const int n = p.space.num_vertices();
  if (p.omega.values.size() != p.space.num_edges()) throw ValidationError("cocycle does not match the graph");
  if (p.final_condition.size() != n || !p.final_condition.allFinite()) {
    throw ValidationError("final condition must be a finite field on every vertex");
  }
  if (p.potential.size() != n) throw ValidationError("potential does not match the graph");
  if (!p.step_lengths.empty() && static_cast<int>(p.step_lengths.size()) != p.space.num_edges()) {
    throw ValidationError("step lengths do not match the edges");
  }
}

ValueTable solve_value(const InviscidProblem& p) {
  validate(p);
  const int n = p.space.num_vertices();
  const int K = p.grid.steps();
  const double dt = p.grid.dt();
  std::vector<double> kinetic(static_cast<std::size_t>(p.space.num_edges()));
  for (int e = 0; e < p.space.num_edges(); ++e) {
    const double d = step_length(p, e);
    kinetic[static_cast<std::size_t>(e)] = d * d / (2.0 * dt);
  }

  ValueTable table;
  std::vector<Field> slices(static_cast<std::size_t>(K + 1));
  table.next.assign(static_cast<std::size_t>(K), std::vector<int>(static_cast<std::size_t>(n)));
  slices[static_cast<std::size_t>(K)] = p.final_condition;
  for (int k = K - 1; k >= 0; --k) {
    const Field& later = slices[static_cast<std::size_t>(k + 1)];
    const Field V = p.potential.at(p.grid.time(k));
    Field u(n);
    auto& next = table.next[static_cast<std::size_t>(k)];
    for (int x = 0; x < n; ++x) {
      double best = later[x];
      int arg = x;
      for (const auto& inc : p.space.incident(x)) {
        const double c = kinetic[static_cast<std::size_t>(inc.edge)] - p.omega.along(inc) + later[inc.neighbor];
        if (c < best || (c == best && inc.neighbor < arg)) {
          best = c;
          arg = inc.neighbor;
        }
      }
      u[x] = best - V[x] * dt;
      next[static_cast<std::size_t>(x)] = arg;
    }
    slices[static_cast<std::size_t>(k)] = std::move(u);
  }
  table.u = ScalarFieldPath(p.grid, std::move(slices));
  return table;
}

VertexPath extract_minimizer(const ValueTable& table, int start) { return extract_minimizer(table, start, 0); }

VertexPath extract_minimizer(const ValueTable& table, int start, int k) {
  const int K = static_cast<int>(table.next.size());
  if (k < 0 || k > K) throw ValidationError("extract_minimizer: node out of range");
  if (start < 0 || start >= static_cast<int>(table.u.at(0).size())) {
    throw ValidationError("extract_minimizer: start vertex out of range");
  }
  VertexPath path{{start}};
  int x = start;
  for (int j = k; j < K; ++j) {
    x = table.next[static_cast<std::size_t>(j)][static_cast<std::size_t>(x)];
    path.vertices.push_back(x);
  }
  return path;
}

double action(const InviscidProblem& p, const VertexPath& path, int k) {
  validate(p);
  validate_path(p.space, path);
  if (static_cast<int>(path.vertices.size()) != p.grid.steps() - k + 1) {
    throw ValidationError("action: path needs one vertex per remaining node");
  }
  const double dt = p.grid.dt();
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < path.vertices.size(); ++i) {
    const int x = path.vertices[i];
    const int y = path.vertices[i + 1];
    if (x != y) {
      const int e = *p.space.find_edge(x, y);
      const double d = step_length(p, e);
      a += d * d / (2.0 * dt) - p.omega.at(p.space, x, y);
    }
    a -= p.potential.at(p.grid.time(k + static_cast<int>(i)))[x] * dt;
  }
  return a + p.final_condition[path.vertices.back()];
}

InviscidProblem lift_problem(const InviscidProblem& p, const CoverWindow& cover) {
  validate(p);
  if (cover.base().num_vertices() != p.space.num_vertices() || cover.base().num_edges() != p.space.num_edges()) {
    throw ValidationError("cover was built over a different graph");
  }
  cover.require_reach(p.grid.steps());
  const GraphSpace& lifted = cover.lifted();
  std::vector<double> lengths(static_cast<std::size_t>(lifted.num_edges()));
  for (int e = 0; e < lifted.num_edges(); ++e) lengths[static_cast<std::size_t>(e)] = step_length(p, cover.base_edge(e));

  Potential potential;
  if (p.potential.is_autonomous()) {
    potential = Potential::autonomous(cover.lift_field(p.potential.at(0.0)));
  } else {
    const Potential base = p.potential;
    const int n = p.space.num_vertices();
    const int lifted_n = cover.num_vertices();
    potential = Potential::time_dependent(lifted_n, [base, n, lifted_n](double t) {
      const Field f = base.at(t);
      Field out(lifted_n);
      for (int v = 0; v < lifted_n; ++v) out[v] = f[v % n];
      return out;
    });
  }
  return {lifted, Cocycle::zero(lifted), potential, cover.lift_field(p.final_condition) - cover.phi(), p.grid, lengths};
}

double cover_equivalence_check(const InviscidProblem& p, const CoverWindow& cover) {
  const ValueTable base = solve_value(p);
  const ValueTable up = solve_value(lift_problem(p, cover));
  const std::vector<int> domain = cover.fundamental_domain();
  double worst = 0.0;
  for (int k = 0; k < p.grid.nodes(); ++k) {
    for (int x = 0; x < p.space.num_vertices(); ++x) {
      const int v = domain[static_cast<std::size_t>(x)];
      worst = std::max(worst, std::abs(up.u.at(k)[v] + cover.phi()[v] - base.u.at(k)[x]));
    }
  }
  return worst;
}

bool comparison_test(const InviscidProblem& minus, const InviscidProblem& plus) {
  validate(minus);
  validate(plus);
  if (minus.space.num_vertices() != plus.space.num_vertices() ||
      minus.grid.steps() != plus.grid.steps() || minus.grid.dt() != plus.grid.dt() ||
      minus.omega.values != plus.omega.values) {
    throw ValidationError("comparison_test: problems differ beyond their final conditions");
  }
  if ((minus.final_condition.array() > plus.final_condition.array()).any()) {
    throw ValidationError("comparison_test: final conditions are not ordered");
  }
  const ValueTable a = solve_value(minus);
  const ValueTable b = solve_value(plus);
  for (int k = 0; k < minus.grid.nodes(); ++k) {
    if ((a.u.at(k).array() > b.u.at(k).array() + 1e-12).any()) return false;
  }
  return true;
}

double continuity_modulus(const GraphSpace& space, const ValueTable& table) {
  double worst = 0.0;
  for (const Field& u : table.u.slices) {
    for (const auto& e : space.edges()) worst = std::max(worst, std::abs(u[e.head] - u[e.tail]));
  }
  return worst;
}

}  // namespace hjforms
