#pragma once

#include "hjforms/cover.hpp"
#include "hjforms/fields.hpp"
#include "hjforms/forms.hpp"
#include "hjforms/space.hpp"

#include <vector>

namespace hjforms {

/// Deterministic control problem with Lagrangian |x'|^2/2 - V and the
/// homological term -omega, final condition g at t = 0.
struct InviscidProblem {
  GraphSpace space;
  Cocycle omega;
  Potential potential;
  Field final_condition;
  TimeGrid grid;
  /// Per-edge step length used in the kinetic cost; empty means the graph
  /// distance between the endpoints.
  std::vector<double> step_lengths;
};

void validate(const InviscidProblem& problem);

struct ValueTable {
  ScalarFieldPath u;
  /// next[k][x]: vertex chosen at node k from x (x itself for a stay).
  std::vector<std::vector<int>> next;
};

/// Backward Bellman recursion over stay and one-edge moves:
/// u_k(x) = min_y d(x,y)^2/(2 dt) - omega(x->y) - V(t_k,x) dt + u_{k+1}(y).
/// Exact ties go to the smallest vertex index.
ValueTable solve_value(const InviscidProblem& problem);

/// Follows backpointers from node 0.
VertexPath extract_minimizer(const ValueTable& table, int start);
/// Same, from node k.
VertexPath extract_minimizer(const ValueTable& table, int start, int k);

/// Discrete augmented action of a path with one vertex per node, starting at node k.
double action(const InviscidProblem& problem, const VertexPath& path, int k = 0);

/// Lifts the problem to the cover, drops omega, uses g o sigma - phi as final
/// condition and returns max |v + phi - u| over the zero sheet and all nodes.
/// Throws WindowExceeded when the window is too small for the horizon.
double cover_equivalence_check(const InviscidProblem& problem, const CoverWindow& cover);

/// The lifted problem used by cover_equivalence_check.
InviscidProblem lift_problem(const InviscidProblem& problem, const CoverWindow& cover);

/// True when u_minus <= u_plus + 1e-12 at every node. Throws ValidationError
/// unless g_minus <= g_plus and the problems agree otherwise.
bool comparison_test(const InviscidProblem& minus, const InviscidProblem& plus);

/// max over nodes and edges of |u(t,x) - u(t,y)|.
double continuity_modulus(const GraphSpace& space, const ValueTable& table);

}  // namespace hjforms
