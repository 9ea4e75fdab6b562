#pragma once

#include "hjforms/fields.hpp"
#include "hjforms/space.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace hjforms {

/// Antisymmetric edge function: `values[e]` is the value on edge e traversed
/// tail -> head; the reverse traversal carries the opposite sign.
struct Cocycle {
  Field values;

  static Cocycle zero(const GraphSpace& space) { return {Field::Zero(space.num_edges())}; }
  /// c times the edge length along each reference orientation. On the
  /// built-in cycle this is the constant form c dx.
  static Cocycle constant(const GraphSpace& space, double c);

  double along(const Incidence& inc) const { return inc.sign * values[inc.edge]; }
  /// omega(x, y); throws ValidationError when x and y are not adjacent.
  double at(const GraphSpace& space, int x, int y) const;
};

Cocycle operator+(const Cocycle& a, const Cocycle& b);
Cocycle operator-(const Cocycle& a, const Cocycle& b);
Cocycle operator*(double s, const Cocycle& a);

/// Exact form df(x, y) = f(y) - f(x).
Cocycle coboundary(const GraphSpace& space, const Field& f);

/// Sequence of vertices, consecutive entries adjacent. A single vertex is a
/// constant path.
struct VertexPath {
  std::vector<int> vertices;
};

void validate_path(const GraphSpace& space, const VertexPath& path);
double path_length(const GraphSpace& space, const VertexPath& path);
/// Concatenation; `b` must start where `a` ends.
VertexPath concatenate(const VertexPath& a, const VertexPath& b);

/// Local primitive on a connected vertex subset; `values[i]` is the primitive
/// at `vertices[i]`.
struct Chart {
  std::vector<int> vertices;
  Field values;
};

struct ChartForm {
  std::vector<Chart> charts;
};

/// Checks that the charts cover every vertex, induce connected subgraphs, and
/// that f_i - f_j is constant on each component of every induced intersection.
void validate_chart_form(const GraphSpace& space, const ChartForm& form, double tol = 1e-12);

/// Edge-by-edge coboundary of the local primitives. Throws ChartGap when an
/// edge lies in no chart.
Cocycle to_cocycle(const GraphSpace& space, const ChartForm& form);

/// Star charts {x} u N(x) with f_x(y) = omega(x, y); an uncovered star
/// (non-closed triangle) falls back to one chart per edge.
ChartForm to_chart_form(const GraphSpace& space, const Cocycle& omega);

/// Segment [first, last] of a path (vertex positions) evaluated in one chart.
struct PathSegment {
  int first = 0;
  int last = 0;
  int chart = 0;
};

double integrate(const GraphSpace& space, const Cocycle& omega, const VertexPath& path);
/// Greedy maximal-segment adapted partition. Throws ChartGap.
double integrate(const GraphSpace& space, const ChartForm& form, const VertexPath& path);
std::vector<PathSegment> greedy_partition(const GraphSpace& space, const ChartForm& form,
                                          const VertexPath& path);
/// Random adapted partition: random break points and random admissible charts.
std::vector<PathSegment> random_partition(const GraphSpace& space, const ChartForm& form,
                                          const VertexPath& path, std::mt19937_64& rng);
/// Sum over segments of f_chart(last) - f_chart(first); validates adaptedness.
double integrate_partition(const GraphSpace& space, const ChartForm& form, const VertexPath& path,
                           std::span<const PathSegment> partition);

/// BFS spanning tree from vertex 0 plus chords in edge order. Basis cycle j
/// traverses chord j tail -> head and returns along the tree.
struct CycleBasis {
  std::vector<int> parent_edge;  ///< -1 at the root
  std::vector<int> parent;       ///< -1 at the root
  std::vector<int> bfs_order;
  std::vector<int> chords;
  std::vector<VertexPath> cycles;

  int rank() const { return static_cast<int>(chords.size()); }
};

CycleBasis cycle_basis(const GraphSpace& space);

/// Primitive of omega along the spanning tree, zero at the root.
Field tree_primitive(const GraphSpace& space, const CycleBasis& basis, const Cocycle& omega);

/// Circulation of omega on each basis cycle.
Field periods(const GraphSpace& space, const Cocycle& omega, const CycleBasis& basis);

/// Net signed traversal count of each chord along a path.
Eigen::VectorXi chord_crossings(const GraphSpace& space, const CycleBasis& basis, const VertexPath& path);

/// max over declared faces of |circulation|.
double closure_defect(const GraphSpace& space, const Cocycle& omega);

/// True iff omega_1 - omega_2 has all periods below `tol`.
bool equivalent(const GraphSpace& space, const Cocycle& a, const Cocycle& b, double tol = 1e-10);

/// max_e |omega(e)| / length(e); bounds |integral| by C * path length.
double path_bound_constant(const GraphSpace& space, const Cocycle& omega);

/// (1/(2 m(x))) sum_y w(xy) a(x,y) b(x,y).
Field gamma_hat(const GraphSpace& space, const Cocycle& a, const Cocycle& b);

/// (1/m(x)) sum_y w(xy) omega(x,y); the Laplacian of any local primitive.
Field divergence(const GraphSpace& space, const Cocycle& omega);

struct HarmonicReport {
  bool harmonic = false;
  double max_residual = 0.0;
  Field residual;
};

HarmonicReport is_harmonic(const GraphSpace& space, const Cocycle& omega, double tol = 1e-10);

/// omega + dh with Delta h = -div omega (one Poisson solve, h pinned at vertex 0).
Cocycle harmonic_representative(const GraphSpace& space, const Cocycle& omega);

struct HypothesisReport {
  double gamma_hat_linf = 0.0;
  double gamma_hat_v1 = 0.0;  ///< |Gamma_hat(omega,omega)|_{V^1_inf}
  double d5_estimate = 0.0;   ///< max probe ratio |Gamma_hat(omega,dv)|_{V^1} / |v|_{V^2}
  int d5_argmax = -1;
  Field d5_probe;
  double sup_v = 0.0;
  double v_lipschitz_space = 0.0;
  double v_lipschitz_time = 0.0;
  double harmonic_residual = 0.0;
  double closure_defect = 0.0;
  /// Largest tau with 1/(2 tau) > beta sup|V| (infinite when V = 0).
  double gradient_flow_tau_bound = 0.0;
  /// Gershgorin bound on the twisted Schrodinger generator; explicit steps
  /// need dt below its inverse, implicit schemes use it for conditioning.
  double generator_bound = 0.0;
};

HypothesisReport check_hypotheses(const GraphSpace& space, const Cocycle& omega, const Potential& potential,
                                  const TimeGrid& grid, double beta, int probes = 200,
                                  std::uint64_t seed = 1);

}  // namespace hjforms
