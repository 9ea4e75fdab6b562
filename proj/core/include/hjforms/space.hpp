#pragma once

#include "hjforms/fields.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace hjforms {

/// Unordered edge stored with a reference orientation tail -> head.
struct Edge {
  int tail = 0;
  int head = 0;
  double length = 1.0;
  double conductance = 1.0;
};

/// Edge seen from one of its endpoints. `sign` is +1 when the vertex is the
/// tail, -1 when it is the head, so an edge value w.r.t. the outgoing
/// orientation is sign * value.
struct Incidence {
  int edge = 0;
  int neighbor = 0;
  double sign = 1.0;
};

/// Finite weighted graph carrying a vertex measure; the discrete metric
/// measure space. Immutable after construction.
///
/// Invariants checked at construction: connected, no loops or parallel edges,
/// strictly positive lengths, conductances and masses, and (unless
/// `probability_measure` is false) total mass one to 1e-12.
class GraphSpace {
 public:
  GraphSpace(int num_vertices, std::vector<Edge> edges, Field measure,
             std::vector<std::vector<int>> faces = {}, bool probability_measure = true);

  /// Uniform N-cycle of total length L with normalized arc-length measure:
  /// lengths h = L/N, masses 1/N, conductances 1/(hL). Vertex i sits at i*h.
  static GraphSpace cycle(int n, double length = 1.0);
  /// Uniform path with n vertices over [0, L]; masses 1/n.
  static GraphSpace path(int n, double length = 1.0);
  /// nx-by-ny periodic grid; every unit square is a declared face.
  static GraphSpace torus(int nx, int ny, double length_x = 1.0, double length_y = 1.0);

  int num_vertices() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_.at(static_cast<std::size_t>(e)); }
  const Field& measure() const { return measure_; }
  std::span<const Incidence> incident(int x) const;
  std::optional<int> find_edge(int x, int y) const;
  /// Contractible cycles, each a closed vertex sequence (last vertex adjacent to first).
  const std::vector<std::vector<int>>& faces() const { return faces_; }
  /// Vertex coordinates for built-in families (arc length on cycle/path); empty otherwise.
  const std::vector<double>& coordinates() const { return coordinates_; }
  /// Total length for built-in one-dimensional families, 0 otherwise.
  double period_length() const { return period_length_; }

  /// Shortest-path distance between the endpoints of edge e (cached).
  double hop_distance(int e) const { return hop_distance_[static_cast<std::size_t>(e)]; }
  /// Dijkstra from x over edge lengths.
  Field distances_from(int x) const;
  double distance(int x, int y) const;

  /// Symmetric matrix S with S(x,y) = w(xy), S(x,x) = -sum_y w(xy);
  /// the Laplacian is M^{-1} S.
  const Eigen::SparseMatrix<double>& stiffness() const { return *stiffness_; }
  Eigen::SparseMatrix<double> laplacian_matrix() const;

  /// sum_x f(x) m(x) in vertex order.
  double integrate(const Field& f) const;
  double l2_norm(const Field& f) const;
  /// sqrt( sum (f^2 + Gamma(f,f)) m ).
  double energy_norm(const Field& f) const;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  Field measure_;
  std::vector<std::vector<int>> faces_;
  std::vector<int> incidence_offset_;
  std::vector<Incidence> incidence_;
  std::vector<double> hop_distance_;
  std::vector<double> coordinates_;
  double period_length_ = 0.0;
  std::shared_ptr<const Eigen::SparseMatrix<double>> stiffness_;
};

/// Carré du champ: (1/(2 m(x))) sum_y w(xy) (f(y)-f(x)) (g(y)-g(x)).
Field gamma(const GraphSpace& space, const Field& f, const Field& g);

/// Delta f(x) = (1/m(x)) sum_y w(xy) (f(y) - f(x)).
Field laplacian(const GraphSpace& space, const Field& f);

enum class HeatBackend { kSpectral, kImplicitEuler };

/// Spectral calculus for the heat semigroup e^{(tau/(2 beta)) Delta}.
/// Eigenvectors are orthonormal in L^2(m).
class HeatSemigroup {
 public:
  HeatSemigroup(const GraphSpace& space, double beta);

  /// e^{(tau / (2 beta)) Delta} f. Throws ValidationError for tau < 0.
  Field apply(const Field& f, double tau) const;

  /// Eigenvalues of Delta (non-positive, ascending in magnitude order of Eigen's solver).
  const Field& eigenvalues() const { return eigenvalues_; }
  double beta() const { return beta_; }
  /// Coefficients c with f = sum_i c_i e_i.
  Field to_spectral(const Field& f) const { return analysis_ * f; }
  Field from_spectral(const Field& c) const { return synthesis_ * c; }
  /// Per-mode decay factor over duration tau.
  Field decay(double tau) const;

 private:
  double beta_;
  Field eigenvalues_;
  Eigen::MatrixXd analysis_;
  Eigen::MatrixXd synthesis_;
};

struct HeatOptions {
  HeatBackend backend = HeatBackend::kSpectral;
  /// Implicit-Euler substep count; 0 selects it from `splitting_tolerance`.
  int substeps = 0;
  double splitting_tolerance = 1e-8;
  int max_substeps = 200000;
};

/// Forward heat flow over duration tau >= 0 with viscosity beta > 0.
Field heat_flow(const GraphSpace& space, const Field& f, double tau, double beta,
                const HeatOptions& options = {});

/// Smallest substep count eta whose worst-case implicit-Euler error
/// sup_{0<=x<=X} |e^{-x} - (1+x/eta)^{-eta}| is below `tolerance`, where X is
/// the Gershgorin bound on (tau/(2 beta)) |Delta|. Capped at `max_substeps`.
int implicit_euler_substeps(const GraphSpace& space, double tau, double beta, double tolerance,
                            int max_substeps);

struct VNorms {
  double linf = 0.0;
  double gamma_linf = 0.0;
  double laplacian_linf = 0.0;
  double v1 = 0.0;  ///< sqrt(|f|_inf^2 + |Gamma(f,f)|_inf)
  double v2 = 0.0;  ///< sqrt(v1^2 + |Delta f|_inf^2)
};

VNorms v_norms(const GraphSpace& space, const Field& f);

/// |Delta eta(f) - eta'(f) Delta f - eta''(f) Gamma(f,f)|_inf. Vanishes only
/// in the mesh limit.
double chain_rule_defect(const GraphSpace& space, const Field& f,
                         const std::function<double(double)>& eta,
                         const std::function<double(double)>& d_eta,
                         const std::function<double(double)>& d2_eta);

/// max over probes of sqrt(tau) |P_tau f|_{energy} / |f|_{L2}: the empirical
/// constant of the short-time smoothing bound.
double smoothing_constant(const GraphSpace& space, const HeatSemigroup& heat, double tau,
                          std::span<const Field> probes);

}  // namespace hjforms
