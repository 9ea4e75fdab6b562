#pragma once

#include "hjforms/cover.hpp"
#include "hjforms/fields.hpp"
#include "hjforms/forms.hpp"
#include "hjforms/space.hpp"

#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace hjforms {

/// Viscous HJ problem backward in time from u0 at t = 0. The Cole-Hopf
/// variable v = exp(-beta u) solves the twisted Schrodinger equation
/// dv/dt + (1/(2 beta)) Delta v + B_t(v) = 0.
struct ViscousProblem {
  GraphSpace space;
  Cocycle omega;
  Potential potential;
  double beta = 1.0;
  Field u0;
  TimeGrid grid;

  Field v0() const { return (-beta * u0.array()).exp().matrix(); }
};

/// Checks sizes, beta > 0 and harmonicity of omega to `harmonic_tol`.
void validate(const ViscousProblem& problem, double harmonic_tol = 1e-10);

/// B_t(v) = (beta/2) Gamma^(omega,omega) v + Gamma^(omega, dv) + beta V(t) v.
Field b_operator(const ViscousProblem& problem, const Field& v, double t);
/// Matrix of B_t.
Eigen::SparseMatrix<double> b_matrix(const ViscousProblem& problem, double t);
/// Matrix of (1/(2 beta)) Delta + B_t.
Eigen::SparseMatrix<double> generator_matrix(const ViscousProblem& problem, double t);

struct PicardWindow {
  int first_node = 0;  ///< earliest node of the window
  int last_node = 0;   ///< latest node, fixed by the previous window
  double width = 0.0;
  int iterations = 0;
  std::vector<double> updates;  ///< sup-norm update per iteration
  double max_ratio = 0.0;       ///< largest successive update ratio
  double residual = 0.0;        ///< |Phi(v) - v| at acceptance
};

struct SchrodingerSolution {
  ScalarFieldPath v;
  std::string method;
  int iterations = 0;
  double residual = 0.0;
  std::vector<PicardWindow> windows;
  /// Windows abandoned because their updates did not contract.
  int window_halvings = 0;
};

struct PicardOptions {
  double window = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 200;
  /// Largest accepted successive-update ratio.
  double max_ratio = 0.5;
};

/// Fixed point of the trapezoid-quadrature Duhamel map on successive windows
/// going back from t = 0. A window whose updates do not contract is retried
/// at half width. Throws NoContraction at single-step width and NotConverged
/// after max_iterations.
SchrodingerSolution picard_solve(const ViscousProblem& problem, const PicardOptions& options = {});

/// One pass of the Duhamel map on a single window, exposed for testing:
/// returns Phi(v) on nodes [first, last] with v[last] held fixed.
std::vector<Field> duhamel_map(const ViscousProblem& problem, const HeatSemigroup& heat, int first, int last,
                               const std::vector<Field>& v);

enum class MolScheme { kImplicitEuler, kCrankNicolson };

/// Method of lines with sparse LU solves per step.
SchrodingerSolution mol_solve(const ViscousProblem& problem, MolScheme scheme = MolScheme::kCrankNicolson);

/// v = exp(-beta u).
ScalarFieldPath cole_hopf(const ScalarFieldPath& u, double beta);
/// u = -(1/beta) log v. Throws NonPositive naming the first offending node.
ScalarFieldPath inverse_cole_hopf(const ScalarFieldPath& v, double beta);

/// Gamma^(du - omega, du - omega).
Field hamiltonian_gradient_term(const GraphSpace& space, const Field& u, const Cocycle& omega);

/// Semi-implicit stepping of the HJ equation: implicit in Delta, explicit in
/// the Gamma^ term. Throws StepRejected on blow-up.
ScalarFieldPath solve_viscous_hj_direct(const ViscousProblem& problem);

enum class TwistConvention { kMidpoint, kLeft };

struct GradientFlowStep {
  double inf_before = 0.0;
  double inf_after = 0.0;
};

struct GradientFlowSolution {
  SchrodingerSolution solution;
  /// Forward minimizing-movement iterates w_0 = v0, ..., w_K.
  std::vector<Field> forward;
  std::vector<GradientFlowStep> steps;
  double d5 = 0.0;
  double tau = 0.0;
};

/// Twisted Laplacian on base vertices: edge weights e^{2 beta phi} on the cover
/// restricted to deck-invariant fields.
Eigen::SparseMatrix<double> twisted_laplacian(const CoverWindow& cover, TwistConvention convention);

/// Minimizing-movement scheme for the functional on the weighted cover.
/// Runs forward with step tau = grid.dt() and reverses onto the grid.
/// Requires autonomous V, harmonic omega, 1/(2 tau) > beta sup|V| and
/// 1/tau > beta max(V + Gamma^(omega,omega)/2).
GradientFlowSolution gradient_flow_solve(const ViscousProblem& problem, const CoverWindow& cover,
                                         TwistConvention convention = TwistConvention::kMidpoint);

/// G_n(w) evaluated on the cover window, for cross-checks against the base
/// linear system.
double gradient_flow_functional(const ViscousProblem& problem, const CoverWindow& cover, const Field& w_lifted,
                                const Field& previous_lifted, double tau);

struct BoundEnvelopes {
  Field d1;        ///< running max of |u_s|_inf
  Field gradient;  ///< running max of |Gamma(u_s,u_s)|_inf^(1/2)
  Field d2;        ///< running max of max(sup v_s, 1/inf v_s)
};

/// Envelopes indexed by node distance from t = 0 (entry j is node K - j).
BoundEnvelopes bound_envelopes(const GraphSpace& space, const ScalarFieldPath& v, double beta);

}  // namespace hjforms
