#pragma once

#include "hjforms/fields.hpp"
#include "hjforms/forms.hpp"
#include "hjforms/space.hpp"
#include "hjforms/viscous.hpp"

#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace hjforms {

/// Density path with respect to m; node k of the grid.
using MeasurePath = ScalarFieldPath;

/// One drift cocycle per grid node.
struct DriftPath {
  TimeGrid grid;
  std::vector<Cocycle> slices;

  const Cocycle& at(int k) const { return slices.at(static_cast<std::size_t>(k)); }
};

/// sum_x Gamma^(a, b)(x) rho(x) m(x).
double drift_inner(const GraphSpace& space, const Cocycle& a, const Cocycle& b, const Field& rho);
/// Trapezoid in time of the slice products.
double drift_inner(const GraphSpace& space, const DriftPath& a, const DriftPath& b, const MeasurePath& rho);
/// dt times the trapezoid weight of node k on a grid with K steps.
double trapezoid_weight(const TimeGrid& grid, int k);

/// D*(Y rho)(x) = -(1/(2 m(x))) sum_y w(xy) Y(x,y) (rho(x) + rho(y)): the
/// adjoint of phi -> <d phi, Y>_rho in L^2(m).
Field drift_divergence(const GraphSpace& space, const Cocycle& drift, const Field& rho);
/// Matrix of rho -> D*(Y rho).
Eigen::SparseMatrix<double> drift_divergence_matrix(const GraphSpace& space, const Cocycle& drift);

struct FpOptions {
  /// Time level of the drift term: 0 explicit, 1/2 midpoint.
  double theta = 0.5;
  double mass_tolerance = 1e-10;
  double positivity_floor = -1e-9;
};

/// Forward step of the Fokker-Planck equation d rho = (1/(2 beta)) Delta rho + D*(Y rho),
/// implicit in the Laplacian, drift at level theta. Throws MassDrift.
Field fp_step(const GraphSpace& space, const Field& rho, const Cocycle& drift_now, const Cocycle& drift_next,
              double dt, double beta, const FpOptions& options = {});

struct FpSolution {
  MeasurePath rho;
  double min_density = 0.0;
  /// Set when some density fell below the positivity floor; a smaller dt helps.
  bool positivity_loss = false;
  double max_mass_error = 0.0;
};

/// Solves forward from rho0 at the first grid node to t = 0.
FpSolution fp_solve(const GraphSpace& space, const Field& rho0, const DriftPath& drift, double beta,
                    const FpOptions& options = {});

/// Max over steps of the sup-norm residual of the discrete equation.
double fp_residual(const GraphSpace& space, const MeasurePath& rho, const DriftPath& drift, double beta,
                   double theta);

/// 1/2 <Y,Y> - <omega,Y> - int int V rho + int u0 rho_final. Throws
/// ValidationError when (rho, Y) fails the discrete equation beyond 1e-8.
double stochastic_value(const ViscousProblem& problem, const MeasurePath& rho, const DriftPath& drift,
                        double theta = 0.5);

/// Y_k = omega - du_k.
DriftPath optimal_drift(const GraphSpace& space, const Cocycle& omega, const ScalarFieldPath& u);

enum class ValueSource { kDirectHj, kColeHopfMol };

struct DualityOptions {
  ValueSource source = ValueSource::kDirectHj;
  double theta = 0.5;
};

struct DualityReport {
  double lhs = 0.0;  ///< int u(t) dnu
  double rhs = 0.0;  ///< stochastic value of the optimal drift
  double gap = 0.0;  ///< rhs - lhs
  double dt = 0.0;
  int vertices = 0;
  double fp_residual = 0.0;
  double min_density = 0.0;
  /// max over nodes of |D*((omega - du) rho)|_{L2} / ((1 + |u|_{V2}) (|rho|_{L2} + |Gamma(rho,rho)|_{L1}^{1/2})).
  double b_rho_constant = 0.0;
  ScalarFieldPath u;
  MeasurePath rho;
  DriftPath drift;
};

/// Throws ValidationError unless nu is a positive probability density.
void validate_density(const GraphSpace& space, const Field& nu);

DualityReport duality_check(const ViscousProblem& problem, const Field& nu, const DualityOptions& options = {});

/// Stochastic value of an arbitrary drift started from nu.
double candidate_value(const ViscousProblem& problem, const Field& nu, const DriftPath& drift, double theta = 0.5);

}  // namespace hjforms
