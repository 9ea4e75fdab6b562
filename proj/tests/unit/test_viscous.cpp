#include "hjforms/error.hpp"
#include "hjforms/viscous.hpp"

#include "random_problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hjforms;
using hjforms::testing::random_field;
using hjforms::testing::random_graph;
using hjforms::testing::random_viscous;

namespace {

ViscousProblem constant_cycle(int n, double c, double dt, double horizon = 1.0, double beta = 1.0) {
  const GraphSpace s = GraphSpace::cycle(n);
  return {s, Cocycle::constant(s, c), Potential::zero(n), beta, Field::Zero(n), TimeGrid::over(horizon, dt)};
}

ViscousProblem cosine_cycle(int n, double dt, double horizon) {
  ViscousProblem p = constant_cycle(n, 1.0, dt, horizon);
  for (int i = 0; i < n; ++i) p.u0[i] = std::cos(2.0 * std::numbers::pi * i / n);
  return p;
}

// B written out edge by edge: (beta/2) Gh v + (1/(2m)) sum w omega (v(y) - v(x)) + beta V v.
Field b_oracle(const ViscousProblem& p, const Field& v) {
  const GraphSpace& s = p.space;
  const Field V = p.potential.at(0.0);
  Field out = Field::Zero(s.num_vertices());
  for (int x = 0; x < s.num_vertices(); ++x) {
    double gh = 0.0;
    double mixed = 0.0;
    for (const auto& inc : s.incident(x)) {
      const double w = s.edge(inc.edge).conductance;
      const double a = p.omega.along(inc);
      gh += w * a * a;
      mixed += w * a * (v[inc.neighbor] - v[x]);
    }
    const double m = s.measure()[x];
    out[x] = 0.5 * p.beta * gh / (2.0 * m) * v[x] + mixed / (2.0 * m) + p.beta * V[x] * v[x];
  }
  return out;
}

double sup_gap(const ScalarFieldPath& a, const ScalarFieldPath& b) {
  double g = 0.0;
  for (std::size_t k = 0; k < a.slices.size(); ++k) g = std::max(g, (a.slices[k] - b.slices[k]).cwiseAbs().maxCoeff());
  return g;
}

}  // namespace

TEST(Viscous, BOperatorMatchesEdgewiseOracle) {
  const ViscousProblem c = constant_cycle(16, 2.0, 0.1);
  const Field one = Field::Ones(16);
  EXPECT_LE((b_operator(c, one, 0.0).array() - 2.0).abs().maxCoeff(), 1e-12);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const ViscousProblem p = random_viscous(rng, 6 + t % 5, 1.0, 0.1);
    const int n = p.space.num_vertices();
    const Field v = random_field(rng, n), w = random_field(rng, n);
    EXPECT_LE((b_operator(p, v, 0.0) - b_oracle(p, v)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((b_operator(p, 2.0 * v - w, 0.0) - 2.0 * b_operator(p, v, 0.0) + b_operator(p, w, 0.0))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
    EXPECT_LE((b_matrix(p, 0.0) * v - b_operator(p, v, 0.0)).cwiseAbs().maxCoeff(), 1e-12);
    const Field gen = generator_matrix(p, 0.0) * v;
    EXPECT_LE((gen - laplacian(p.space, v) / (2.0 * p.beta) - b_operator(p, v, 0.0)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Viscous, RejectsNonHarmonicForm) {
  std::mt19937_64 rng(2);
  ViscousProblem p = random_viscous(rng, 8, 1.0, 0.1);
  p.omega = p.omega + coboundary(p.space, random_field(rng, 8));
  EXPECT_THROW(validate(p), ValidationError);
  EXPECT_THROW(picard_solve(p), ValidationError);
  EXPECT_THROW(mol_solve(p), ValidationError);
}

TEST(Viscous, PicardWithoutTwistIsTheHeatFlow) {
  std::mt19937_64 rng(3);
  const GraphSpace s = random_graph(rng, 9);
  const ViscousProblem p{s, Cocycle::zero(s), Potential::zero(9), 1.3, random_field(rng, 9), TimeGrid::over(1.0, 0.01)};
  const SchrodingerSolution sol = picard_solve(p);
  const HeatSemigroup heat(s, p.beta);
  for (int k = 0; k <= p.grid.steps(); k += 10) {
    EXPECT_LE((sol.v.at(k) - heat.apply(p.v0(), -p.grid.time(k))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Viscous, ConstantFormGoldenScenario) {
  const ViscousProblem p = constant_cycle(64, 2.0, 1e-3);
  const SchrodingerSolution picard = picard_solve(p);
  const SchrodingerSolution mol = mol_solve(p);
  const double e2 = std::exp(2.0);
  EXPECT_LE((picard.v.at(0).array() - e2).abs().maxCoeff(), 1e-4);
  EXPECT_LE((mol.v.at(0).array() - e2).abs().maxCoeff(), 1e-4);
  const Field u = inverse_cole_hopf(mol.v, p.beta).at(0);
  EXPECT_LE((u.array() + 2.0).abs().maxCoeff(), 1e-3);
  EXPECT_LE(picard.residual, 1e-9);
  for (const auto& w : picard.windows) {
    EXPECT_LE(w.residual, 1e-9);
    EXPECT_LE(w.max_ratio, 0.5);
  }
  // The windows tile the grid back from t = 0.
  int last = p.grid.steps();
  for (const auto& w : picard.windows) {
    EXPECT_EQ(w.last_node, last);
    last = w.first_node;
  }
  EXPECT_EQ(last, 0);

  const BoundEnvelopes env = bound_envelopes(p.space, mol.v, p.beta);
  const int K = p.grid.steps();
  EXPECT_NEAR(env.d2[K], e2, 1e-4);
  EXPECT_NEAR(env.d1[K], 2.0, 1e-4);
  for (int j = 1; j <= K; ++j) {
    EXPECT_GE(env.d1[j], env.d1[j - 1]);
    EXPECT_GE(env.d2[j], env.d2[j - 1]);
    EXPECT_GE(env.gradient[j], env.gradient[j - 1]);
  }
}

TEST(Viscous, TrivialEnvelopes) {
  const GraphSpace s = GraphSpace::cycle(5);
  const ScalarFieldPath ones(TimeGrid::over(1.0, 0.25), std::vector<Field>(5, Field::Ones(5)));
  const BoundEnvelopes env = bound_envelopes(s, ones, 2.0);
  EXPECT_EQ(env.d1.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(env.gradient.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((env.d2.array() - 1.0).abs().maxCoeff(), 0.0);
}

TEST(Viscous, PicardAgreesWithMethodOfLines) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 5; ++t) {
    const ViscousProblem p = random_viscous(rng, 5 + t, 1.0, 1e-4);
    const SchrodingerSolution a = picard_solve(p);
    const SchrodingerSolution b = mol_solve(p);
    EXPECT_LE(sup_gap(a.v, b.v), 1e-6);
    for (const auto& w : a.windows) EXPECT_LE(w.max_ratio, 0.5);
  }
}

TEST(Viscous, ImplicitEulerIsFirstOrder) {
  const ViscousProblem coarse = cosine_cycle(16, 0.02, 1.0);
  const ViscousProblem fine = cosine_cycle(16, 0.01, 1.0);
  const Field exact = mol_solve(cosine_cycle(16, 1e-4, 1.0)).v.at(0);
  const double e1 = (mol_solve(coarse, MolScheme::kImplicitEuler).v.at(0) - exact).cwiseAbs().maxCoeff();
  const double e2 = (mol_solve(fine, MolScheme::kImplicitEuler).v.at(0) - exact).cwiseAbs().maxCoeff();
  EXPECT_NEAR(e1 / e2, 2.0, 0.2);
  const double c1 = (mol_solve(coarse).v.at(0) - exact).cwiseAbs().maxCoeff();
  const double c2 = (mol_solve(fine).v.at(0) - exact).cwiseAbs().maxCoeff();
  EXPECT_NEAR(c1 / c2, 4.0, 0.4);
}

TEST(Viscous, PicardReportsNoContraction) {
  const ViscousProblem p = constant_cycle(16, 2.0, 0.05);
  PicardOptions opt;
  opt.max_ratio = 1e-12;
  EXPECT_THROW(picard_solve(p, opt), NoContraction);
  PicardOptions capped;
  capped.max_iterations = 1;
  EXPECT_THROW(picard_solve(p, capped), NotConverged);
}

TEST(Viscous, PicardIsTimeConsistentAcrossWindows) {
  std::mt19937_64 rng(5);
  const ViscousProblem p = random_viscous(rng, 7, 1.0, 1e-3);
  PicardOptions small;
  small.window = 0.1;
  const SchrodingerSolution a = picard_solve(p);
  const SchrodingerSolution b = picard_solve(p, small);
  EXPECT_GE(b.windows.size(), 10u);
  EXPECT_LE(sup_gap(a.v, b.v), 1e-8);
}

TEST(Viscous, ColeHopfRoundTrip) {
  std::mt19937_64 rng(6);
  std::vector<Field> slices;
  for (int k = 0; k < 5; ++k) slices.push_back(random_field(rng, 7, 3.0));
  const ScalarFieldPath u(TimeGrid::over(1.0, 0.25), slices);
  const ScalarFieldPath back = inverse_cole_hopf(cole_hopf(u, 1.7), 1.7);
  EXPECT_LE(sup_gap(u, back), 1e-12);

  const ScalarFieldPath ones(TimeGrid::over(1.0, 0.5), std::vector<Field>(3, Field::Ones(4)));
  EXPECT_EQ(inverse_cole_hopf(ones, 1.0).sup_abs(), 0.0);

  std::vector<Field> bad(3, Field::Ones(4));
  bad[1][2] = 0.0;
  try {
    inverse_cole_hopf(ScalarFieldPath(TimeGrid::over(1.0, 0.5), bad), 1.0);
    FAIL() << "expected NonPositive";
  } catch (const NonPositive& e) {
    EXPECT_NE(std::string(e.what()).find("node 1, vertex 2"), std::string::npos);
  }
}

TEST(Viscous, DirectHjOnConstantForm) {
  const ViscousProblem zero = constant_cycle(12, 0.0, 0.1);
  EXPECT_EQ(solve_viscous_hj_direct(zero).sup_abs(), 0.0);
  const ScalarFieldPath u = solve_viscous_hj_direct(constant_cycle(128, 2.0, 1e-3));
  EXPECT_LE((u.at(0).array() + 2.0).abs().maxCoeff(), 1e-3);
}

TEST(Viscous, DirectHjRejectsBlowUp) {
  ViscousProblem p = constant_cycle(16, 0.0, 0.5, 50.0);
  for (int i = 0; i < 16; ++i) p.u0[i] = (i % 2 == 0 ? 1e5 : -1e5);
  EXPECT_THROW(solve_viscous_hj_direct(p), StepRejected);
}

TEST(Viscous, ColeHopfGapConvergesUnderRefinement) {
  std::vector<double> gaps;
  for (int n : {16, 32, 64}) {
    const double h = 1.0 / n;
    const ViscousProblem p = cosine_cycle(n, 0.5 * h * h, 0.5);
    const ScalarFieldPath direct = solve_viscous_hj_direct(p);
    const ScalarFieldPath via = inverse_cole_hopf(mol_solve(p).v, p.beta);
    gaps.push_back(sup_gap(direct, via));
  }
  for (std::size_t i = 1; i < gaps.size(); ++i) EXPECT_GE(std::log2(gaps[i - 1] / gaps[i]), 1.0);
}

TEST(Viscous, GradientFlowWithoutTwistIsImplicitEulerHeat) {
  std::mt19937_64 rng(7);
  const GraphSpace s = random_graph(rng, 8);
  const ViscousProblem p{s, Cocycle::zero(s), Potential::zero(8), 0.8, random_field(rng, 8), TimeGrid::over(1.0, 0.05)};
  const CoverWindow cover = CoverWindow::build(s, p.omega, 0, p.beta);
  const GradientFlowSolution gf = gradient_flow_solve(p, cover);
  HeatOptions opt;
  opt.backend = HeatBackend::kImplicitEuler;
  opt.substeps = p.grid.steps();
  const Field expected = heat_flow(s, p.v0(), 1.0, p.beta, opt);
  EXPECT_LE((gf.solution.v.at(0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Viscous, GradientFlowGoldenScenario) {
  const ViscousProblem p = constant_cycle(64, 2.0, 1e-3);
  const CoverWindow cover = CoverWindow::build(p.space, p.omega, 1, p.beta);
  const GradientFlowSolution gf = gradient_flow_solve(p, cover);
  const double e2 = std::exp(2.0);
  EXPECT_LE((gf.solution.v.at(0).array() - e2).abs().maxCoeff() / e2, 1e-2);
  const SchrodingerSolution picard = picard_solve(p);
  EXPECT_LE(sup_gap(gf.solution.v, picard.v), 10.0 * (2.0 * p.grid.dt()));

  // Reversal is an index identity.
  const int K = p.grid.steps();
  for (int k = 0; k <= K; ++k) EXPECT_EQ(gf.solution.v.at(k), gf.forward[static_cast<std::size_t>(K - k)]);
  const GradientFlowSolution left = gradient_flow_solve(p, cover, TwistConvention::kLeft);
  EXPECT_LE((left.solution.v.at(0).array() - e2).abs().maxCoeff() / e2, 1e-1);
}

TEST(Viscous, MinimumPrincipleOnRandomProblems) {
  std::mt19937_64 rng(8);
  int violations = 0;
  for (int t = 0; t < 50; ++t) {
    ViscousProblem p = random_viscous(rng, 5 + t % 6, 1.0, 0.05);
    const CoverWindow cover = CoverWindow::build(p.space, p.omega, 1, p.beta);
    const GradientFlowSolution gf = gradient_flow_solve(p, cover);
    EXPECT_DOUBLE_EQ(gf.d5, 2.0 * p.beta * p.potential.at(0.0).cwiseAbs().maxCoeff() + 1e-9);
    for (const auto& step : gf.steps) violations += step.inf_after < (1.0 - gf.d5 * gf.tau) * step.inf_before;
    EXPECT_GT(gf.solution.v.at(0).minCoeff(), 0.0);
  }
  EXPECT_EQ(violations, 0);
}

TEST(Viscous, GradientFlowRejections) {
  std::mt19937_64 rng(9);
  ViscousProblem p = random_viscous(rng, 7, 1.0, 0.05);
  const CoverWindow cover = CoverWindow::build(p.space, p.omega, 1, p.beta);

  ViscousProblem coarse = p;
  coarse.potential = Potential::autonomous(Field::Constant(7, 10.0));
  coarse.grid = TimeGrid::over(1.0, 0.5);
  EXPECT_THROW(gradient_flow_solve(coarse, cover), ValidationError);

  ViscousProblem moving = p;
  moving.potential = Potential::time_dependent(7, [](double t) { return Field::Constant(7, t); });
  EXPECT_THROW(gradient_flow_solve(moving, cover), ValidationError);

  ViscousProblem rough = p;
  rough.omega = p.omega + coboundary(p.space, random_field(rng, 7));
  EXPECT_THROW(gradient_flow_solve(rough, cover), ValidationError);

  const CoverWindow other = CoverWindow::build(p.space, p.omega, 1, 2.0 * p.beta);
  EXPECT_THROW(gradient_flow_solve(p, other), ValidationError);
}

TEST(Viscous, FunctionalIsStationaryAtTheStep) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 5; ++t) {
    const ViscousProblem p = random_viscous(rng, 6, 0.2, 0.05);
    const CoverWindow cover = CoverWindow::build(p.space, p.omega, 1, p.beta);
    const GradientFlowSolution gf = gradient_flow_solve(p, cover);
    const Field prev = cover.lift_field(gf.forward[0]);
    const Field next = cover.lift_field(gf.forward[1]);
    const double g0 = gradient_flow_functional(p, cover, next, prev, gf.tau);
    const Field mhat = cover.weighted_measure();
    // G is quadratic, so central differences are exact up to rounding.
    for (int v : cover.fundamental_domain()) {
      if (cover.truncated(v)) continue;
      const double eps = 1e-4;
      Field plus = next, minus = next;
      plus[v] += eps;
      minus[v] -= eps;
      const double grad = (gradient_flow_functional(p, cover, plus, prev, gf.tau) -
                           gradient_flow_functional(p, cover, minus, prev, gf.tau)) /
                          (2.0 * eps);
      EXPECT_LE(std::abs(grad) / mhat[v], 1e-6);
      // And it is a local minimum.
      EXPECT_GE(gradient_flow_functional(p, cover, plus, prev, gf.tau), g0);
    }
  }
}

TEST(Viscous, TwistedGeneratorApproachesChartFormUnderRefinement) {
  std::vector<double> defects;
  for (int n : {32, 64, 128}) {
    const ViscousProblem p = constant_cycle(n, 1.5, 1e-3);
    const CoverWindow cover = CoverWindow::build(p.space, p.omega, 1, p.beta);
    Field f(n);
    for (int i = 0; i < n; ++i) f[i] = std::sin(2.0 * std::numbers::pi * i / n);
    const Field chart = generator_matrix(p, 0.0) * f;
    const Field gh = gamma_hat(p.space, p.omega, p.omega);
    const Field twisted = twisted_laplacian(cover, TwistConvention::kMidpoint) * f / (2.0 * p.beta) +
                          (0.5 * p.beta * gh).cwiseProduct(f);
    defects.push_back((chart - twisted).cwiseAbs().maxCoeff());
  }
  EXPECT_GT(defects[0], 0.0);
  for (std::size_t i = 1; i < defects.size(); ++i) EXPECT_LE(defects[i], 0.6 * defects[i - 1]);
}
