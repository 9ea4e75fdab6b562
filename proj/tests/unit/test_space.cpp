#include "hjforms/error.hpp"
#include "hjforms/space.hpp"

#include "random_problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hjforms;
using hjforms::testing::random_field;
using hjforms::testing::random_graph;

namespace {

GraphSpace two_vertices() { return GraphSpace(2, {{0, 1, 1.0, 1.0}}, Field::Constant(2, 0.5)); }

Field sampled(const GraphSpace& s, double (*f)(double)) {
  Field out(s.num_vertices());
  for (int i = 0; i < s.num_vertices(); ++i) out[i] = f(s.coordinates()[static_cast<std::size_t>(i)]);
  return out;
}

double sin2pi(double x) { return std::sin(2.0 * std::numbers::pi * x); }

}  // namespace

TEST(Space, RejectsMalformedGraphs) {
  EXPECT_THROW(GraphSpace(3, {{0, 1, 1.0, 1.0}}, Field::Constant(3, 1.0 / 3)), ValidationError);
  EXPECT_THROW(GraphSpace(2, {{0, 1, 1.0, 1.0}}, Field::Constant(2, 0.4)), ValidationError);
  EXPECT_THROW(GraphSpace(2, {{0, 1, -1.0, 1.0}}, Field::Constant(2, 0.5)), ValidationError);
  EXPECT_THROW(GraphSpace(2, {{0, 1, 1.0, 0.0}}, Field::Constant(2, 0.5)), ValidationError);
  EXPECT_THROW(GraphSpace(2, {{0, 0, 1.0, 1.0}, {0, 1, 1.0, 1.0}}, Field::Constant(2, 0.5)), ValidationError);
  EXPECT_THROW(GraphSpace(2, {{0, 1, 1.0, 1.0}, {1, 0, 1.0, 1.0}}, Field::Constant(2, 0.5)), ValidationError);
}

TEST(Space, GammaTwoVertexExample) {
  const GraphSpace s = two_vertices();
  const Field f = (Field(2) << 0.0, 1.0).finished();
  const Field g = gamma(s, f, f);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
  const Field lap = laplacian(s, f);
  EXPECT_DOUBLE_EQ(lap[0], 2.0);
  EXPECT_DOUBLE_EQ(lap[1], -2.0);
}

TEST(Space, GammaOfConstantVanishes) {
  std::mt19937_64 rng(3);
  const GraphSpace s = random_graph(rng, 9);
  const Field g = gamma(s, Field::Constant(9, 4.0), random_field(rng, 9));
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(laplacian(s, Field::Constant(9, -2.5)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Space, GammaBilinearSymmetricPositive) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const GraphSpace s = random_graph(rng, 7 + t % 5);
    const int n = s.num_vertices();
    const Field f = random_field(rng, n), g = random_field(rng, n), h = random_field(rng, n);
    EXPECT_LE((gamma(s, f, g) - gamma(s, g, f)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((gamma(s, 2.0 * f + h, g) - 2.0 * gamma(s, f, g) - gamma(s, h, g)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_GE(gamma(s, f, f).minCoeff(), 0.0);
  }
}

TEST(Space, SummationByPartsExact) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const GraphSpace s = random_graph(rng, 5 + t % 8);
    const int n = s.num_vertices();
    const Field f = random_field(rng, n), g = random_field(rng, n);
    const double lhs = -s.integrate(laplacian(s, f).cwiseProduct(g));
    const double rhs = s.integrate(gamma(s, f, g));
    EXPECT_LE(std::abs(lhs - rhs), 1e-12);
  }
}

TEST(Space, DirichletEnergyOfSineConverges) {
  double previous = 1e300;
  for (int n : {32, 128, 512}) {
    const GraphSpace s = GraphSpace::cycle(n);
    const Field f = sampled(s, sin2pi);
    const double err = std::abs(s.integrate(gamma(s, f, f)) - 2.0 * std::numbers::pi * std::numbers::pi);
    EXPECT_LT(err, previous);
    previous = err;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(Space, DistancesFormAMetric) {
  std::mt19937_64 rng(17);
  const GraphSpace s = random_graph(rng, 9, 4);
  std::vector<Field> d;
  for (int x = 0; x < 9; ++x) d.push_back(s.distances_from(x));
  for (int x = 0; x < 9; ++x) {
    EXPECT_EQ(d[x][x], 0.0);
    for (int y = 0; y < 9; ++y) {
      EXPECT_NEAR(d[x][y], d[y][x], 1e-14);
      for (int z = 0; z < 9; ++z) EXPECT_LE(d[x][z], d[x][y] + d[y][z] + 1e-14);
    }
  }
  for (int e = 0; e < s.num_edges(); ++e) {
    EXPECT_NEAR(s.hop_distance(e), d[s.edge(e).tail][s.edge(e).head], 1e-14);
  }
}

TEST(Space, HeatFlowBasicProperties) {
  std::mt19937_64 rng(23);
  const GraphSpace s = random_graph(rng, 10);
  const Field f = random_field(rng, 10);
  const HeatSemigroup heat(s, 0.7);
  EXPECT_EQ(heat_flow(s, f, 0.0, 0.7), f);
  const Field c = heat.apply(Field::Constant(10, 3.0), 2.0);
  EXPECT_LE((c.array() - 3.0).abs().maxCoeff(), 1e-12);

  const Field a = heat.apply(heat.apply(f, 0.3), 0.3);
  const Field b = heat.apply(f, 0.6);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);

  for (double tau : {0.01, 0.1, 1.0, 10.0}) {
    const Field p = heat.apply(f, tau);
    EXPECT_NEAR(s.integrate(p), s.integrate(f), 1e-12);
    EXPECT_LE(p.maxCoeff(), f.maxCoeff() + 1e-12);
    EXPECT_GE(p.minCoeff(), f.minCoeff() - 1e-12);
    EXPECT_LE(s.l2_norm(p), s.l2_norm(f) + 1e-12);
  }
  EXPECT_THROW(heat_flow(s, f, -1.0, 1.0), ValidationError);
  EXPECT_THROW(heat_flow(s, f, 1.0, 0.0), ValidationError);
}

TEST(Space, ImplicitEulerBackendMatchesSpectral) {
  std::mt19937_64 rng(29);
  const GraphSpace s = random_graph(rng, 8);
  const Field f = random_field(rng, 8);
  HeatOptions opt;
  opt.backend = HeatBackend::kImplicitEuler;
  opt.splitting_tolerance = 1e-6;
  const Field a = heat_flow(s, f, 0.5, 1.0, opt);
  const Field b = heat_flow(s, f, 0.5, 1.0);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_NEAR(s.integrate(a), s.integrate(f), 1e-10);
}

TEST(Space, VNormExamples) {
  const GraphSpace s = two_vertices();
  const VNorms zero = v_norms(s, Field::Zero(2));
  EXPECT_EQ(zero.v2, 0.0);
  const VNorms r = v_norms(s, (Field(2) << 0.0, 1.0).finished());
  EXPECT_DOUBLE_EQ(r.linf, 1.0);
  EXPECT_DOUBLE_EQ(r.gamma_linf, 1.0);
  EXPECT_DOUBLE_EQ(r.v1 * r.v1, 2.0);
  std::mt19937_64 rng(31);
  const GraphSpace g = random_graph(rng, 8);
  for (int t = 0; t < 20; ++t) {
    const VNorms v = v_norms(g, random_field(rng, 8));
    EXPECT_GE(v.v2, v.v1);
  }
}

TEST(Space, ChainRuleDefectVanishesInMeshLimit) {
  auto eta = [](double x) { return std::exp(x); };
  double previous = 1e300;
  for (int n : {16, 64, 256}) {
    const GraphSpace s = GraphSpace::cycle(n);
    const double d = chain_rule_defect(s, sampled(s, sin2pi), eta, eta, eta);
    EXPECT_LT(d, previous);
    EXPECT_GT(d, 0.0);
    previous = d;
  }
}

TEST(Space, SmoothingConstantStaysBounded) {
  std::mt19937_64 rng(37);
  const GraphSpace s = GraphSpace::cycle(64);
  const HeatSemigroup heat(s, 1.0);
  std::vector<Field> probes;
  for (int i = 0; i < 20; ++i) probes.push_back(random_field(rng, 64));
  double largest = 0.0;
  for (double tau : {1e-1, 1e-2, 1e-3, 1e-4}) largest = std::max(largest, smoothing_constant(s, heat, tau, probes));
  EXPECT_TRUE(std::isfinite(largest));
  EXPECT_LT(largest, 10.0);
}
