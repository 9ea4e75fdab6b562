// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include "hjforms/cover.hpp"
#include "hjforms/error.hpp"
#include "hjforms/fokker_planck.hpp"
#include "hjforms/forms.hpp"
#include "hjforms/inviscid.hpp"
#include "hjforms/space.hpp"
#include "hjforms/viscous.hpp"

#include "random_problems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace hjforms;
using hjforms::testing::random_cocycle;
using hjforms::testing::random_field;
using hjforms::testing::random_graph;
using hjforms::testing::random_path;
using hjforms::testing::random_viscous;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Detail {
 public:
  template <typename T>
  Detail& add(const std::string& key, T value) {
    if (!out_.str().empty()) out_ << ", ";
    out_ << key << "=" << value;
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

int failures = 0;

void run(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) {
    o.pass = false;
    o.detail += ", over time budget of " + std::to_string(budget_s) + " s";
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

// 1 --------------------------------------------------------------------------

Outcome constant_form_coherence() {
  const double c = 2.0;
  const double expected = -0.5 * c * c;
  Outcome o;
  Detail d;

  const GraphSpace s64 = GraphSpace::cycle(64);
  const ViscousProblem visc{s64, Cocycle::constant(s64, c), Potential::zero(64), 1.0, Field::Zero(64),
                            TimeGrid::over(1.0, 1e-3)};
  const Field u_visc = inverse_cole_hopf(mol_solve(visc).v, visc.beta).at(0);
  const double visc_err = (u_visc.array() - expected).abs().maxCoeff();
  o.pass &= visc_err <= 1e-3;
  d.add("viscous_err", sci(visc_err));

  std::vector<double> inviscid_errs;
  for (int n : {32, 64, 128, 256}) {
    const GraphSpace s = GraphSpace::cycle(n);
    const InviscidProblem p{s, Cocycle::constant(s, c), Potential::zero(n), Field::Zero(n),
                            TimeGrid::over(1.0, 1.0 / (c * n)), {}};
    inviscid_errs.push_back((solve_value(p).u.at(0).array() - expected).abs().maxCoeff());
  }
  const double inv256 = inviscid_errs.back() / std::abs(expected);
  bool converging = true;
  for (std::size_t i = 1; i < inviscid_errs.size(); ++i) converging &= inviscid_errs[i] <= inviscid_errs[i - 1] + 1e-12;
  o.pass &= inv256 <= 0.05 && converging;
  d.add("inviscid_rel_err_N256", sci(inv256)).add("inviscid_nonincreasing", converging ? "yes" : "no");

  const DualityReport r = duality_check(visc, Field::Ones(64));
  o.pass &= std::abs(r.gap) <= 5e-3;
  d.add("duality_gap", sci(r.gap));
  o.detail = d.str();
  return o;
}

// 2 --------------------------------------------------------------------------

VertexPath to_root(const CycleBasis& b, int x) {
  VertexPath p{{x}};
  while (b.parent[static_cast<std::size_t>(p.vertices.back())] >= 0) {
    p.vertices.push_back(b.parent[static_cast<std::size_t>(p.vertices.back())]);
  }
  return p;
}

VertexPath random_loop(std::mt19937_64& rng, const GraphSpace& s, const CycleBasis& b, int steps) {
  const VertexPath walk = random_path(rng, s, steps);
  VertexPath down = to_root(b, walk.vertices.front());
  std::reverse(down.vertices.begin(), down.vertices.end());
  return concatenate(concatenate(down, walk), to_root(b, walk.vertices.back()));
}

Outcome structural_identities() {
  std::mt19937_64 rng(2024);
  const int cases = 100;
  double sbp = 0.0, partition = 0.0, homology = 0.0, exactness = 0.0, deck = 0.0, adjoint = 0.0, mass = 0.0;
  int domain_miscount = 0;

  for (int t = 0; t < cases; ++t) {
    const GraphSpace s = random_graph(rng, 5 + t % 8, 3);
    const int n = s.num_vertices();
    const Field f = random_field(rng, n), g = random_field(rng, n);
    sbp = std::max(sbp, std::abs(s.integrate(laplacian(s, f).cwiseProduct(g)) + s.integrate(gamma(s, f, g))));

    const Cocycle w = random_cocycle(rng, s);
    const ChartForm charts = to_chart_form(s, w);
    const VertexPath p = random_path(rng, s, 1 + t % 15);
    const double greedy = integrate(s, charts, p);
    partition = std::max(partition, std::abs(integrate_partition(s, charts, p, random_partition(s, charts, p, rng)) - greedy));

    const CycleBasis b = cycle_basis(s);
    const VertexPath loop = random_loop(rng, s, b, 10);
    homology = std::max(homology, std::abs(integrate(s, w, loop) -
                                           chord_crossings(s, b, loop).cast<double>().dot(periods(s, w, b))));

    const CoverWindow cover = CoverWindow::build(s, w, 1, 1.0);
    exactness = std::max(exactness, cover.exactness_defect(w));
    std::vector<int> hits(static_cast<std::size_t>(cover.num_vertices()), 0);
    const int width = 3;
    for (int sheet = 0; sheet < cover.num_sheets(); ++sheet) {
      Sheet h(cover.rank());
      int rest = sheet;
      for (int j = cover.rank() - 1; j >= 0; --j) {
        h[j] = rest % width - 1;
        rest /= width;
      }
      for (int v : cover.fundamental_domain()) {
        const int image = cover.translate(v, h);
        if (image < 0) {
          ++domain_miscount;
          continue;
        }
        ++hits[static_cast<std::size_t>(image)];
        deck = std::max(deck, std::abs(cover.phi()[image] - cover.phi()[v] - h.cast<double>().dot(cover.periods())));
      }
    }
    for (int c : hits) domain_miscount += c != 1;

    Field rho = random_field(rng, n).array() + 1.5;
    rho /= s.integrate(rho);
    const Field phi = random_field(rng, n);
    adjoint = std::max(adjoint, std::abs(s.integrate(phi.cwiseProduct(drift_divergence(s, w, rho))) -
                                         drift_inner(s, coboundary(s, phi), w, rho)));

    FpOptions loose;
    loose.mass_tolerance = 1.0;
    Cocycle now = random_cocycle(rng, s);
    for (int k = 0; k < 10; ++k) {
      const Cocycle next = random_cocycle(rng, s);
      rho = fp_step(s, rho, now, next, 1e-2, 1.0, loose);
      now = next;
      mass = std::max(mass, std::abs(s.integrate(rho) - 1.0));
    }
  }
  const double tol = 1e-12;
  Outcome o;
  o.pass = sbp <= tol && partition <= tol && homology <= tol && exactness <= tol && deck <= tol && adjoint <= tol &&
           mass <= tol && domain_miscount == 0;
  o.detail = Detail()
                 .add("cases", cases)
                 .add("sbp", sci(sbp))
                 .add("partition", sci(partition))
                 .add("homology", sci(homology))
                 .add("phi_exactness", sci(exactness))
                 .add("deck", sci(deck))
                 .add("domain_miscount", domain_miscount)
                 .add("adjoint", sci(adjoint))
                 .add("fp_mass", sci(mass))
                 .str();
  return o;
}

// 3 --------------------------------------------------------------------------

Outcome minimum_principle() {
  std::mt19937_64 rng(303);
  int violations = 0;
  int steps = 0;
  double worst_margin = 1e300;
  bool mixed_sign = true;
  for (int t = 0; t < 50; ++t) {
    const ViscousProblem p = random_viscous(rng, 5 + t % 8, 1.0, 0.05);
    const Field V = p.potential.at(0.0);
    mixed_sign &= V.minCoeff() < 0.0 && V.maxCoeff() > 0.0;
    const CoverWindow cover = CoverWindow::build(p.space, p.omega, 1, p.beta);
    const GradientFlowSolution gf = gradient_flow_solve(p, cover);
    for (const auto& st : gf.steps) {
      const double bound = (1.0 - gf.d5 * gf.tau) * st.inf_before;
      worst_margin = std::min(worst_margin, st.inf_after - bound);
      violations += st.inf_after < bound;
      ++steps;
    }
  }
  Outcome o;
  o.pass = violations == 0 && mixed_sign;
  o.detail = Detail()
                 .add("problems", 50)
                 .add("steps", steps)
                 .add("violations", violations)
                 .add("min_margin", sci(worst_margin))
                 .add("mixed_sign_V", mixed_sign ? "yes" : "no")
                 .str();
  return o;
}

// 4 --------------------------------------------------------------------------

Outcome picard_machinery() {
  std::mt19937_64 rng(404);
  double worst_gap = 0.0;
  double worst_ratio = 0.0;
  double worst_residual = 0.0;
  int windows = 0;
  int halvings = 0;
  bool geometric = true;
  for (int t = 0; t < 20; ++t) {
    const ViscousProblem p = random_viscous(rng, 4 + t % 6, 1.0, 5e-5);
    const SchrodingerSolution a = picard_solve(p);
    const SchrodingerSolution b = mol_solve(p);
    for (int k = 0; k < p.grid.nodes(); ++k) {
      worst_gap = std::max(worst_gap, (a.v.at(k) - b.v.at(k)).cwiseAbs().maxCoeff());
    }
    for (const auto& w : a.windows) {
      worst_ratio = std::max(worst_ratio, w.max_ratio);
      worst_residual = std::max(worst_residual, w.residual);
      geometric &= w.max_ratio <= 0.5;
    }
    windows += static_cast<int>(a.windows.size());
    halvings += a.window_halvings;
  }
  Outcome o;
  o.pass = geometric && worst_gap <= 1e-6 && worst_residual <= 1e-9;
  o.detail = Detail()
                 .add("problems", 20)
                 .add("dt", 5e-5)
                 .add("picard_vs_mol", sci(worst_gap))
                 .add("max_update_ratio", sci(worst_ratio))
                 .add("max_residual", sci(worst_residual))
                 .add("windows", windows)
                 .add("halvings", halvings)
                 .str();
  return o;
}

// 5 --------------------------------------------------------------------------

Outcome cole_hopf_equivalence() {
  std::vector<double> hs, gaps;
  for (int n : {32, 64, 128}) {
    const double h = 1.0 / n;
    const GraphSpace s = GraphSpace::cycle(n);
    Field u0(n);
    for (int i = 0; i < n; ++i) u0[i] = std::cos(2.0 * std::numbers::pi * i / n);
    const ViscousProblem p{s, Cocycle::constant(s, 1.0), Potential::zero(n), 1.0, u0, TimeGrid::over(0.5, 0.5 * h * h)};
    const ScalarFieldPath direct = solve_viscous_hj_direct(p);
    const ScalarFieldPath via = inverse_cole_hopf(mol_solve(p).v, p.beta);
    double gap = 0.0;
    for (int k = 0; k < p.grid.nodes(); ++k) gap = std::max(gap, (direct.at(k) - via.at(k)).cwiseAbs().maxCoeff());
    hs.push_back(h);
    gaps.push_back(gap);
  }
  // Least-squares slope of log gap against log h.
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    mx += std::log(hs[i]);
    my += std::log(gaps[i]);
  }
  mx /= static_cast<double>(hs.size());
  my /= static_cast<double>(hs.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    sxy += (std::log(hs[i]) - mx) * (std::log(gaps[i]) - my);
    sxx += (std::log(hs[i]) - mx) * (std::log(hs[i]) - mx);
  }
  const double order = sxy / sxx;
  const bool decreasing = gaps[1] < gaps[0] && gaps[2] < gaps[1];
  Outcome o;
  o.pass = decreasing && order >= 1.0;
  o.detail = Detail()
                 .add("gap_N32", sci(gaps[0]))
                 .add("gap_N64", sci(gaps[1]))
                 .add("gap_N128", sci(gaps[2]))
                 .add("order", sci(order))
                 .str();
  return o;
}

// 6 --------------------------------------------------------------------------

Outcome comparison_principle() {
  std::mt19937_64 rng(606);
  int violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const GraphSpace s = random_graph(rng, 4 + t % 9, 3);
    const int n = s.num_vertices();
    const double dt = std::uniform_real_distribution<double>(0.1, 0.5)(rng);
    InviscidProblem minus{s, random_cocycle(rng, s), Potential::autonomous(random_field(rng, n)), random_field(rng, n),
                          TimeGrid(-8 * dt, dt), {}};
    InviscidProblem plus = minus;
    plus.final_condition = minus.final_condition + random_field(rng, n).cwiseAbs();
    const ValueTable a = solve_value(minus);
    const ValueTable b = solve_value(plus);
    for (int k = 0; k < minus.grid.nodes(); ++k) {
      const double excess = (a.u.at(k) - b.u.at(k)).maxCoeff();
      worst = std::max(worst, excess);
      violations += excess > 0.0;
    }
    if (!comparison_test(minus, plus)) ++violations;
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = Detail().add("pairs", 100).add("violations", violations).add("max(u_minus - u_plus)", sci(worst)).str();
  return o;
}

// 7 --------------------------------------------------------------------------

Outcome duality_sweep() {
  const int n = 64;
  const GraphSpace s = GraphSpace::cycle(n);
  const ViscousProblem p{s, Cocycle::constant(s, 2.0), Potential::zero(n), 1.0, Field::Zero(n), TimeGrid::over(1.0, 1e-3)};
  const Field nu = Field::Ones(n);
  const DualityReport r = duality_check(p, nu);
  std::mt19937_64 rng(707);
  int not_above = 0;
  double min_excess = 1e300;
  double min_ratio = 1e300, max_ratio = 0.0;
  for (int t = 0; t < 20; ++t) {
    // Smooth in time, arbitrary on edges.
    const Cocycle a = random_cocycle(rng, s), b = random_cocycle(rng, s);
    std::vector<Cocycle> delta;
    for (int k = 0; k < p.grid.nodes(); ++k) {
      const double tt = -p.grid.time(k);
      delta.push_back(std::cos(3.0 * tt) * a + std::sin(2.0 * tt) * b);
    }
    auto value = [&](double eps) {
      DriftPath y = r.drift;
      for (std::size_t k = 0; k < y.slices.size(); ++k) y.slices[k] = y.slices[k] + eps * delta[k];
      return candidate_value(p, nu, y);
    };
    const double big = value(1e-2) - r.lhs;
    const double small = value(1e-3) - r.lhs;
    not_above += !(big > 0.0) + !(small > 0.0);
    min_excess = std::min({min_excess, big, small});
    const double ratio = (big - r.gap) / (small - r.gap);
    min_ratio = std::min(min_ratio, ratio);
    max_ratio = std::max(max_ratio, ratio);
  }
  Outcome o;
  o.pass = not_above == 0 && min_ratio >= 50.0 && max_ratio <= 200.0;
  o.detail = Detail()
                 .add("drifts", 20)
                 .add("not_above", not_above)
                 .add("min_excess", sci(min_excess))
                 .add("base_gap", sci(r.gap))
                 .add("ratio_range", "[" + sci(min_ratio) + ", " + sci(max_ratio) + "]")
                 .str();
  return o;
}

// 8 --------------------------------------------------------------------------

Outcome cover_lift_identity() {
  const int n = 12;
  const GraphSpace s = GraphSpace::cycle(n);
  const InviscidProblem p{s, Cocycle::constant(s, 1.0), Potential::zero(n), Field::Zero(n),
                          TimeGrid::over(6.0 / n, 1.0 / n), {}};
  const CoverWindow cover = CoverWindow::build(s, p.omega, 1, 1.0);
  const double gap = cover_equivalence_check(p, cover);
  Outcome o;
  o.pass = gap <= 1e-9 && p.grid.steps() == 6;
  o.detail = Detail().add("N", n).add("K", p.grid.steps()).add("H_max", 1).add("discrepancy", sci(gap)).str();
  return o;
}

}  // namespace

int main() {
  run(1, "constant-form coherence", 10.0, constant_form_coherence);
  run(2, "exact structural identities", 5.0, structural_identities);
  run(3, "minimum principle", 30.0, minimum_principle);
  run(4, "Picard machinery", 30.0, picard_machinery);
  run(5, "Cole-Hopf equivalence under refinement", 60.0, cole_hopf_equivalence);
  run(6, "comparison principle", 30.0, comparison_principle);
  run(7, "duality inequality sweep", 30.0, duality_sweep);
  run(8, "cover-lift value identity", 10.0, cover_lift_identity);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
