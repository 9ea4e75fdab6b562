#pragma once

#include "hjforms/forms.hpp"
#include "hjforms/space.hpp"
#include "hjforms/viscous.hpp"

#include <random>
#include <vector>

namespace hjforms::testing {

/// Ring of n vertices plus up to `chords` random chords; random lengths,
/// conductances and masses.
inline GraphSpace random_graph(std::mt19937_64& rng, int n, int chords = 2) {
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, weight(rng), weight(rng)});
  std::uniform_int_distribution<int> vertex(0, n - 1);
  for (int c = 0; c < chords; ++c) {
    const int a = vertex(rng);
    const int b = vertex(rng);
    if (a == b) continue;
    bool duplicate = false;
    for (const auto& e : edges) duplicate |= (e.tail == a && e.head == b) || (e.tail == b && e.head == a);
    if (!duplicate) edges.push_back({a, b, weight(rng), weight(rng)});
  }
  Field m(n);
  for (int i = 0; i < n; ++i) m[i] = weight(rng);
  m /= m.sum();
  return GraphSpace(n, std::move(edges), m);
}

inline Field random_field(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Field::NullaryExpr(n, [&] { return u(rng); });
}

inline Cocycle random_cocycle(std::mt19937_64& rng, const GraphSpace& space, double scale = 1.0) {
  return {random_field(rng, space.num_edges(), scale)};
}

inline VertexPath random_path(std::mt19937_64& rng, const GraphSpace& space, int steps) {
  std::uniform_int_distribution<int> start(0, space.num_vertices() - 1);
  VertexPath p{{start(rng)}};
  for (int i = 0; i < steps; ++i) {
    const auto inc = space.incident(p.vertices.back());
    std::uniform_int_distribution<std::size_t> pick(0, inc.size() - 1);
    p.vertices.push_back(inc[pick(rng)].neighbor);
  }
  return p;
}

/// Small random viscous problem with a harmonic form and mixed-sign V.
inline ViscousProblem random_viscous(std::mt19937_64& rng, int n, double horizon, double dt) {
  GraphSpace space = random_graph(rng, n);
  Cocycle omega = harmonic_representative(space, random_cocycle(rng, space, 0.5));
  Field V = random_field(rng, n);
  Field u0 = random_field(rng, n);
  const double beta = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
  return {space, omega, Potential::autonomous(V), beta, u0, TimeGrid::over(horizon, dt)};
}

}  // namespace hjforms::testing
