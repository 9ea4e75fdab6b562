#include "hjforms/cover.hpp"

#include "hjforms/error.hpp"

#include <cmath>
#include <deque>
#include <string>

namespace hjforms {

namespace {

int ipow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

Sheet sheet_of(int s, int k, int h_max) {
  const int width = 2 * h_max + 1;
  Sheet h(k);
  for (int j = k - 1; j >= 0; --j) {
    h[j] = s % width - h_max;
    s /= width;
  }
  return h;
}

int sheet_index(const Sheet& h, int h_max) {
  const int width = 2 * h_max + 1;
  int s = 0;
  for (int j = 0; j < h.size(); ++j) {
    if (std::abs(h[j]) > h_max) return -1;
    s = s * width + (h[j] + h_max);
  }
  return s;
}

}  // namespace

CoverWindow CoverWindow::build(const GraphSpace& base, const Cocycle& omega, int h_max, double beta) {
  if (h_max < 0) throw ValidationError("cover: H_max must be >= 0");
  if (!(beta > 0.0)) throw ValidationError("cover: beta must be positive");
  if (omega.values.size() != base.num_edges()) throw ValidationError("cover: cocycle does not match the graph");

  const int n = base.num_vertices();
  CycleBasis basis = cycle_basis(base);
  const Field all_periods = hjforms::periods(base, omega, basis);
  const Field f0 = tree_primitive(base, basis, omega);
  const double zero_tol = 1e-12 * std::max(1.0, omega.values.cwiseAbs().sum());

  std::vector<int> deck_chords;
  std::vector<double> deck_periods;
  std::vector<int> deck_of_edge(static_cast<std::size_t>(base.num_edges()), -1);
  for (int j = 0; j < basis.rank(); ++j) {
    if (std::abs(all_periods[j]) <= zero_tol) continue;
    const int e = basis.chords[static_cast<std::size_t>(j)];
    deck_of_edge[static_cast<std::size_t>(e)] = static_cast<int>(deck_chords.size());
    deck_chords.push_back(e);
    deck_periods.push_back(all_periods[j]);
  }
  const int k = static_cast<int>(deck_chords.size());
  const int sheets = ipow(2 * h_max + 1, k);
  if (static_cast<long long>(sheets) * n > 50'000'000LL) throw ValidationError("cover: window too large");

  Field P(k);
  for (int j = 0; j < k; ++j) P[j] = deck_periods[static_cast<std::size_t>(j)];

  std::vector<Edge> edges;
  std::vector<int> base_edge;
  std::vector<char> truncated(static_cast<std::size_t>(sheets) * static_cast<std::size_t>(n), 0);
  Field measure(static_cast<Eigen::Index>(sheets) * n);
  Field phi(static_cast<Eigen::Index>(sheets) * n);
  for (int s = 0; s < sheets; ++s) {
    const Sheet h = sheet_of(s, k, h_max);
    const double shift = k > 0 ? static_cast<double>(h.cast<double>().dot(P)) : 0.0;
    for (int x = 0; x < n; ++x) {
      measure[s * n + x] = base.measure()[x];
      phi[s * n + x] = f0[x] + shift;
    }
    for (int e = 0; e < base.num_edges(); ++e) {
      const Edge& be = base.edge(e);
      const int j = deck_of_edge[static_cast<std::size_t>(e)];
      int target = s;
      if (j >= 0) {
        Sheet up = h;
        ++up[j];
        target = sheet_index(up, h_max);
        if (target < 0) {
          truncated[static_cast<std::size_t>(s * n + be.tail)] = 1;
          continue;
        }
      }
      edges.push_back({s * n + be.tail, target * n + be.head, be.length, be.conductance});
      base_edge.push_back(e);
    }
  }
  // Heads of deck chords on the lowest sheet miss their incoming edge.
  for (int s = 0; s < sheets; ++s) {
    const Sheet h = sheet_of(s, k, h_max);
    for (int j = 0; j < k; ++j) {
      if (h[j] == -h_max) truncated[static_cast<std::size_t>(s * n + base.edge(deck_chords[static_cast<std::size_t>(j)]).head)] = 1;
    }
  }

  GraphSpace lifted(sheets * n, std::move(edges), measure, {}, sheets == 1);
  CoverWindow w(base, std::move(lifted));
  w.n_ = n;
  w.h_max_ = h_max;
  w.beta_ = beta;
  w.num_sheets_ = sheets;
  w.basis_ = std::move(basis);
  w.deck_chords_ = std::move(deck_chords);
  w.deck_of_edge_ = std::move(deck_of_edge);
  w.periods_ = std::move(P);
  w.phi_ = std::move(phi);
  w.base_edge_ = std::move(base_edge);
  w.truncated_ = std::move(truncated);
  return w;
}

int CoverWindow::index(int x, const Sheet& h) const {
  if (x < 0 || x >= n_ || h.size() != rank()) throw ValidationError("cover: bad lifted coordinate");
  const int s = sheet_index(h, h_max_);
  return s < 0 ? -1 : s * n_ + x;
}

Sheet CoverWindow::sheet(int v) const { return sheet_of(v / n_, rank(), h_max_); }

Field CoverWindow::weighted_measure() const {
  return (2.0 * beta_ * phi_.array()).exp().matrix().cwiseProduct(lifted_.measure());
}

std::vector<int> CoverWindow::fundamental_domain() const {
  const int s = sheet_index(Sheet::Zero(rank()), h_max_);
  std::vector<int> out(static_cast<std::size_t>(n_));
  for (int x = 0; x < n_; ++x) out[static_cast<std::size_t>(x)] = s * n_ + x;
  return out;
}

int CoverWindow::translate(int v, const Sheet& shift) const {
  if (shift.size() != rank()) throw ValidationError("cover: deck shift has the wrong rank");
  return index(project(v), sheet(v) + shift);
}

VertexPath CoverWindow::lift_path(const VertexPath& path, const Sheet& start) const {
  validate_path(base_, path);
  Sheet h = start;
  VertexPath out;
  int v = index(path.vertices.front(), h);
  if (v < 0) throw WindowExceeded("lift starts outside the window");
  out.vertices.push_back(v);
  for (std::size_t i = 1; i < path.vertices.size(); ++i) {
    const int x = path.vertices[i - 1];
    const int y = path.vertices[i];
    if (x != y) {
      const int e = *base_.find_edge(x, y);
      const int j = deck_of_edge_[static_cast<std::size_t>(e)];
      if (j >= 0) h[j] += base_.edge(e).tail == x ? 1 : -1;
    }
    v = index(y, h);
    if (v < 0) throw WindowExceeded("lifted path leaves the window at step " + std::to_string(i));
    out.vertices.push_back(v);
  }
  return out;
}

Cocycle CoverWindow::pullback(const Cocycle& omega) const {
  Cocycle out{Field(lifted_.num_edges())};
  for (int e = 0; e < lifted_.num_edges(); ++e) out.values[e] = omega.values[base_edge(e)];
  return out;
}

double CoverWindow::exactness_defect(const Cocycle& omega) const {
  const Cocycle dphi = coboundary(lifted_, phi_);
  const Cocycle pulled = pullback(omega);
  return lifted_.num_edges() ? (dphi.values - pulled.values).cwiseAbs().maxCoeff() : 0.0;
}

Field CoverWindow::lift_field(const Field& f) const {
  if (f.size() != n_) throw ValidationError("cover: field does not match the base graph");
  Field out(num_vertices());
  for (int v = 0; v < num_vertices(); ++v) out[v] = f[project(v)];
  return out;
}

void CoverWindow::require_reach(int steps) const {
  if (steps <= 0) return;
  std::vector<int> depth(static_cast<std::size_t>(num_vertices()), -1);
  std::deque<int> queue;
  for (int v : fundamental_domain()) {
    depth[static_cast<std::size_t>(v)] = 0;
    queue.push_back(v);
  }
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    if (truncated(v)) {
      throw WindowExceeded("cover window H_max = " + std::to_string(h_max_) + " is too small for " +
                           std::to_string(steps) + " steps");
    }
    if (depth[static_cast<std::size_t>(v)] == steps - 1) continue;
    for (const auto& inc : lifted_.incident(v)) {
      auto& d = depth[static_cast<std::size_t>(inc.neighbor)];
      if (d < 0) {
        d = depth[static_cast<std::size_t>(v)] + 1;
        queue.push_back(inc.neighbor);
      }
    }
  }
}

}  // namespace hjforms
