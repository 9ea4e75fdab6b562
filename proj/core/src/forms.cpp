#include "hjforms/forms.hpp"

#include "hjforms/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace hjforms {

namespace {

void check_same_size(const Cocycle& a, const Cocycle& b) {
  if (a.values.size() != b.values.size()) throw ValidationError("cocycles live on different graphs");
}

// position[c][x] = index of x in chart c, or -1.
std::vector<std::vector<int>> chart_positions(const GraphSpace& space, const ChartForm& form) {
  std::vector<std::vector<int>> pos(form.charts.size(), std::vector<int>(static_cast<std::size_t>(space.num_vertices()), -1));
  for (std::size_t c = 0; c < form.charts.size(); ++c) {
    const Chart& chart = form.charts[c];
    if (static_cast<Eigen::Index>(chart.vertices.size()) != chart.values.size()) {
      throw ValidationError("chart " + std::to_string(c) + ": vertex and value counts differ");
    }
    for (std::size_t i = 0; i < chart.vertices.size(); ++i) {
      const int x = chart.vertices[i];
      if (x < 0 || x >= space.num_vertices()) {
        throw ValidationError("chart " + std::to_string(c) + " references a missing vertex");
      }
      pos[c][static_cast<std::size_t>(x)] = static_cast<int>(i);
    }
  }
  return pos;
}

// Components of the subgraph induced by `members` (flag per vertex).
std::vector<std::vector<int>> induced_components(const GraphSpace& space, const std::vector<char>& members) {
  std::vector<std::vector<int>> comps;
  std::vector<char> seen(members.size(), 0);
  for (int s = 0; s < space.num_vertices(); ++s) {
    if (!members[static_cast<std::size_t>(s)] || seen[static_cast<std::size_t>(s)]) continue;
    comps.emplace_back();
    std::vector<int> stack{s};
    seen[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      comps.back().push_back(x);
      for (const auto& inc : space.incident(x)) {
        const auto y = static_cast<std::size_t>(inc.neighbor);
        if (members[y] && !seen[y]) {
          seen[y] = 1;
          stack.push_back(inc.neighbor);
        }
      }
    }
  }
  return comps;
}

int max_reach(const VertexPath& path, std::size_t start, const std::vector<int>& pos) {
  std::size_t end = start;
  while (end + 1 < path.vertices.size() && pos[static_cast<std::size_t>(path.vertices[end + 1])] >= 0) ++end;
  return static_cast<int>(end);
}

}  // namespace

Cocycle Cocycle::constant(const GraphSpace& space, double c) {
  Cocycle w{Field(space.num_edges())};
  for (int e = 0; e < space.num_edges(); ++e) w.values[e] = c * space.edge(e).length;
  return w;
}

double Cocycle::at(const GraphSpace& space, int x, int y) const {
  auto e = space.find_edge(x, y);
  if (!e) throw ValidationError("vertices " + std::to_string(x) + " and " + std::to_string(y) + " are not adjacent");
  return space.edge(*e).tail == x ? values[*e] : -values[*e];
}

Cocycle operator+(const Cocycle& a, const Cocycle& b) {
  check_same_size(a, b);
  return {a.values + b.values};
}

Cocycle operator-(const Cocycle& a, const Cocycle& b) {
  check_same_size(a, b);
  return {a.values - b.values};
}

Cocycle operator*(double s, const Cocycle& a) { return {s * a.values}; }

Cocycle coboundary(const GraphSpace& space, const Field& f) {
  Cocycle w{Field(space.num_edges())};
  for (int e = 0; e < space.num_edges(); ++e) w.values[e] = f[space.edge(e).head] - f[space.edge(e).tail];
  return w;
}

void validate_path(const GraphSpace& space, const VertexPath& path) {
  if (path.vertices.empty()) throw ValidationError("empty path");
  for (std::size_t i = 0; i < path.vertices.size(); ++i) {
    const int x = path.vertices[i];
    if (x < 0 || x >= space.num_vertices()) throw ValidationError("path visits a missing vertex");
    if (i > 0 && x != path.vertices[i - 1] && !space.find_edge(path.vertices[i - 1], x)) {
      throw ValidationError("path step " + std::to_string(i) + " is not an edge");
    }
  }
}

double path_length(const GraphSpace& space, const VertexPath& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.vertices.size(); ++i) {
    if (path.vertices[i] == path.vertices[i - 1]) continue;
    len += space.edge(*space.find_edge(path.vertices[i - 1], path.vertices[i])).length;
  }
  return len;
}

VertexPath concatenate(const VertexPath& a, const VertexPath& b) {
  if (a.vertices.empty()) return b;
  if (b.vertices.empty()) return a;
  if (a.vertices.back() != b.vertices.front()) throw ValidationError("concatenate: paths do not meet");
  VertexPath out = a;
  out.vertices.insert(out.vertices.end(), b.vertices.begin() + 1, b.vertices.end());
  return out;
}

double integrate(const GraphSpace& space, const Cocycle& omega, const VertexPath& path) {
  validate_path(space, path);
  double s = 0.0;
  for (std::size_t i = 1; i < path.vertices.size(); ++i) {
    const int x = path.vertices[i - 1];
    const int y = path.vertices[i];
    if (x != y) s += omega.at(space, x, y);
  }
  return s;
}

void validate_chart_form(const GraphSpace& space, const ChartForm& form, double tol) {
  const auto pos = chart_positions(space, form);
  const auto n = static_cast<std::size_t>(space.num_vertices());
  std::vector<char> covered(n, 0);
  for (std::size_t c = 0; c < form.charts.size(); ++c) {
    std::vector<char> members(n, 0);
    for (int x : form.charts[c].vertices) members[static_cast<std::size_t>(x)] = covered[static_cast<std::size_t>(x)] = 1;
    if (form.charts[c].vertices.empty() || induced_components(space, members).size() != 1) {
      throw ValidationError("chart " + std::to_string(c) + " does not induce a connected subgraph");
    }
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (!covered[x]) throw ValidationError("vertex " + std::to_string(x) + " lies in no chart");
  }
  for (std::size_t i = 0; i < form.charts.size(); ++i) {
    for (std::size_t j = i + 1; j < form.charts.size(); ++j) {
      std::vector<char> members(n, 0);
      bool any = false;
      for (std::size_t x = 0; x < n; ++x) {
        if (pos[i][x] >= 0 && pos[j][x] >= 0) members[x] = any = true;
      }
      if (!any) continue;
      for (const auto& comp : induced_components(space, members)) {
        auto diff = [&](int x) {
          const auto ux = static_cast<std::size_t>(x);
          return form.charts[i].values[pos[i][ux]] - form.charts[j].values[pos[j][ux]];
        };
        const double d0 = diff(comp.front());
        for (int x : comp) {
          if (std::abs(diff(x) - d0) > tol) {
            throw ValidationError("charts " + std::to_string(i) + " and " + std::to_string(j) +
                                  " differ by a non-constant on a component of their overlap");
          }
        }
      }
    }
  }
}

Cocycle to_cocycle(const GraphSpace& space, const ChartForm& form) {
  const auto pos = chart_positions(space, form);
  Cocycle w{Field(space.num_edges())};
  for (int e = 0; e < space.num_edges(); ++e) {
    const auto a = static_cast<std::size_t>(space.edge(e).tail);
    const auto b = static_cast<std::size_t>(space.edge(e).head);
    bool found = false;
    for (std::size_t c = 0; c < form.charts.size() && !found; ++c) {
      if (pos[c][a] >= 0 && pos[c][b] >= 0) {
        w.values[e] = form.charts[c].values[pos[c][b]] - form.charts[c].values[pos[c][a]];
        found = true;
      }
    }
    if (!found) throw ChartGap("edge " + std::to_string(e) + " lies in no chart");
  }
  return w;
}

ChartForm to_chart_form(const GraphSpace& space, const Cocycle& omega) {
  ChartForm form;
  for (int x = 0; x < space.num_vertices(); ++x) {
    Chart star;
    star.vertices.push_back(x);
    std::vector<double> vals{0.0};
    for (const auto& inc : space.incident(x)) {
      star.vertices.push_back(inc.neighbor);
      vals.push_back(omega.along(inc));
    }
    bool consistent = true;
    for (std::size_t i = 1; i < star.vertices.size() && consistent; ++i) {
      for (std::size_t j = i + 1; j < star.vertices.size() && consistent; ++j) {
        if (space.find_edge(star.vertices[i], star.vertices[j])) {
          const double direct = omega.at(space, star.vertices[i], star.vertices[j]);
          consistent = std::abs(direct - (vals[j] - vals[i])) <= 1e-12;
        }
      }
    }
    if (consistent) {
      star.values = Eigen::Map<Field>(vals.data(), static_cast<Eigen::Index>(vals.size()));
      form.charts.push_back(std::move(star));
    } else {
      for (const auto& inc : space.incident(x)) {
        if (inc.neighbor < x) continue;
        Field v(2);
        v << 0.0, omega.along(inc);
        form.charts.push_back({{x, inc.neighbor}, v});
      }
    }
  }
  return form;
}

std::vector<PathSegment> greedy_partition(const GraphSpace& space, const ChartForm& form, const VertexPath& path) {
  validate_path(space, path);
  const auto pos = chart_positions(space, form);
  std::vector<PathSegment> parts;
  const std::size_t last = path.vertices.size() - 1;
  std::size_t start = 0;
  do {
    int best_chart = -1;
    int best_end = -1;
    for (std::size_t c = 0; c < form.charts.size(); ++c) {
      if (pos[c][static_cast<std::size_t>(path.vertices[start])] < 0) continue;
      const int end = max_reach(path, start, pos[c]);
      if (end > best_end) {
        best_end = end;
        best_chart = static_cast<int>(c);
      }
    }
    if (best_chart < 0 || (static_cast<std::size_t>(best_end) == start && start < last)) {
      throw ChartGap("path step " + std::to_string(start) + " leaves every chart");
    }
    parts.push_back({static_cast<int>(start), best_end, best_chart});
    start = static_cast<std::size_t>(best_end);
  } while (start < last);
  return parts;
}

std::vector<PathSegment> random_partition(const GraphSpace& space, const ChartForm& form, const VertexPath& path,
                                          std::mt19937_64& rng) {
  validate_path(space, path);
  const auto pos = chart_positions(space, form);
  std::vector<PathSegment> parts;
  const std::size_t last = path.vertices.size() - 1;
  std::size_t start = 0;
  do {
    std::vector<std::pair<int, int>> options;  // (chart, max end)
    for (std::size_t c = 0; c < form.charts.size(); ++c) {
      if (pos[c][static_cast<std::size_t>(path.vertices[start])] < 0) continue;
      const int end = max_reach(path, start, pos[c]);
      if (static_cast<std::size_t>(end) > start || start == last) options.emplace_back(static_cast<int>(c), end);
    }
    if (options.empty()) throw ChartGap("path step " + std::to_string(start) + " leaves every chart");
    const auto [chart, reach] = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    const int lo = start == last ? static_cast<int>(start) : static_cast<int>(start) + 1;
    const int end = std::uniform_int_distribution<int>(lo, reach)(rng);
    parts.push_back({static_cast<int>(start), end, chart});
    start = static_cast<std::size_t>(end);
  } while (start < last);
  return parts;
}

double integrate_partition(const GraphSpace& space, const ChartForm& form, const VertexPath& path,
                           std::span<const PathSegment> partition) {
  validate_path(space, path);
  const auto pos = chart_positions(space, form);
  if (partition.empty() || partition.front().first != 0 ||
      static_cast<std::size_t>(partition.back().last) != path.vertices.size() - 1) {
    throw ValidationError("partition does not span the path");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < partition.size(); ++k) {
    const PathSegment& seg = partition[k];
    if (k > 0 && seg.first != partition[k - 1].last) throw ValidationError("partition segments are not contiguous");
    if (seg.chart < 0 || static_cast<std::size_t>(seg.chart) >= form.charts.size() || seg.last < seg.first) {
      throw ValidationError("malformed partition segment");
    }
    const auto& p = pos[static_cast<std::size_t>(seg.chart)];
    for (int i = seg.first; i <= seg.last; ++i) {
      if (p[static_cast<std::size_t>(path.vertices[static_cast<std::size_t>(i)])] < 0) {
        throw ChartGap("partition segment leaves its chart");
      }
    }
    const Field& f = form.charts[static_cast<std::size_t>(seg.chart)].values;
    s += f[p[static_cast<std::size_t>(path.vertices[static_cast<std::size_t>(seg.last)])]] -
         f[p[static_cast<std::size_t>(path.vertices[static_cast<std::size_t>(seg.first)])]];
  }
  return s;
}

double integrate(const GraphSpace& space, const ChartForm& form, const VertexPath& path) {
  const auto parts = greedy_partition(space, form, path);
  return integrate_partition(space, form, path, parts);
}

CycleBasis cycle_basis(const GraphSpace& space) {
  const auto n = static_cast<std::size_t>(space.num_vertices());
  CycleBasis b;
  b.parent_edge.assign(n, -1);
  b.parent.assign(n, -1);
  std::vector<char> seen(n, 0);
  std::vector<char> tree_edge(static_cast<std::size_t>(space.num_edges()), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    const int x = queue.front();
    queue.pop_front();
    b.bfs_order.push_back(x);
    for (const auto& inc : space.incident(x)) {
      const auto y = static_cast<std::size_t>(inc.neighbor);
      if (seen[y]) continue;
      seen[y] = 1;
      b.parent[y] = x;
      b.parent_edge[y] = inc.edge;
      tree_edge[static_cast<std::size_t>(inc.edge)] = 1;
      queue.push_back(inc.neighbor);
    }
  }
  std::vector<int> depth(n, 0);
  for (int x : b.bfs_order) {
    if (b.parent[static_cast<std::size_t>(x)] >= 0) depth[static_cast<std::size_t>(x)] = depth[static_cast<std::size_t>(b.parent[static_cast<std::size_t>(x)])] + 1;
  }
  for (int e = 0; e < space.num_edges(); ++e) {
    if (tree_edge[static_cast<std::size_t>(e)]) continue;
    b.chords.push_back(e);
    // tail -> head, then tree path head -> lca -> tail.
    int u = space.edge(e).head;
    int v = space.edge(e).tail;
    std::vector<int> up{u};
    std::vector<int> down{v};
    while (u != v) {
      if (depth[static_cast<std::size_t>(u)] >= depth[static_cast<std::size_t>(v)]) {
        u = b.parent[static_cast<std::size_t>(u)];
        up.push_back(u);
      } else {
        v = b.parent[static_cast<std::size_t>(v)];
        down.push_back(v);
      }
    }
    VertexPath cyc;
    cyc.vertices.push_back(space.edge(e).tail);
    cyc.vertices.insert(cyc.vertices.end(), up.begin(), up.end());
    for (auto it = down.rbegin() + 1; it != down.rend(); ++it) cyc.vertices.push_back(*it);
    b.cycles.push_back(std::move(cyc));
  }
  return b;
}

Field tree_primitive(const GraphSpace& space, const CycleBasis& basis, const Cocycle& omega) {
  Field f = Field::Zero(space.num_vertices());
  for (int x : basis.bfs_order) {
    const int p = basis.parent[static_cast<std::size_t>(x)];
    if (p < 0) continue;
    const int e = basis.parent_edge[static_cast<std::size_t>(x)];
    const double w = space.edge(e).tail == p ? omega.values[e] : -omega.values[e];
    f[x] = f[p] + w;
  }
  return f;
}

Field periods(const GraphSpace& space, const Cocycle& omega, const CycleBasis& basis) {
  const Field f0 = tree_primitive(space, basis, omega);
  Field p(basis.rank());
  for (int j = 0; j < basis.rank(); ++j) {
    const Edge& e = space.edge(basis.chords[static_cast<std::size_t>(j)]);
    p[j] = omega.values[basis.chords[static_cast<std::size_t>(j)]] + f0[e.tail] - f0[e.head];
  }
  return p;
}

Eigen::VectorXi chord_crossings(const GraphSpace& space, const CycleBasis& basis, const VertexPath& path) {
  validate_path(space, path);
  std::vector<int> chord_index(static_cast<std::size_t>(space.num_edges()), -1);
  for (int j = 0; j < basis.rank(); ++j) chord_index[static_cast<std::size_t>(basis.chords[static_cast<std::size_t>(j)])] = j;
  Eigen::VectorXi count = Eigen::VectorXi::Zero(basis.rank());
  for (std::size_t i = 1; i < path.vertices.size(); ++i) {
    const int x = path.vertices[i - 1];
    const int y = path.vertices[i];
    if (x == y) continue;
    const int e = *space.find_edge(x, y);
    const int j = chord_index[static_cast<std::size_t>(e)];
    if (j >= 0) count[j] += space.edge(e).tail == x ? 1 : -1;
  }
  return count;
}

double closure_defect(const GraphSpace& space, const Cocycle& omega) {
  double worst = 0.0;
  for (const auto& face : space.faces()) {
    VertexPath loop{face};
    loop.vertices.push_back(face.front());
    worst = std::max(worst, std::abs(integrate(space, omega, loop)));
  }
  return worst;
}

bool equivalent(const GraphSpace& space, const Cocycle& a, const Cocycle& b, double tol) {
  const Field p = periods(space, a - b, cycle_basis(space));
  return p.size() == 0 || p.cwiseAbs().maxCoeff() <= tol;
}

double path_bound_constant(const GraphSpace& space, const Cocycle& omega) {
  double c = 0.0;
  for (int e = 0; e < space.num_edges(); ++e) c = std::max(c, std::abs(omega.values[e]) / space.edge(e).length);
  return c;
}

Field gamma_hat(const GraphSpace& space, const Cocycle& a, const Cocycle& b) {
  check_same_size(a, b);
  Field out(space.num_vertices());
  for (int x = 0; x < space.num_vertices(); ++x) {
    double s = 0.0;
    for (const auto& inc : space.incident(x)) {
      s += space.edge(inc.edge).conductance * a.along(inc) * b.along(inc);
    }
    out[x] = s / (2.0 * space.measure()[x]);
  }
  return out;
}

Field divergence(const GraphSpace& space, const Cocycle& omega) {
  Field out(space.num_vertices());
  for (int x = 0; x < space.num_vertices(); ++x) {
    double s = 0.0;
    for (const auto& inc : space.incident(x)) s += space.edge(inc.edge).conductance * omega.along(inc);
    out[x] = s / space.measure()[x];
  }
  return out;
}

HarmonicReport is_harmonic(const GraphSpace& space, const Cocycle& omega, double tol) {
  HarmonicReport r;
  r.residual = divergence(space, omega);
  r.max_residual = r.residual.size() ? r.residual.cwiseAbs().maxCoeff() : 0.0;
  r.harmonic = r.max_residual <= tol;
  return r;
}

Cocycle harmonic_representative(const GraphSpace& space, const Cocycle& omega) {
  const int n = space.num_vertices();
  if (n == 1) return omega;
  // S h = -M div(omega), pinned at vertex 0: -S restricted to 1..n-1 is SPD.
  const Field rhs = -space.measure().cwiseProduct(divergence(space, omega));
  Eigen::SparseMatrix<double> reduced = (-space.stiffness()).bottomRightCorner(n - 1, n - 1);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(reduced);
  if (solver.info() != Eigen::Success) throw StepRejected("harmonic representative: factorization failed");
  Field h = Field::Zero(n);
  h.tail(n - 1) = solver.solve(-rhs.tail(n - 1));
  return omega + coboundary(space, h);
}

HypothesisReport check_hypotheses(const GraphSpace& space, const Cocycle& omega, const Potential& potential,
                                  const TimeGrid& grid, double beta, int probes, std::uint64_t seed) {
  if (!(beta > 0.0)) throw ValidationError("check_hypotheses: beta must be positive");
  HypothesisReport r;
  const Field gh = gamma_hat(space, omega, omega);
  const VNorms gh_norms = v_norms(space, gh);
  r.gamma_hat_linf = gh_norms.linf;
  r.gamma_hat_v1 = gh_norms.v1;
  r.harmonic_residual = is_harmonic(space, omega, 0.0).max_residual;
  r.closure_defect = closure_defect(space, omega);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const HeatSemigroup heat(space, 1.0);
  for (int p = 0; p < probes; ++p) {
    Field v = Field::NullaryExpr(space.num_vertices(), [&]() { return unif(rng); });
    // Alternate rough and smoothed probes; smooth ones dominate on fine meshes.
    if (p % 2 == 1) v = heat.apply(v, 1e-3 * (1 + p % 7));
    const double denom = v_norms(space, v).v2;
    if (denom == 0.0) continue;
    const double ratio = v_norms(space, gamma_hat(space, omega, coboundary(space, v))).v1 / denom;
    if (ratio > r.d5_estimate || r.d5_argmax < 0) {
      r.d5_estimate = ratio;
      r.d5_argmax = p;
      r.d5_probe = v;
    }
  }

  r.sup_v = potential.sup_abs(grid);
  Field prev;
  for (int k = 0; k < grid.nodes(); ++k) {
    const Field vk = potential.at(grid.time(k));
    for (const auto& e : space.edges()) {
      r.v_lipschitz_space = std::max(r.v_lipschitz_space, std::abs(vk[e.head] - vk[e.tail]) / e.length);
    }
    if (k > 0) r.v_lipschitz_time = std::max(r.v_lipschitz_time, (vk - prev).cwiseAbs().maxCoeff() / grid.dt());
    prev = vk;
    if (potential.is_autonomous()) break;
  }
  r.gradient_flow_tau_bound =
      r.sup_v > 0.0 ? 1.0 / (2.0 * beta * r.sup_v) : std::numeric_limits<double>::infinity();

  double bound = 0.0;
  for (int x = 0; x < space.num_vertices(); ++x) {
    double row = 0.0;
    for (const auto& inc : space.incident(x)) {
      const double w = space.edge(inc.edge).conductance;
      row += w / (2.0 * beta) + 0.5 * w * std::abs(omega.along(inc));
    }
    row = 2.0 * row / space.measure()[x] + 0.5 * beta * gh[x] + beta * r.sup_v;
    bound = std::max(bound, row);
  }
  r.generator_bound = bound;
  return r;
}

}  // namespace hjforms
