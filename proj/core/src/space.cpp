#include "hjforms/space.hpp"

#include "hjforms/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace hjforms {

namespace {

void check_connected(int n, const std::vector<int>& offset, const std::vector<Incidence>& inc) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    for (int i = offset[x]; i < offset[x + 1]; ++i) {
      int y = inc[static_cast<std::size_t>(i)].neighbor;
      if (!seen[static_cast<std::size_t>(y)]) {
        seen[static_cast<std::size_t>(y)] = 1;
        ++count;
        stack.push_back(y);
      }
    }
  }
  if (count != n) throw ValidationError("graph is not connected");
}

}  // namespace

GraphSpace::GraphSpace(int num_vertices, std::vector<Edge> edges, Field measure,
                       std::vector<std::vector<int>> faces, bool probability_measure)
    : n_(num_vertices), edges_(std::move(edges)), measure_(std::move(measure)), faces_(std::move(faces)) {
  if (n_ < 1) throw ValidationError("graph needs at least one vertex");
  if (measure_.size() != n_) throw ValidationError("measure size does not match vertex count");
  for (int x = 0; x < n_; ++x) {
    if (!(measure_[x] > 0.0) || !std::isfinite(measure_[x])) {
      throw ValidationError("measure must be strictly positive at vertex " + std::to_string(x));
    }
  }
  if (probability_measure && std::abs(measure_.sum() - 1.0) > 1e-12) {
    throw ValidationError("measure must have total mass 1");
  }

  std::vector<int> degree(static_cast<std::size_t>(n_), 0);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& ed = edges_[e];
    if (ed.tail < 0 || ed.tail >= n_ || ed.head < 0 || ed.head >= n_) {
      throw ValidationError("edge " + std::to_string(e) + " references a missing vertex");
    }
    if (ed.tail == ed.head) throw ValidationError("edge " + std::to_string(e) + " is a loop");
    if (!(ed.length > 0.0) || !(ed.conductance > 0.0) || !std::isfinite(ed.length) ||
        !std::isfinite(ed.conductance)) {
      throw ValidationError("edge " + std::to_string(e) + " needs positive length and conductance");
    }
    ++degree[static_cast<std::size_t>(ed.tail)];
    ++degree[static_cast<std::size_t>(ed.head)];
  }
  incidence_offset_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (int x = 0; x < n_; ++x) incidence_offset_[x + 1] = incidence_offset_[x] + degree[x];
  incidence_.resize(static_cast<std::size_t>(incidence_offset_.back()));
  std::vector<int> fill(incidence_offset_.begin(), incidence_offset_.end() - 1);
  for (int e = 0; e < num_edges(); ++e) {
    const Edge& ed = edges_[static_cast<std::size_t>(e)];
    incidence_[static_cast<std::size_t>(fill[ed.tail]++)] = {e, ed.head, 1.0};
    incidence_[static_cast<std::size_t>(fill[ed.head]++)] = {e, ed.tail, -1.0};
  }
  for (int x = 0; x < n_; ++x) {
    auto begin = incidence_.begin() + incidence_offset_[x];
    auto end = incidence_.begin() + incidence_offset_[x + 1];
    std::sort(begin, end, [](const Incidence& a, const Incidence& b) { return a.neighbor < b.neighbor; });
    for (auto it = begin; it + 1 < end; ++it) {
      if (it->neighbor == (it + 1)->neighbor) {
        throw ValidationError("parallel edges between " + std::to_string(x) + " and " +
                              std::to_string(it->neighbor));
      }
    }
  }
  check_connected(n_, incidence_offset_, incidence_);

  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const auto& face = faces_[f];
    if (face.size() < 3) throw ValidationError("face " + std::to_string(f) + " has fewer than 3 vertices");
    for (std::size_t i = 0; i < face.size(); ++i) {
      if (!find_edge(face[i], face[(i + 1) % face.size()])) {
        throw ValidationError("face " + std::to_string(f) + " is not a cycle of the graph");
      }
    }
  }

  hop_distance_.resize(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) hop_distance_[e] = edges_[e].length;
  // A detour uses at least two edges, so it cannot beat an edge no longer
  // than twice the shortest one.
  double min_len = std::numeric_limits<double>::infinity();
  for (const auto& ed : edges_) min_len = std::min(min_len, ed.length);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e].length > 2.0 * min_len) {
      hop_distance_[e] = distances_from(edges_[e].tail)[edges_[e].head];
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * edges_.size());
  for (const auto& ed : edges_) {
    trip.emplace_back(ed.tail, ed.head, ed.conductance);
    trip.emplace_back(ed.head, ed.tail, ed.conductance);
    trip.emplace_back(ed.tail, ed.tail, -ed.conductance);
    trip.emplace_back(ed.head, ed.head, -ed.conductance);
  }
  auto s = std::make_shared<Eigen::SparseMatrix<double>>(n_, n_);
  s->setFromTriplets(trip.begin(), trip.end());
  stiffness_ = std::move(s);
}

GraphSpace GraphSpace::cycle(int n, double length) {
  if (n < 3) throw ValidationError("cycle needs at least 3 vertices");
  if (!(length > 0.0)) throw ValidationError("cycle length must be positive");
  const double h = length / n;
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, h, 1.0 / (h * length)});
  GraphSpace g(n, std::move(edges), Field::Constant(n, 1.0 / n));
  g.coordinates_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g.coordinates_[static_cast<std::size_t>(i)] = i * h;
  g.period_length_ = length;
  return g;
}

GraphSpace GraphSpace::path(int n, double length) {
  if (n < 2) throw ValidationError("path needs at least 2 vertices");
  if (!(length > 0.0)) throw ValidationError("path length must be positive");
  const double h = length / (n - 1);
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, h, 1.0 / (h * length)});
  GraphSpace g(n, std::move(edges), Field::Constant(n, 1.0 / n));
  g.coordinates_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g.coordinates_[static_cast<std::size_t>(i)] = i * h;
  g.period_length_ = length;
  return g;
}

GraphSpace GraphSpace::torus(int nx, int ny, double length_x, double length_y) {
  if (nx < 3 || ny < 3) throw ValidationError("torus needs at least 3 vertices per direction");
  const double hx = length_x / nx;
  const double hy = length_y / ny;
  auto id = [nx](int i, int j) { return j * nx + i; };
  std::vector<Edge> edges;
  std::vector<std::vector<int>> faces;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      edges.push_back({id(i, j), id((i + 1) % nx, j), hx, hy / (hx * length_x * length_y)});
      edges.push_back({id(i, j), id(i, (j + 1) % ny), hy, hx / (hy * length_x * length_y)});
      faces.push_back({id(i, j), id((i + 1) % nx, j), id((i + 1) % nx, (j + 1) % ny), id(i, (j + 1) % ny)});
    }
  }
  const int n = nx * ny;
  return GraphSpace(n, std::move(edges), Field::Constant(n, 1.0 / n), std::move(faces));
}

std::span<const Incidence> GraphSpace::incident(int x) const {
  const auto begin = static_cast<std::size_t>(incidence_offset_[static_cast<std::size_t>(x)]);
  const auto end = static_cast<std::size_t>(incidence_offset_[static_cast<std::size_t>(x) + 1]);
  return {incidence_.data() + begin, end - begin};
}

std::optional<int> GraphSpace::find_edge(int x, int y) const {
  if (x < 0 || x >= n_) return std::nullopt;
  auto inc = incident(x);
  auto it = std::lower_bound(inc.begin(), inc.end(), y,
                             [](const Incidence& a, int v) { return a.neighbor < v; });
  if (it != inc.end() && it->neighbor == y) return it->edge;
  return std::nullopt;
}

Field GraphSpace::distances_from(int x) const {
  Field dist = Field::Constant(n_, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[x] = 0.0;
  queue.emplace(0.0, x);
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (const auto& inc : incident(v)) {
      double nd = d + edges_[static_cast<std::size_t>(inc.edge)].length;
      if (nd < dist[inc.neighbor]) {
        dist[inc.neighbor] = nd;
        queue.emplace(nd, inc.neighbor);
      }
    }
  }
  return dist;
}

double GraphSpace::distance(int x, int y) const { return distances_from(x)[y]; }

Eigen::SparseMatrix<double> GraphSpace::laplacian_matrix() const {
  Eigen::SparseMatrix<double> lap = *stiffness_;
  Field inv_m = measure_.cwiseInverse();
  return inv_m.asDiagonal() * lap;
}

double GraphSpace::integrate(const Field& f) const {
  double s = 0.0;
  for (int x = 0; x < n_; ++x) s += f[x] * measure_[x];
  return s;
}

double GraphSpace::l2_norm(const Field& f) const { return std::sqrt(integrate(f.cwiseProduct(f))); }

double GraphSpace::energy_norm(const Field& f) const {
  return std::sqrt(integrate(f.cwiseProduct(f)) + integrate(gamma(*this, f, f)));
}

Field gamma(const GraphSpace& space, const Field& f, const Field& g) {
  const int n = space.num_vertices();
  Field out(n);
  for (int x = 0; x < n; ++x) {
    double s = 0.0;
    for (const auto& inc : space.incident(x)) {
      const double w = space.edge(inc.edge).conductance;
      s += w * (f[inc.neighbor] - f[x]) * (g[inc.neighbor] - g[x]);
    }
    out[x] = s / (2.0 * space.measure()[x]);
  }
  return out;
}

Field laplacian(const GraphSpace& space, const Field& f) {
  const int n = space.num_vertices();
  Field out(n);
  for (int x = 0; x < n; ++x) {
    double s = 0.0;
    for (const auto& inc : space.incident(x)) {
      s += space.edge(inc.edge).conductance * (f[inc.neighbor] - f[x]);
    }
    out[x] = s / space.measure()[x];
  }
  return out;
}

HeatSemigroup::HeatSemigroup(const GraphSpace& space, double beta) : beta_(beta) {
  if (!(beta > 0.0)) throw ValidationError("heat semigroup: beta must be positive");
  const Field sqrt_m = space.measure().cwiseSqrt();
  const Field inv_sqrt_m = sqrt_m.cwiseInverse();
  Eigen::MatrixXd sym = Eigen::MatrixXd(space.stiffness());
  sym = inv_sqrt_m.asDiagonal() * sym * inv_sqrt_m.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw StepRejected("heat semigroup: eigendecomposition failed");
  eigenvalues_ = solver.eigenvalues().cwiseMin(0.0);
  const Eigen::MatrixXd& q = solver.eigenvectors();
  analysis_ = q.transpose() * sqrt_m.asDiagonal();
  synthesis_ = inv_sqrt_m.asDiagonal() * q;
}

Field HeatSemigroup::decay(double tau) const {
  return (eigenvalues_ * (tau / (2.0 * beta_))).array().exp().matrix();
}

Field HeatSemigroup::apply(const Field& f, double tau) const {
  if (!(tau >= 0.0)) throw ValidationError("heat flow: duration must be >= 0");
  if (tau == 0.0) return f;
  return from_spectral(decay(tau).cwiseProduct(to_spectral(f)));
}

int implicit_euler_substeps(const GraphSpace& space, double tau, double beta, double tolerance,
                            int max_substeps) {
  double gersh = 0.0;
  for (int x = 0; x < space.num_vertices(); ++x) {
    gersh = std::max(gersh, -2.0 * space.stiffness().coeff(x, x) / space.measure()[x]);
  }
  const double x_max = gersh * tau / (2.0 * beta);
  auto worst = [x_max](int eta) {
    double err = 0.0;
    const int samples = 2000;
    for (int i = 0; i <= samples; ++i) {
      // Sample densely near the origin where the error peaks for large X.
      const double x = x_max * std::pow(static_cast<double>(i) / samples, 2.0);
      err = std::max(err, std::abs(std::exp(-x) - std::pow(1.0 + x / eta, -eta)));
    }
    return err;
  };
  int eta = 1;
  while (eta < max_substeps && worst(eta) > tolerance) eta = std::min(max_substeps, eta * 2);
  return eta;
}

Field heat_flow(const GraphSpace& space, const Field& f, double tau, double beta, const HeatOptions& options) {
  if (!(tau >= 0.0)) throw ValidationError("heat flow: duration must be >= 0");
  if (!(beta > 0.0)) throw ValidationError("heat flow: beta must be positive");
  if (tau == 0.0) return f;
  if (options.backend == HeatBackend::kSpectral) return HeatSemigroup(space, beta).apply(f, tau);

  const int eta = options.substeps > 0
                      ? options.substeps
                      : implicit_euler_substeps(space, tau, beta, options.splitting_tolerance,
                                                options.max_substeps);
  const double a = tau / (2.0 * beta * eta);
  Eigen::SparseMatrix<double> system = -a * space.stiffness();
  for (int x = 0; x < space.num_vertices(); ++x) system.coeffRef(x, x) += space.measure()[x];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
  if (solver.info() != Eigen::Success) throw StepRejected("heat flow: factorization failed");
  Field out = f;
  for (int i = 0; i < eta; ++i) {
    const Field rhs = space.measure().cwiseProduct(out);
    out = solver.solve(rhs);
  }
  return out;
}

VNorms v_norms(const GraphSpace& space, const Field& f) {
  VNorms r;
  if (f.size() == 0) return r;
  r.linf = f.cwiseAbs().maxCoeff();
  r.gamma_linf = gamma(space, f, f).cwiseAbs().maxCoeff();
  r.laplacian_linf = laplacian(space, f).cwiseAbs().maxCoeff();
  r.v1 = std::sqrt(r.linf * r.linf + r.gamma_linf);
  r.v2 = std::sqrt(r.v1 * r.v1 + r.laplacian_linf * r.laplacian_linf);
  return r;
}

double chain_rule_defect(const GraphSpace& space, const Field& f, const std::function<double(double)>& eta,
                         const std::function<double(double)>& d_eta,
                         const std::function<double(double)>& d2_eta) {
  const Field ef = f.unaryExpr(eta);
  const Field lhs = laplacian(space, ef);
  const Field lf = laplacian(space, f);
  const Field gf = gamma(space, f, f);
  double defect = 0.0;
  for (int x = 0; x < space.num_vertices(); ++x) {
    defect = std::max(defect, std::abs(lhs[x] - d_eta(f[x]) * lf[x] - d2_eta(f[x]) * gf[x]));
  }
  return defect;
}

double smoothing_constant(const GraphSpace& space, const HeatSemigroup& heat, double tau,
                          std::span<const Field> probes) {
  double c = 0.0;
  for (const auto& f : probes) {
    const double norm = space.l2_norm(f);
    if (norm == 0.0) continue;
    c = std::max(c, std::sqrt(tau) * space.energy_norm(heat.apply(f, tau)) / norm);
  }
  return c;
}

}  // namespace hjforms
