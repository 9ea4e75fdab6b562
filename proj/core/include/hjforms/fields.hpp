#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace hjforms {

/// Real function on the vertices of a graph.
using Field = Eigen::VectorXd;

/// Uniform grid on [t_start, 0]; node k sits at t_start + k * dt, node
/// count() - 1 is t = 0.
class TimeGrid {
 public:
  TimeGrid() = default;
  /// Throws ValidationError unless t_start <= 0, dt > 0 and |t_start| / dt is
  /// an integer (to 1e-9 relative).
  TimeGrid(double t_start, double dt);

  /// Grid over [-horizon, 0].
  static TimeGrid over(double horizon, double dt) { return TimeGrid(-horizon, dt); }

  double t_start() const { return t_start_; }
  double dt() const { return dt_; }
  /// Number of steps K; there are K + 1 nodes.
  int steps() const { return steps_; }
  int nodes() const { return steps_ + 1; }
  double time(int k) const;

 private:
  double t_start_ = 0.0;
  double dt_ = 1.0;
  int steps_ = 0;
};

/// One vertex field per node of a TimeGrid.
struct ScalarFieldPath {
  TimeGrid grid;
  std::vector<Field> slices;

  ScalarFieldPath() = default;
  ScalarFieldPath(TimeGrid g, std::vector<Field> s) : grid(g), slices(std::move(s)) {}

  const Field& at(int k) const { return slices.at(static_cast<std::size_t>(k)); }
  const Field& final_slice() const { return slices.back(); }
  const Field& initial_slice() const { return slices.front(); }
  double sup_abs() const;
};

/// Max over nodes of the sup-norm difference; grids must have equal node count.
double sup_distance(const ScalarFieldPath& a, const ScalarFieldPath& b);

/// Potential V(t, x). Either autonomous or a callable t -> field.
class Potential {
 public:
  Potential() = default;
  static Potential zero(int n);
  static Potential autonomous(Field values);
  static Potential time_dependent(int n, std::function<Field(double)> at_time);

  Field at(double t) const;
  bool is_autonomous() const { return !at_time_; }
  int size() const { return n_; }
  /// sup |V| over the vertices and the nodes of `grid`.
  double sup_abs(const TimeGrid& grid) const;

 private:
  int n_ = 0;
  Field values_;
  std::function<Field(double)> at_time_;
};

}  // namespace hjforms
