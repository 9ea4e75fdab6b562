#include "hjforms/fields.hpp"

#include "hjforms/error.hpp"

#include <cmath>
#include <string>

namespace hjforms {

TimeGrid::TimeGrid(double t_start, double dt) : t_start_(t_start), dt_(dt) {
  if (!(t_start <= 0.0) || !std::isfinite(t_start)) {
    throw ValidationError("time grid: t_start must be finite and <= 0, got " + std::to_string(t_start));
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ValidationError("time grid: dt must be finite and > 0");
  }
  const double ratio = -t_start / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ValidationError("time grid: |t_start| / dt = " + std::to_string(ratio) + " is not an integer");
  }
  steps_ = static_cast<int>(rounded);
}

double TimeGrid::time(int k) const {
  if (k == steps_) return 0.0;
  return t_start_ + k * dt_;
}

double ScalarFieldPath::sup_abs() const {
  double s = 0.0;
  for (const auto& f : slices) s = std::max(s, f.cwiseAbs().maxCoeff());
  return s;
}

double sup_distance(const ScalarFieldPath& a, const ScalarFieldPath& b) {
  if (a.slices.size() != b.slices.size()) {
    throw ValidationError("sup_distance: paths have different node counts");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.slices.size(); ++k) {
    s = std::max(s, (a.slices[k] - b.slices[k]).cwiseAbs().maxCoeff());
  }
  return s;
}

Potential Potential::zero(int n) { return autonomous(Field::Zero(n)); }

Potential Potential::autonomous(Field values) {
  Potential p;
  p.n_ = static_cast<int>(values.size());
  p.values_ = std::move(values);
  if (!p.values_.allFinite()) throw ValidationError("potential: non-finite values");
  return p;
}

Potential Potential::time_dependent(int n, std::function<Field(double)> at_time) {
  Potential p;
  p.n_ = n;
  p.at_time_ = std::move(at_time);
  return p;
}

Field Potential::at(double t) const {
  if (!at_time_) return values_;
  Field v = at_time_(t);
  if (v.size() != n_ || !v.allFinite()) throw ValidationError("potential: bad slice at t = " + std::to_string(t));
  return v;
}

double Potential::sup_abs(const TimeGrid& grid) const {
  if (!at_time_) return n_ == 0 ? 0.0 : values_.cwiseAbs().maxCoeff();
  double s = 0.0;
  for (int k = 0; k < grid.nodes(); ++k) s = std::max(s, at(grid.time(k)).cwiseAbs().maxCoeff());
  return s;
}

}  // namespace hjforms
