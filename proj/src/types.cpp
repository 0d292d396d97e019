#include "rclbf/types.hpp"

namespace rclbf {

Vec ScenarioSet::lower_bounds() const {
  check(!vertices.empty(), "ScenarioSet has no vertices");
  Vec lo = vertices.front();
  for (const auto& v : vertices) lo = lo.cwiseMin(v);
  return lo;
}

Vec ScenarioSet::upper_bounds() const {
  check(!vertices.empty(), "ScenarioSet has no vertices");
  Vec hi = vertices.front();
  for (const auto& v : vertices) hi = hi.cwiseMax(v);
  return hi;
}

bool ScenarioSet::contains(const Vec& theta, double tol) const {
  if (theta.size() != param_dim()) return false;
  // Exact for axis-aligned hulls; a (conservative) bounding-box check otherwise.
  const Vec lo = lower_bounds();
  const Vec hi = upper_bounds();
  return (theta.array() >= lo.array() - tol).all() && (theta.array() <= hi.array() + tol).all();
}

bool TaskSpec::in_domain(const Vec& x, double slack) const {
  if (x.size() != lo.size()) return false;
  return (x.array() >= lo.array() - slack).all() && (x.array() <= hi.array() + slack).all();
}

} // namespace rclbf
