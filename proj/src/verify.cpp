#include "rclbf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace rclbf {

void SectionSpec::validate(int state_dim) const {
  check(axis_i != axis_j, "section: varying indices must be distinct");
  check(axis_i >= 0 && axis_i < state_dim && axis_j >= 0 && axis_j < state_dim,
        "section: index out of range");
  check(res_i >= 2 && res_j >= 2, "section: resolution must be >= 2 per axis");
  check(fixed.size() == state_dim, "section: fixed state has wrong dimension");
  check(hi_i > lo_i && hi_j > lo_j, "section: empty range");
}

Vec SectionSpec::state_at(int gi, int gj) const {
  Vec x = fixed;
  x[axis_i] = lo_i + (hi_i - lo_i) * gi / (res_i - 1);
  x[axis_j] = lo_j + (hi_j - lo_j) * gj / (res_j - 1);
  return x;
}

double ViolationMap::max_violation(bool include_unsafe_cells) const {
  double worst = 0.0;
  for (size_t k = 0; k < violation.size(); ++k)
    if (include_unsafe_cells || !unsafe_cell[k]) worst = std::max(worst, violation[k]);
  return worst;
}

double ViolationMap::violating_fraction(double tol) const {
  size_t total = 0, bad = 0;
  for (size_t k = 0; k < violation.size(); ++k) {
    if (unsafe_cell[k]) continue;
    ++total;
    if (violation[k] > tol) ++bad;
  }
  return total == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(total);
}

std::string ViolationMap::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "x_i,x_j,V,violation,violation_dvdt,region\n";
  for (int gi = 0; gi < section.res_i; ++gi)
    for (int gj = 0; gj < section.res_j; ++gj) {
      const size_t k = static_cast<size_t>(gi) * section.res_j + gj;
      const Vec x = section.state_at(gi, gj);
      os << x[section.axis_i] << "," << x[section.axis_j] << "," << v[k] << "," << violation[k]
         << "," << violation_dvdt[k] << "," << (unsafe_cell[k] ? "unsafe" : "free") << "\n";
    }
  return os.str();
}

ViolationMap violation_map(const Mlp& net, const Controller& controller, PolicySource source,
                           const SystemModel& system, const ControllerConfig& cfg,
                           const SectionSpec& section) {
  section.validate(system.state_dim());
  ViolationMap map;
  map.section = section;
  map.lambda = cfg.lambda;
  map.scenario_count = system.scenarios().count();
  map.source = source;
  const size_t cells = static_cast<size_t>(section.res_i) * section.res_j;
  map.v.resize(cells);
  map.violation.resize(cells);
  map.violation_dvdt.resize(cells);
  map.unsafe_cell.resize(cells);

  const auto& vertices = system.scenarios().vertices;
  for (int gi = 0; gi < section.res_i; ++gi) {
    for (int gj = 0; gj < section.res_j; ++gj) {
      const size_t k = static_cast<size_t>(gi) * section.res_j + gj;
      const Vec x = section.state_at(gi, gj);
      const auto fw = net.forward(x);
      const double v = net.values_V(fw)[0];
      const Vec grad = net.input_gradients_V(fw).col(0);
      const Vec u = controller.control(x).u;

      double viol = 0.0, viol_dvdt = 0.0;
      for (const Vec& theta : vertices) {
        const double dvdt =
            grad.dot(system.eval_f(x, theta) + system.eval_g(x, theta) * u);
        viol += std::max(dvdt + cfg.lambda * v, 0.0);
        viol_dvdt += std::max(dvdt, 0.0);
      }
      map.v[k] = v;
      map.violation[k] = viol;
      map.violation_dvdt[k] = viol_dvdt;
      map.unsafe_cell[k] = system.task().unsafe(x) ? 1 : 0;
    }
  }
  return map;
}

LevelSetReport level_set_report(const Mlp& net, const SystemModel& system, double c, int n,
                                uint64_t seed) {
  check(n >= 1, "level_set_report: n must be >= 1");
  const TaskSpec& task = system.task();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LevelSetReport rep;
  int safe_ok = 0, unsafe_ok = 0;
  for (int k = 0; k < n; ++k) {
    Vec x(system.state_dim());
    for (int i = 0; i < system.state_dim(); ++i)
      x[i] = task.lo[i] + unit(rng) * (task.hi[i] - task.lo[i]);
    const bool is_safe = task.safe(x);
    const bool is_unsafe = task.unsafe(x);
    if (!is_safe && !is_unsafe) continue;
    const double v = net.value_V(x);
    if (is_safe) {
      ++rep.n_safe;
      if (v <= c) ++safe_ok;
      rep.max_safe_excess = std::max(rep.max_safe_excess, v - c);
    }
    if (is_unsafe) {
      ++rep.n_unsafe;
      if (v > c) ++unsafe_ok;
      rep.max_unsafe_deficit = std::max(rep.max_unsafe_deficit, c - v);
    }
  }
  rep.safe_fraction = rep.n_safe ? static_cast<double>(safe_ok) / rep.n_safe : 1.0;
  rep.unsafe_fraction = rep.n_unsafe ? static_cast<double>(unsafe_ok) / rep.n_unsafe : 0.0;
  return rep;
}

GoalConditionReport goal_condition_report(const Mlp& net, const SystemModel& system, double delta,
                                          int n, uint64_t seed) {
  const TaskSpec& task = system.task();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GoalConditionReport rep;
  rep.delta = delta;
  rep.v_goal = net.value_V(task.x_goal);
  rep.min_outside_ball = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    Vec x(system.state_dim());
    for (int i = 0; i < system.state_dim(); ++i)
      x[i] = task.lo[i] + unit(rng) * (task.hi[i] - task.lo[i]);
    if ((x - task.x_goal).norm() <= delta) continue;
    rep.min_outside_ball = std::min(rep.min_outside_ball, net.value_V(x));
  }
  rep.positivity_ok = rep.min_outside_ball > 0.0;
  return rep;
}

} // namespace rclbf
