#include "rclbf/system.hpp"

namespace rclbf {

Vec SystemModel::eval_f(const Vec& x, const Vec& theta) const {
  check(x.size() == n_, name_ + ": state dimension mismatch in eval_f");
  check(theta.size() == scenarios_.param_dim(), name_ + ": parameter dimension mismatch in eval_f");
  Vec f = f_impl(x, theta);
  check(f.size() == n_, name_ + ": drift has wrong length");
  return f;
}

Mat SystemModel::eval_g(const Vec& x, const Vec& theta) const {
  check(x.size() == n_, name_ + ": state dimension mismatch in eval_g");
  check(theta.size() == scenarios_.param_dim(), name_ + ": parameter dimension mismatch in eval_g");
  Mat g = g_impl(x, theta);
  check(g.rows() == n_ && g.cols() == ell_, name_ + ": actuation matrix has wrong shape");
  return g;
}

Vec SystemModel::sample_theta(std::mt19937_64& rng) const {
  const auto& sc = scenarios_;
  if (sc.count() == 1) return sc.vertices.front();
  if (sc.axis_aligned_box) {
    const Vec lo = sc.lower_bounds();
    const Vec hi = sc.upper_bounds();
    Vec theta(sc.param_dim());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < theta.size(); ++i) theta[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    return theta;
  }
  // General hull: random convex combination (uniform over the weight simplex).
  std::exponential_distribution<double> expo(1.0);
  Vec w(sc.count());
  for (int i = 0; i < w.size(); ++i) w[i] = expo(rng);
  w /= w.sum();
  Vec theta = Vec::Zero(sc.param_dim());
  for (int i = 0; i < sc.count(); ++i) theta += w[i] * sc.vertices[static_cast<size_t>(i)];
  return theta;
}

AffinityReport check_affine_in_theta(const SystemModel& system, int trials, uint64_t seed) {
  check(trials >= 1, "check_affine_in_theta: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, system.scenarios().count() - 1);
  const Vec lo = system.task().lo;
  const Vec hi = system.task().hi;

  AffinityReport report;
  for (int t = 0; t < trials; ++t) {
    Vec x(system.state_dim());
    for (int i = 0; i < x.size(); ++i) x[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    const Vec& ta = system.scenarios().vertices[static_cast<size_t>(pick(rng))];
    const Vec& tb = system.scenarios().vertices[static_cast<size_t>(pick(rng))];
    const double alpha = unit(rng);
    const Vec tm = alpha * ta + (1.0 - alpha) * tb;

    const Vec f_interp = alpha * system.eval_f(x, ta) + (1.0 - alpha) * system.eval_f(x, tb);
    const Mat g_interp = alpha * system.eval_g(x, ta) + (1.0 - alpha) * system.eval_g(x, tb);
    report.max_f_deviation =
        std::max(report.max_f_deviation, (system.eval_f(x, tm) - f_interp).cwiseAbs().maxCoeff());
    report.max_g_deviation =
        std::max(report.max_g_deviation, (system.eval_g(x, tm) - g_interp).cwiseAbs().maxCoeff());
  }
  return report;
}

} // namespace rclbf
