#include "rclbf/systems.hpp"

#include "rclbf/mlp.hpp"

#include <cmath>
#include <memory>

namespace rclbf {
namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vec scalar_theta(double v) { return vec({v}); }

std::vector<SamplingQuota> default_region_quotas() {
  return {SamplingQuota::ball(0.0, 0.5, 0.1), SamplingQuota::safe(0.1), SamplingQuota::unsafe(0.1)};
}

// ---------------------------------------------------------------------------
// Car trajectory tracking (CommonRoad single-track, vehicle-2 parameters),
// expressed in path-relative error coordinates. The reference path curvature
// omega_ref is the single uncertain parameter.
// ---------------------------------------------------------------------------

struct CarParams {
  double l_f = 1.156;
  double l_r = 1.422;
  double mass = 1093.3;
  double i_z = 1791.6;
  double c_sf = 20.89; // cornering stiffness coefficients, friction-normalized
  double c_sr = 20.89;
  double mu = 1.048;
  double v_ref = 10.0;
  double a_ref = 0.0;
  double wheelbase() const { return l_f + l_r; }
};

ScenarioSet car_scenarios() {
  // Nominal straight reference plus the extreme curvatures omega_ref = +/-1.5.
  ScenarioSet sc;
  sc.vertices = {scalar_theta(0.0), scalar_theta(-1.5), scalar_theta(1.5)};
  sc.nominal_index = 0;
  return sc;
}

class KinematicCar : public SystemModel {
 public:
  KinematicCar()
      : SystemModel("kinematic_car", 5, 2, car_scenarios(), make_task(), make_preset()) {}

 protected:
  // State [x_e, y_e, delta, v_e, psi_e].
  Vec f_impl(const Vec& x, const Vec& theta) const override {
    const double omega = theta[0];
    const double v = x[3] + p_.v_ref;
    Vec f(5);
    f[0] = v * std::cos(x[4]) - p_.v_ref + omega * x[1];
    f[1] = v * std::sin(x[4]) - omega * x[0];
    f[2] = 0.0;
    f[3] = -p_.a_ref;
    f[4] = v / p_.wheelbase() * std::tan(x[2]) - omega;
    return f;
  }

  Mat g_impl(const Vec&, const Vec&) const override {
    Mat g = Mat::Zero(5, 2);
    g(2, 0) = 1.0;
    g(3, 1) = 1.0;
    return g;
  }

 private:
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = Vec::Zero(5);
    t.lo = vec({-3, -3, -1.066, -3, -M_PI / 2});
    t.hi = vec({3, 3, 1.066, 3, M_PI / 2});
    t.safe = [](const Vec& x) { return x.norm() <= 1.0; };
    t.unsafe = [](const Vec& x) { return x.norm() >= 1.5; };
    t.goal_tolerance = 0.1;
    return t;
  }
  static SystemPreset make_preset() {
    SystemPreset p;
    p.c = 1.0;
    p.lambda = 1.0;
    p.relax_penalty = 10.0;
    p.v_hidden = p.pi_hidden = 64;
    p.v_layers = p.pi_layers = 2;
    p.n_train = 125000;
    p.quotas = {SamplingQuota::ball(0, 1.0, 0.40), SamplingQuota::ball(0, 0.25, 0.20),
                SamplingQuota::ball(1.5, 0, 0.20)};
    p.horizon = 10.0;
    p.x0_lo = p.x0_hi = vec({0.5, 0.5, 0, 0, 0});
    p.theta_resample_period = 1.0;
    p.goal_metric = GoalMetric::max_tracking_error;
    p.mpc_horizon = 6;
    p.mpc_dt = 0.1;
    return p;
  }

  CarParams p_;
};

class SideslipCar : public SystemModel {
 public:
  SideslipCar()
      : SystemModel("sideslip_car", 7, 2, car_scenarios(), make_task(), make_preset()) {}

 protected:
  // State [x_e, y_e, delta, v_e, psi_e, psidot_e, beta].
  // Below |v| < 0.1 the tire model is singular and the kinematic relations
  // are used for the psidot/beta rows instead.
  Vec f_impl(const Vec& x, const Vec& theta) const override {
    const double omega = theta[0];
    const double v = x[3] + p_.v_ref;
    const double delta = x[2];
    const double psi_e = x[4];
    const double psidot_e = x[5];
    const double beta = x[6];

    Vec f(7);
    f[0] = v * std::cos(psi_e) - p_.v_ref + omega * x[1];
    f[1] = v * std::sin(psi_e) - omega * x[0];
    f[2] = 0.0;
    f[3] = -p_.a_ref;
    f[4] = psidot_e;
    if (std::abs(v) < 0.1) {
      // Kinematic fallback: psiddot and betadot come entirely from the inputs.
      f[5] = 0.0;
      f[6] = 0.0;
      return f;
    }
    const double g0 = kGravity;
    const double psidot = psidot_e + omega;
    const double L = p_.wheelbase();
    const double k6 = p_.mu * p_.mass / (p_.i_z * L);
    f[5] = -k6 / v * (p_.l_f * p_.l_f * p_.c_sf * g0 * p_.l_r + p_.l_r * p_.l_r * p_.c_sr * g0 * p_.l_f) * psidot +
           k6 * (p_.l_r * p_.c_sr * g0 * p_.l_f - p_.l_f * p_.c_sf * g0 * p_.l_r) * beta +
           k6 * (p_.l_f * p_.c_sf * g0 * p_.l_r) * delta;
    const double k7 = p_.mu / (v * L);
    f[6] = (k7 / v * (p_.c_sr * g0 * p_.l_f * p_.l_r - p_.c_sf * g0 * p_.l_r * p_.l_f) - 1.0) * psidot -
           k7 * (p_.c_sr * g0 * p_.l_f + p_.c_sf * g0 * p_.l_r) * beta +
           k7 * (p_.c_sf * g0 * p_.l_r) * delta;
    return f;
  }

  Mat g_impl(const Vec& x, const Vec&) const override {
    Mat g = Mat::Zero(7, 2);
    g(2, 0) = 1.0;
    g(3, 1) = 1.0;
    const double v = x[3] + p_.v_ref;
    if (std::abs(v) < 0.1) {
      const double delta = x[2];
      const double L = p_.wheelbase();
      const double sec2 = 1.0 / (std::cos(delta) * std::cos(delta));
      g(5, 0) = v * sec2 / L;
      g(5, 1) = std::tan(delta) / L;
      const double tb = std::tan(delta) * p_.l_r / L;
      g(6, 0) = (p_.l_r / L) * sec2 / (1.0 + tb * tb);
    }
    return g;
  }

 private:
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = Vec::Zero(7);
    t.lo = vec({-3, -3, -1.066, -3, -M_PI / 2, -M_PI / 2, -M_PI / 3});
    t.hi = vec({3, 3, 1.066, 3, M_PI / 2, M_PI / 2, M_PI / 3});
    t.safe = [](const Vec& x) { return x.norm() <= 0.35; };
    t.unsafe = [](const Vec& x) { return x.norm() >= 0.85; };
    t.goal_tolerance = 0.1;
    return t;
  }
  static SystemPreset make_preset() {
    SystemPreset p;
    p.c = 1.0;
    p.lambda = 0.1;
    p.relax_penalty = 1e8;
    p.v_hidden = p.pi_hidden = 64;
    p.v_layers = p.pi_layers = 2;
    p.n_train = 125000;
    p.quotas = {SamplingQuota::ball(0, 0.35, 0.40), SamplingQuota::ball(0, 0.25, 0.20),
                SamplingQuota::ball(0.85, 0, 0.20)};
    p.horizon = 10.0;
    p.x0_lo = p.x0_hi = vec({0.2, 0.2, 0, 0, 0, 0, 0});
    p.theta_resample_period = 1.0;
    p.goal_metric = GoalMetric::max_tracking_error;
    p.mpc_horizon = 5;
    p.mpc_dt = 0.1;
    return p;
  }

  CarParams p_;
};

// ---------------------------------------------------------------------------
// 3D quadrotor: position/velocity/attitude, thrust + body rates as inputs,
// uncertain 1/m.
// ---------------------------------------------------------------------------

class Quadrotor3D : public SystemModel {
 public:
  Quadrotor3D()
      : SystemModel("quadrotor3d", 9, 4, make_scenarios(), make_task(), make_preset()) {}

 protected:
  // State [px, py, pz, vx, vy, vz, phi, theta, psi], theta_p = [1/m].
  Vec f_impl(const Vec& x, const Vec&) const override {
    Vec f = Vec::Zero(9);
    f[0] = x[3];
    f[1] = x[4];
    f[2] = x[5];
    f[5] = -kGravity;
    return f;
  }

  Mat g_impl(const Vec& x, const Vec& theta) const override {
    const double inv_m = theta[0];
    const double phi = x[6];
    const double th = x[7];
    Mat g = Mat::Zero(9, 4);
    g(3, 0) = -inv_m * std::sin(th);
    g(4, 0) = inv_m * std::cos(th) * std::sin(phi);
    g(5, 0) = inv_m * std::cos(th) * std::cos(phi);
    g(6, 1) = 1.0;
    g(7, 2) = 1.0;
    g(8, 3) = 1.0;
    return g;
  }

 private:
  static ScenarioSet make_scenarios() {
    ScenarioSet sc;
    sc.vertices = {scalar_theta(1.0 / 1.0), scalar_theta(1.0 / 1.5)};
    sc.nominal_index = 0;
    return sc;
  }
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = Vec::Zero(9);
    t.lo = vec({-4, -4, -4, -8, -8, -8, -M_PI / 2, -M_PI / 2, -M_PI / 2});
    t.hi = vec({4, 4, 4, 8, 8, 8, M_PI / 2, M_PI / 2, M_PI / 2});
    t.safe = [](const Vec& x) { return x[2] >= 0.0 && x.norm() <= 3.0; };
    t.unsafe = [](const Vec& x) { return x[2] <= -0.3 || x.norm() >= 3.5; };
    t.goal_tolerance = 0.3;
    return t;
  }
  static SystemPreset make_preset() {
    SystemPreset p;
    p.c = 10.0;
    p.lambda = 1.0;
    p.relax_penalty = 1e4;
    p.allow_relax = false;
    p.v_hidden = p.pi_hidden = 48;
    p.v_layers = 2;
    p.pi_layers = 3;
    p.n_train = 50000;
    p.quotas = default_region_quotas();
    p.horizon = 5.0;
    p.x0_lo = p.x0_hi = vec({1, 1, 1, 1, 1, -1, 1, 1, 1});
    p.goal_metric = GoalMetric::final_error;
    p.mpc_horizon = 5;
    p.mpc_dt = 0.1;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Neural lander: translation-only quadrotor with a ground-effect residual,
// uncertain 1/m.
// ---------------------------------------------------------------------------

Eigen::Vector3d default_ground_effect(const Vec& x) {
  // Analytic stand-in: a downward force comparable to the vehicle weight near
  // the ground, decaying exponentially with altitude and growing with descent
  // rate.
  const double k = 2.0, alpha = 3.0, beta = 0.5;
  const double pz = x[2], vz = x[5];
  return {0.0, 0.0, -k * std::exp(-alpha * pz) * (1.0 + beta * vz)};
}

ScenarioSet lander_scenarios() {
  ScenarioSet sc;
  sc.vertices = {scalar_theta(1.0 / 1.47), scalar_theta(1.0 / 2.0)};
  sc.nominal_index = 0;
  return sc;
}

TaskSpec lander_task() {
  TaskSpec t;
  t.x_goal = Vec::Zero(6);
  t.lo = vec({-5, -5, -0.5, -1, -1, -1});
  t.hi = vec({5, 5, 2, 1, 1, 1});
  t.safe = [](const Vec& x) { return x[2] >= -0.05 && x.norm() <= 3.0; };
  t.unsafe = [](const Vec& x) { return x[2] <= -0.3 || x.norm() >= 3.5; };
  t.goal_tolerance = 0.3;
  return t;
}

SystemPreset lander_preset() {
  SystemPreset p;
  p.c = 10.0;
  p.lambda = 0.1;
  p.relax_penalty = 7.0;
  p.v_hidden = p.pi_hidden = 48;
  p.v_layers = 2;
  p.pi_layers = 3;
  p.n_train = 50000;
  p.quotas = default_region_quotas();
  p.horizon = 5.0;
  p.x0_lo = p.x0_hi = vec({0.5, 0.5, 0.5, 0.5, 0.5, -1.0});
  p.goal_metric = GoalMetric::final_error;
  p.mpc_horizon = 5;
  p.mpc_dt = 0.1;
  return p;
}

// ---------------------------------------------------------------------------
// 2D quadrotor with circular obstacles, uncertain (1/m, 1/I).
// ---------------------------------------------------------------------------

class Quadrotor2D : public SystemModel {
 public:
  Quadrotor2D()
      : SystemModel("quadrotor2d", 6, 2, make_scenarios(), make_task(), make_preset()) {}

  static constexpr double kArm = 0.25;

  struct Obstacle {
    double cx, cz, radius;
  };
  static const std::vector<Obstacle>& obstacles() {
    static const std::vector<Obstacle> obs = {{-1.0, 0.6, 0.4}, {0.6, 1.4, 0.4}};
    return obs;
  }

 protected:
  // State [px, pz, theta, vx, vz, thetadot], theta_p = [1/m, 1/I].
  Vec f_impl(const Vec& x, const Vec&) const override {
    Vec f = Vec::Zero(6);
    f[0] = x[3];
    f[1] = x[4];
    f[2] = x[5];
    f[4] = -kGravity;
    return f;
  }

  Mat g_impl(const Vec& x, const Vec& theta) const override {
    const double inv_m = theta[0];
    const double inv_i = theta[1];
    const double th = x[2];
    Mat g = Mat::Zero(6, 2);
    g(3, 0) = g(3, 1) = inv_m * std::sin(th);
    g(4, 0) = g(4, 1) = inv_m * std::cos(th);
    g(5, 0) = kArm * inv_i;
    g(5, 1) = -kArm * inv_i;
    return g;
  }

 private:
  static ScenarioSet make_scenarios() {
    ScenarioSet sc;
    const double m_lo = 1.0, m_hi = 1.05, i_lo = 0.01, i_hi = 0.0105;
    sc.vertices = {vec({1 / m_lo, 1 / i_lo}), vec({1 / m_hi, 1 / i_lo}),
                   vec({1 / m_lo, 1 / i_hi}), vec({1 / m_hi, 1 / i_hi})};
    sc.nominal_index = 0;
    return sc;
  }
  static double obstacle_clearance(const Vec& x) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles()) {
      const double d = std::hypot(x[0] - o.cx, x[1] - o.cz) - o.radius;
      worst = std::min(worst, d);
    }
    return worst;
  }
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = Vec::Zero(6);
    t.lo = vec({-4, -4, -M_PI, -10, -10, -2 * M_PI});
    t.hi = vec({4, 4, M_PI, 10, 10, 2 * M_PI});
    t.safe = [](const Vec& x) { return obstacle_clearance(x) >= 0.1 && x.norm() <= 4.5; };
    t.unsafe = [](const Vec& x) { return obstacle_clearance(x) <= 0.0 || x.norm() >= 5.0; };
    t.goal_tolerance = 0.3;
    return t;
  }
  static SystemPreset make_preset() {
    SystemPreset p;
    p.c = 1.0;
    p.lambda = 6.0;
    p.relax_penalty = 1100.0;
    p.v_hidden = p.pi_hidden = 48;
    p.v_layers = 2;
    p.pi_layers = 3;
    p.n_train = 50000;
    p.quotas = default_region_quotas();
    p.horizon = 5.0;
    p.x0_lo = p.x0_hi = vec({-1.5, 1.5, 0, 0, 0, 0});
    p.goal_metric = GoalMetric::reach_fraction;
    p.mpc_horizon = 5;
    p.mpc_dt = 0.1;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Satellite rendezvous (Clohessy-Wiltshire-Hill relative dynamics) with a
// line-of-sight approach corridor. Uncertain 1/m; the target's mean motion is
// treated as known.
// ---------------------------------------------------------------------------

class Satellite : public SystemModel {
 public:
  static constexpr double kMeanMotion = 0.001027; // rad/s, low Earth orbit

  Satellite() : SystemModel("satellite", 4, 2, make_scenarios(), make_task(), make_preset()) {}

 protected:
  // State [px, py, vx, vy], theta_p = [1/m].
  Vec f_impl(const Vec& x, const Vec&) const override {
    const double n = kMeanMotion;
    Vec f(4);
    f[0] = x[2];
    f[1] = x[3];
    f[2] = 2.0 * n * x[3] + 3.0 * n * n * x[0];
    f[3] = -2.0 * n * x[2];
    return f;
  }

  Mat g_impl(const Vec&, const Vec& theta) const override {
    Mat g = Mat::Zero(4, 2);
    g(2, 0) = theta[0];
    g(3, 1) = theta[0];
    return g;
  }

 private:
  static ScenarioSet make_scenarios() {
    ScenarioSet sc;
    sc.vertices = {scalar_theta(1.0 / 1.0), scalar_theta(1.0 / 0.75), scalar_theta(1.0 / 1.25)};
    sc.nominal_index = 0;
    return sc;
  }
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = Vec::Zero(4);
    t.lo = vec({-12, -12, -12, -12});
    t.hi = vec({12, 12, 12, 12});
    t.safe = [](const Vec& x) {
      const double r = std::hypot(x[0], x[1]);
      return (r >= 4.0 && r <= 8.0) || (x[1] <= -std::abs(x[0]) && r <= 4.0);
    };
    t.unsafe = [](const Vec& x) {
      const double r = std::hypot(x[0], x[1]);
      return r >= 9.0 || (x[1] > -std::abs(x[0]) && r <= 3.0);
    };
    t.goal_tolerance = 0.25;
    return t;
  }
  static SystemPreset make_preset() {
    SystemPreset p;
    p.c = 1.0;
    p.lambda = 1.0;
    p.relax_penalty = 100.0;
    p.v_hidden = 256;
    p.v_layers = 3;
    p.pi_hidden = 64;
    p.pi_layers = 2;
    p.n_train = 50000;
    p.quotas = {}; // uniform sampling over the domain box
    p.nominal_zero = true;
    p.horizon = 10.0;
    p.x0_lo = vec({-0.5, -5.5, -0.2, -0.2});
    p.x0_hi = vec({0.5, -4.5, 0.2, 0.2});
    p.u_lo = vec({-20, -20});
    p.u_hi = vec({20, 20});
    p.goal_metric = GoalMetric::final_error;
    p.mpc_horizon = 10;
    p.mpc_dt = 0.02;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Segway obstacle avoidance (pendulum-on-cart balance model). Uncertainty is
// expressed through two affine-entering coefficients: a gravity-term scale
// and an actuation-effectiveness scale, each varying +/-10%.
// ---------------------------------------------------------------------------

class Segway : public SystemModel {
 public:
  Segway() : SystemModel("segway", 4, 1, make_scenarios(), make_task(), make_preset()) {}

  // Balance-system constants (base mass M, balanced mass m, inertia J, arm l)
  // and the lambda damping/shape coefficients of the benchmark formulation.
  struct Params {
    double base_mass = 1.5;
    double mass = 0.5;
    double inertia = 0.0; // point mass at the top
    double length = 1.0;
    double lam1 = 0.0, lam2 = 0.1, lam3 = 0.0, lam4 = 0.0;
    double lam5 = 0.0, lam6 = -2.0, lam7 = 0.0, lam8 = 1.6, lam9 = 0.0;
    double total_mass() const { return base_mass + mass; }
    double total_inertia() const { return inertia + mass * length * length; }
  };
  static const Params& params() {
    static const Params p;
    return p;
  }

  static void top_position(const Vec& x, double& px, double& py) {
    px = x[0] + std::sin(x[1]);
    py = std::cos(x[1]);
  }

 protected:
  // State [p, theta, v, omega], theta_p = [gravity scale, actuation scale].
  Vec f_impl(const Vec& x, const Vec& theta) const override {
    const auto& p = params();
    const double s = std::sin(x[1]), c = std::cos(x[1]);
    const double v = x[2], om = x[3];
    const double denom =
        c * c - p.total_mass() * p.total_inertia() / (p.mass * p.mass * p.length * p.length) +
        p.lam9;
    Vec f(4);
    f[0] = v;
    f[1] = om;
    f[2] = (theta[0] * kGravity * s * c + p.lam1 * v * c + p.lam2 * v - p.length * om * om * s) /
           denom;
    f[3] = (p.lam3 * v * c + p.lam4 * v -
            theta[0] * p.total_mass() * kGravity / (p.mass * p.length) * s - om * om * s * c) /
           denom;
    return f;
  }

  Mat g_impl(const Vec& x, const Vec& theta) const override {
    const auto& p = params();
    const double c = std::cos(x[1]);
    const double denom =
        c * c - p.total_mass() * p.total_inertia() / (p.mass * p.mass * p.length * p.length) +
        p.lam9;
    Mat g(4, 1);
    g(0, 0) = 0.0;
    g(1, 0) = 0.0;
    g(2, 0) = theta[1] * (p.lam6 / p.total_mass()) * (p.lam5 + c) / denom;
    g(3, 0) = theta[1] * (p.lam8 * p.length / p.total_inertia()) * (c + p.lam7) / denom;
    return g;
  }

 private:
  static ScenarioSet make_scenarios() {
    ScenarioSet sc;
    sc.vertices = {vec({1.0, 1.0}), vec({0.9, 0.9}), vec({1.1, 0.9}), vec({0.9, 1.1}),
                   vec({1.1, 1.1})};
    sc.nominal_index = 0;
    return sc;
  }
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = vec({2, 0, 0, 0});
    t.lo = vec({-3, -M_PI / 2, -1, -3});
    t.hi = vec({3, M_PI / 2, 1, 3});
    // A tipped-over segway is a crash, so tipping past ~75 degrees is unsafe
    // alongside the overhead obstacle itself.
    t.safe = [](const Vec& x) {
      double px, py;
      top_position(x, px, py);
      return std::hypot(px, py - 1.0) >= 0.15 && std::abs(x[1]) <= 1.1;
    };
    t.unsafe = [](const Vec& x) {
      double px, py;
      top_position(x, px, py);
      return std::hypot(px, py - 1.0) <= 0.1 || std::abs(x[1]) >= 1.3;
    };
    t.goal_tolerance = 0.1;
    return t;
  }
  static SystemPreset make_preset() {
    SystemPreset p;
    p.c = 1.0;
    p.lambda = 1.0;
    p.relax_penalty = 100.0;
    p.v_hidden = 64;
    p.v_layers = 3;
    p.pi_hidden = 64;
    p.pi_layers = 2;
    p.n_train = 30000;
    p.quotas = {}; // uniform sampling over the domain box
    p.horizon = 10.0;
    p.x0_lo = vec({-2.2, -0.05, 0, -0.05});
    p.x0_hi = vec({-1.8, 0.05, 0.2, 0.05});
    p.u_lo = vec({-50});
    p.u_hi = vec({50});
    p.goal_metric = GoalMetric::final_error;
    p.mpc_horizon = 10;
    p.mpc_dt = 0.005;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Test plants.
// ---------------------------------------------------------------------------

// xdot = -theta * x + u, single scenario; exponential-decay oracle plant.
class LinearTest : public SystemModel {
 public:
  LinearTest() : SystemModel("linear_test", 2, 2, make_scenarios(), make_task(), make_preset()) {}

 protected:
  Vec f_impl(const Vec& x, const Vec& theta) const override { return -theta[0] * x; }
  Mat g_impl(const Vec&, const Vec&) const override { return Mat::Identity(2, 2); }

 private:
  static ScenarioSet make_scenarios() {
    ScenarioSet sc;
    sc.vertices = {scalar_theta(1.0)};
    sc.nominal_index = 0;
    return sc;
  }
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = Vec::Zero(2);
    t.lo = vec({-2, -2});
    t.hi = vec({2, 2});
    t.safe = [](const Vec& x) { return x.norm() <= 1.5; };
    t.unsafe = [](const Vec& x) { return x.norm() >= 1.8; };
    t.goal_tolerance = 0.05;
    return t;
  }
  static SystemPreset make_preset() {
    SystemPreset p;
    p.c = 1.0;
    p.lambda = 1.0;
    p.relax_penalty = 100.0;
    p.v_hidden = p.pi_hidden = 32;
    p.v_layers = p.pi_layers = 2;
    p.n_train = 10000;
    p.horizon = 5.0;
    p.x0_lo = p.x0_hi = vec({1, 0});
    p.goal_metric = GoalMetric::final_error;
    return p;
  }
};

// Deliberately non-affine in theta (quadratic term); negative control for the
// affinity checker.
class BrokenAffine : public SystemModel {
 public:
  BrokenAffine()
      : SystemModel("broken_affine", 2, 1, make_scenarios(), make_task(), make_preset()) {}

 protected:
  Vec f_impl(const Vec& x, const Vec& theta) const override {
    return -theta[0] * theta[0] * x;
  }
  Mat g_impl(const Vec&, const Vec&) const override {
    Mat g(2, 1);
    g << 1, 0;
    return g;
  }

 private:
  static ScenarioSet make_scenarios() {
    ScenarioSet sc;
    sc.vertices = {scalar_theta(0.5), scalar_theta(2.0)};
    sc.nominal_index = 0;
    return sc;
  }
  static TaskSpec make_task() {
    TaskSpec t;
    t.x_goal = Vec::Zero(2);
    t.lo = vec({-1, -1});
    t.hi = vec({1, 1});
    t.safe = [](const Vec& x) { return x.norm() <= 0.5; };
    t.unsafe = [](const Vec& x) { return x.norm() >= 0.9; };
    return t;
  }
  static SystemPreset make_preset() { return SystemPreset{}; }
};

} // namespace

NeuralLander::NeuralLander()
    : SystemModel("neural_lander", 6, 3, lander_scenarios(), lander_task(), lander_preset()),
      residual_(default_ground_effect) {}

Vec NeuralLander::f_impl(const Vec& x, const Vec& theta) const {
  const Eigen::Vector3d fa = residual_(x);
  const double inv_m = theta[0];
  Vec f(6);
  f[0] = x[3];
  f[1] = x[4];
  f[2] = x[5];
  f[3] = fa[0] * inv_m;
  f[4] = fa[1] * inv_m;
  f[5] = fa[2] * inv_m - kGravity;
  return f;
}

Mat NeuralLander::g_impl(const Vec&, const Vec& theta) const {
  Mat g = Mat::Zero(6, 3);
  g(3, 0) = theta[0];
  g(4, 1) = theta[0];
  g(5, 2) = theta[0];
  return g;
}

void load_lander_residual(NeuralLander& lander, const std::string& checkpoint_path) {
  auto net = std::make_shared<Mlp>(Mlp::load_file(checkpoint_path));
  check(net->kind() == Mlp::Kind::policy, "lander residual: checkpoint must be a policy net");
  check(net->input_dim() == 6 && net->output_dim() == 3,
        "lander residual: expected a 6-input, 3-output network");
  lander.set_ground_effect([net](const Vec& x) -> Eigen::Vector3d {
    return net->eval_policy(x);
  });
}

std::shared_ptr<SystemModel> make_system(const std::string& name) {
  if (name == "kinematic_car") return std::make_shared<KinematicCar>();
  if (name == "sideslip_car") return std::make_shared<SideslipCar>();
  if (name == "quadrotor3d") return std::make_shared<Quadrotor3D>();
  if (name == "neural_lander") return std::make_shared<NeuralLander>();
  if (name == "quadrotor2d") return std::make_shared<Quadrotor2D>();
  if (name == "satellite") return std::make_shared<Satellite>();
  if (name == "segway") return std::make_shared<Segway>();
  if (name == "linear_test") return std::make_shared<LinearTest>();
  if (name == "broken_affine") return std::make_shared<BrokenAffine>();
  throw std::invalid_argument("unknown system: " + name);
}

std::vector<std::string> benchmark_system_names() {
  return {"kinematic_car", "sideslip_car", "quadrotor3d", "neural_lander",
          "quadrotor2d",   "satellite",    "segway"};
}

} // namespace rclbf
