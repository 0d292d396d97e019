#pragma once

#include "rclbf/system.hpp"

#include <Eigen/Dense>

namespace rclbf {

inline constexpr double kGravity = 9.81;

/// Quadrotor with translation-only state and a residual force model standing
/// in for a learned ground-effect network. The residual can be replaced by an
/// externally trained network (see load_lander_residual).
class NeuralLander : public SystemModel {
 public:
  using Residual = std::function<Eigen::Vector3d(const Vec&)>;

  NeuralLander();

  /// Replaces the default analytic ground-effect stand-in.
  void set_ground_effect(Residual residual) { residual_ = std::move(residual); }

 protected:
  Vec f_impl(const Vec& x, const Vec& theta) const override;
  Mat g_impl(const Vec& x, const Vec& theta) const override;

 private:
  Residual residual_;
};

/// Loads a policy-format network checkpoint (6 inputs, 3 outputs) and installs
/// it as the lander's ground-effect residual.
void load_lander_residual(NeuralLander& lander, const std::string& checkpoint_path);

} // namespace rclbf
