#pragma once

#include "rclbf/types.hpp"

#include <cstdint>
#include <iosfwd>

namespace rclbf {

/// Per-parameter gradient accumulators matching an Mlp's layer shapes.
struct GradientTape {
  std::vector<Mat> dW;
  std::vector<Vec> db;

  void set_zero();
  void axpy(double a, const GradientTape& other);
  double max_abs() const;
};

/// Fixed-topology fully connected network with tanh hidden units.
///
/// Two kinds are supported:
///  - certificate: every layer is tanh; the final activation w(x) defines the
///    certificate V(x) = w'w >= 0.
///  - policy: tanh hidden layers with a linear output layer.
class Mlp {
 public:
  enum class Kind { certificate, policy };

  static Mlp certificate(int input_dim, int hidden, int hidden_layers);
  static Mlp policy(int input_dim, int hidden, int hidden_layers, int output_dim);

  Kind kind() const { return kind_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(W.size()); }
  const std::vector<int>& dims() const { return dims_; }

  /// Xavier-uniform weights, zero biases.
  void init_xavier(uint64_t seed);

  /// Activations of a batched forward pass; columns are samples.
  struct Forward {
    std::vector<Mat> a; // a[0] = X, a[k] = layer-k activation
    const Mat& output() const { return a.back(); }
    int batch() const { return static_cast<int>(a.front().cols()); }
  };
  Forward forward(const Mat& X) const;

  // --- certificate surface -------------------------------------------------

  /// V per sample (row vector), V = w'w of the final activation.
  Vec values_V(const Forward& fw) const;
  double value_V(const Vec& x) const;

  /// dV/dx per sample (input_dim x batch).
  Mat input_gradients_V(const Forward& fw) const;
  Vec grad_V(const Vec& x) const;

  /// Gradient of sum_b weights[b] * V(x_b) with respect to the parameters.
  GradientTape value_param_gradient(const Forward& fw, const Vec& weights) const;

  /// Directional derivatives J_b = dV/dx(x_b) . D.col(b), one direction per
  /// sample column.
  Vec directional_derivatives(const Forward& fw, const Mat& D) const;

  /// Gradient of sum_b weights[b] * J_b with respect to the parameters
  /// (forward-tangent pass differentiated in reverse).
  GradientTape directional_param_gradient(const Forward& fw, const Mat& D,
                                          const Vec& weights) const;

  // --- policy surface ------------------------------------------------------

  Vec eval_policy(const Vec& x) const;

  /// Gradient of sum_b cotangent.col(b) . y(x_b) with respect to the
  /// parameters, where y is the network output.
  GradientTape output_param_gradient(const Forward& fw, const Mat& cotangent) const;

  /// Jacobian dy/dx at a single point (used by gradient checks).
  Mat input_jacobian(const Vec& x) const;

  // --- optimization / io ---------------------------------------------------

  GradientTape zero_tape() const;
  void sgd_step(const GradientTape& tape, double lr, double weight_decay);

  void save(std::ostream& os) const;
  void save_file(const std::string& path) const;
  static Mlp load(std::istream& is);
  static Mlp load_file(const std::string& path);

  bool same_shape(const Mlp& other) const;

  std::vector<Mat> W;
  std::vector<Vec> b;

 private:
  Mlp(Kind kind, std::vector<int> dims);

  Kind kind_;
  std::vector<int> dims_;
};

struct QuadraticFitReport {
  double validation_mse = 0.0;
  int epochs_run = 0;
  bool converged = false;
};

/// Pretrains a certificate net so that V(x) approximately matches
/// (x - center)'P(x - center) over the box [lo, hi].
QuadraticFitReport fit_quadratic(Mlp& net, const Mat& P, const Vec& center, const Vec& lo,
                                 const Vec& hi, int epochs, int n_samples, double lr,
                                 uint64_t seed, double mse_threshold = 1e-3);

} // namespace rclbf
