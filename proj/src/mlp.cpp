#include "rclbf/mlp.hpp"

#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace rclbf {

void GradientTape::set_zero() {
  for (auto& m : dW) m.setZero();
  for (auto& v : db) v.setZero();
}

void GradientTape::axpy(double a, const GradientTape& other) {
  check(dW.size() == other.dW.size(), "tape shape mismatch");
  for (size_t k = 0; k < dW.size(); ++k) {
    dW[k] += a * other.dW[k];
    db[k] += a * other.db[k];
  }
}

double GradientTape::max_abs() const {
  double m = 0.0;
  for (const auto& w : dW) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& v : db) m = std::max(m, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
  return m;
}

Mlp::Mlp(Kind kind, std::vector<int> dims) : kind_(kind), dims_(std::move(dims)) {
  check(dims_.size() >= 2, "mlp: need at least one layer");
  for (size_t k = 1; k < dims_.size(); ++k) {
    W.emplace_back(Mat::Zero(dims_[k], dims_[k - 1]));
    b.emplace_back(Vec::Zero(dims_[k]));
  }
}

Mlp Mlp::certificate(int input_dim, int hidden, int hidden_layers) {
  check(hidden_layers >= 1 && hidden >= 1, "mlp: bad certificate topology");
  std::vector<int> dims{input_dim};
  for (int k = 0; k < hidden_layers; ++k) dims.push_back(hidden);
  return Mlp(Kind::certificate, std::move(dims));
}

Mlp Mlp::policy(int input_dim, int hidden, int hidden_layers, int output_dim) {
  check(hidden_layers >= 1 && hidden >= 1 && output_dim >= 1, "mlp: bad policy topology");
  std::vector<int> dims{input_dim};
  for (int k = 0; k < hidden_layers; ++k) dims.push_back(hidden);
  dims.push_back(output_dim);
  return Mlp(Kind::policy, std::move(dims));
}

void Mlp::init_xavier(uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t k = 0; k < W.size(); ++k) {
    const double bound = std::sqrt(6.0 / static_cast<double>(W[k].rows() + W[k].cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < W[k].cols(); ++j)
      for (Eigen::Index i = 0; i < W[k].rows(); ++i) W[k](i, j) = dist(rng);
    b[k].setZero();
  }
}

namespace {
inline bool layer_is_tanh(Mlp::Kind kind, size_t k, size_t num_layers) {
  return kind == Mlp::Kind::certificate || k + 1 < num_layers;
}
} // namespace

Mlp::Forward Mlp::forward(const Mat& X) const {
  check(X.rows() == input_dim(), "mlp: input dimension mismatch");
  Forward fw;
  fw.a.reserve(W.size() + 1);
  fw.a.push_back(X);
  for (size_t k = 0; k < W.size(); ++k) {
    Mat z = (W[k] * fw.a.back()).colwise() + b[k];
    if (layer_is_tanh(kind_, k, W.size())) z = z.array().tanh();
    fw.a.push_back(std::move(z));
  }
  return fw;
}

Vec Mlp::values_V(const Forward& fw) const {
  check(kind_ == Kind::certificate, "values_V: not a certificate net");
  return fw.output().colwise().squaredNorm().transpose();
}

double Mlp::value_V(const Vec& x) const { return values_V(forward(x))[0]; }

Mat Mlp::input_gradients_V(const Forward& fw) const {
  check(kind_ == Kind::certificate, "input_gradients_V: not a certificate net");
  Mat delta = 2.0 * fw.output();
  for (size_t k = W.size(); k-- > 0;) {
    delta = (1.0 - fw.a[k + 1].array().square()) * delta.array();
    delta = W[k].transpose() * delta;
  }
  return delta;
}

Vec Mlp::grad_V(const Vec& x) const { return input_gradients_V(forward(x)).col(0); }

GradientTape Mlp::value_param_gradient(const Forward& fw, const Vec& weights) const {
  check(kind_ == Kind::certificate, "value_param_gradient: not a certificate net");
  check(weights.size() == fw.batch(), "value_param_gradient: weight count mismatch");
  GradientTape tape = zero_tape();
  Mat delta = 2.0 * fw.output() * weights.asDiagonal();
  for (size_t k = W.size(); k-- > 0;) {
    delta = (1.0 - fw.a[k + 1].array().square()) * delta.array(); // through tanh
    tape.dW[k] += delta * fw.a[k].transpose();
    tape.db[k] += delta.rowwise().sum();
    if (k > 0) delta = W[k].transpose() * delta;
  }
  return tape;
}

Vec Mlp::directional_derivatives(const Forward& fw, const Mat& D) const {
  check(kind_ == Kind::certificate, "directional_derivatives: not a certificate net");
  Mat t = D;
  for (size_t k = 0; k < W.size(); ++k) {
    t = (1.0 - fw.a[k + 1].array().square()) * (W[k] * t).array();
  }
  return (2.0 * (fw.output().array() * t.array()).colwise().sum()).transpose();
}

GradientTape Mlp::directional_param_gradient(const Forward& fw, const Mat& D,
                                             const Vec& weights) const {
  check(kind_ == Kind::certificate, "directional_param_gradient: not a certificate net");
  const size_t L = W.size();
  // Tangent pass, keeping the pre-activation tangents s_k and activations t_k.
  std::vector<Mat> t(L + 1), s(L + 1);
  t[0] = D;
  for (size_t k = 0; k < L; ++k) {
    s[k + 1] = W[k] * t[k];
    t[k + 1] = (1.0 - fw.a[k + 1].array().square()) * s[k + 1].array();
  }

  // Reverse pass through the joint (forward, tangent) computation of
  // J = 2 a_L . t_L.
  GradientTape tape = zero_tape();
  Mat abar = 2.0 * t[L] * weights.asDiagonal();
  Mat tbar = 2.0 * fw.a[L] * weights.asDiagonal();
  for (size_t k = L; k-- > 0;) {
    // t_{k+1} = (1 - a_{k+1}^2) . s_{k+1}
    const auto one_minus_a2 = (1.0 - fw.a[k + 1].array().square());
    Mat sbar = one_minus_a2 * tbar.array();
    abar.array() += -2.0 * fw.a[k + 1].array() * s[k + 1].array() * tbar.array();
    // s_{k+1} = W_k t_k
    tape.dW[k] += sbar * t[k].transpose();
    if (k > 0) tbar = W[k].transpose() * sbar;
    // a_{k+1} = tanh(W_k a_k + b_k)
    Mat zbar = one_minus_a2 * abar.array();
    tape.dW[k] += zbar * fw.a[k].transpose();
    tape.db[k] += zbar.rowwise().sum();
    if (k > 0) abar = W[k].transpose() * zbar;
  }
  return tape;
}

Vec Mlp::eval_policy(const Vec& x) const {
  check(kind_ == Kind::policy, "eval_policy: not a policy net");
  return forward(x).output().col(0);
}

GradientTape Mlp::output_param_gradient(const Forward& fw, const Mat& cotangent) const {
  check(cotangent.rows() == output_dim() && cotangent.cols() == fw.batch(),
        "output_param_gradient: cotangent shape mismatch");
  GradientTape tape = zero_tape();
  Mat delta = cotangent;
  for (size_t k = W.size(); k-- > 0;) {
    if (layer_is_tanh(kind_, k, W.size()))
      delta = (1.0 - fw.a[k + 1].array().square()) * delta.array();
    tape.dW[k] += delta * fw.a[k].transpose();
    tape.db[k] += delta.rowwise().sum();
    if (k > 0) delta = W[k].transpose() * delta;
  }
  return tape;
}

Mat Mlp::input_jacobian(const Vec& x) const {
  const Forward fw = forward(x);
  Mat J(output_dim(), input_dim());
  for (int i = 0; i < output_dim(); ++i) {
    Mat delta = Mat::Zero(output_dim(), 1);
    delta(i, 0) = 1.0;
    for (size_t k = W.size(); k-- > 0;) {
      if (layer_is_tanh(kind_, k, W.size()))
        delta = (1.0 - fw.a[k + 1].array().square()) * delta.array();
      delta = W[k].transpose() * delta;
    }
    J.row(i) = delta.col(0).transpose();
  }
  return J;
}

GradientTape Mlp::zero_tape() const {
  GradientTape tape;
  for (size_t k = 0; k < W.size(); ++k) {
    tape.dW.push_back(Mat::Zero(W[k].rows(), W[k].cols()));
    tape.db.push_back(Vec::Zero(b[k].size()));
  }
  return tape;
}

void Mlp::sgd_step(const GradientTape& tape, double lr, double weight_decay) {
  check(tape.dW.size() == W.size(), "sgd_step: tape shape mismatch");
  for (size_t k = 0; k < W.size(); ++k) {
    check(tape.dW[k].rows() == W[k].rows() && tape.dW[k].cols() == W[k].cols(),
          "sgd_step: tape shape mismatch");
    W[k] -= lr * (tape.dW[k] + weight_decay * W[k]);
    b[k] -= lr * (tape.db[k] + weight_decay * b[k]);
  }
}

bool Mlp::same_shape(const Mlp& other) const {
  return kind_ == other.kind_ && dims_ == other.dims_;
}

void Mlp::save(std::ostream& os) const {
  os << "rclbf-net 1\n";
  os << "kind " << (kind_ == Kind::certificate ? "certificate" : "policy") << "\n";
  os << "dims";
  for (int d : dims_) os << " " << d;
  os << "\n" << std::hexfloat;
  for (size_t k = 0; k < W.size(); ++k) {
    for (Eigen::Index i = 0; i < W[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < W[k].cols(); ++j) os << W[k](i, j) << " ";
      os << "\n";
    }
    for (Eigen::Index i = 0; i < b[k].size(); ++i) os << b[k][i] << " ";
    os << "\n";
  }
}

void Mlp::save_file(const std::string& path) const {
  std::ofstream os(path);
  check(os.good(), "cannot open checkpoint for writing: " + path);
  save(os);
}

namespace {
double parse_hexfloat(const std::string& tok) {
  return std::strtod(tok.c_str(), nullptr);
}
} // namespace

Mlp Mlp::load(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  check(magic == "rclbf-net" && version == "1", "checkpoint: bad magic/version");
  std::string key, kind_str;
  is >> key >> kind_str;
  check(key == "kind" && (kind_str == "certificate" || kind_str == "policy"),
        "checkpoint: bad kind line");
  is >> key;
  check(key == "dims", "checkpoint: expected dims line");
  std::string line;
  std::getline(is, line);
  std::istringstream dims_line(line);
  std::vector<int> dims;
  int d;
  while (dims_line >> d) dims.push_back(d);
  check(dims.size() >= 2, "checkpoint: bad dims");

  Mlp net(kind_str == "certificate" ? Kind::certificate : Kind::policy, dims);
  std::string tok;
  for (size_t k = 0; k < net.W.size(); ++k) {
    for (Eigen::Index i = 0; i < net.W[k].rows(); ++i)
      for (Eigen::Index j = 0; j < net.W[k].cols(); ++j) {
        check(static_cast<bool>(is >> tok), "checkpoint: truncated weights");
        net.W[k](i, j) = parse_hexfloat(tok);
      }
    for (Eigen::Index i = 0; i < net.b[k].size(); ++i) {
      check(static_cast<bool>(is >> tok), "checkpoint: truncated biases");
      net.b[k][i] = parse_hexfloat(tok);
    }
  }
  check(net.kind_ != Kind::policy || dims.size() >= 3, "checkpoint: policy needs a hidden layer");
  return net;
}

Mlp Mlp::load_file(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), "cannot open checkpoint: " + path);
  return load(is);
}

QuadraticFitReport fit_quadratic(Mlp& net, const Mat& P, const Vec& center, const Vec& lo,
                                 const Vec& hi, int epochs, int n_samples, double lr,
                                 uint64_t seed, double mse_threshold) {
  check(net.kind() == Mlp::Kind::certificate, "fit_quadratic: not a certificate net");
  const int n = net.input_dim();
  check(P.rows() == n && P.cols() == n && center.size() == n, "fit_quadratic: shape mismatch");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto draw = [&](int count) {
    Mat X(n, count);
    for (int bcol = 0; bcol < count; ++bcol)
      for (int i = 0; i < n; ++i) X(i, bcol) = lo[i] + unit(rng) * (hi[i] - lo[i]);
    return X;
  };
  const auto targets = [&](const Mat& X) {
    Vec y(X.cols());
    for (Eigen::Index bcol = 0; bcol < X.cols(); ++bcol) {
      const Vec dx = X.col(bcol) - center;
      y[bcol] = dx.dot(P * dx);
    }
    return y;
  };

  const Mat X_val = draw(std::max(64, n_samples / 5));
  const Vec y_val = targets(X_val);

  const int batch = 256;
  // Adam: plain SGD stalls well above the fit thresholds on these targets.
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  GradientTape m1 = net.zero_tape(), m2 = net.zero_tape(), upd = net.zero_tape();
  long t = 0;
  QuadraticFitReport report;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // Mild decay lowers the stochastic noise floor in late epochs.
    const double lr_t = lr / (1.0 + 0.01 * epoch);
    for (int done = 0; done < n_samples; done += batch) {
      const int bs = std::min(batch, n_samples - done);
      const Mat X = draw(bs);
      const Vec y = targets(X);
      const auto fw = net.forward(X);
      const Vec v = net.values_V(fw);
      const Vec cot = 2.0 * (v - y) / static_cast<double>(bs);
      const GradientTape tape = net.value_param_gradient(fw, cot);
      ++t;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      for (size_t k = 0; k < m1.dW.size(); ++k) {
        m1.dW[k] = b1 * m1.dW[k] + (1.0 - b1) * tape.dW[k];
        m2.dW[k] = (b2 * m2.dW[k].array() + (1.0 - b2) * tape.dW[k].array().square()).matrix();
        upd.dW[k] = ((m1.dW[k].array() / c1) / ((m2.dW[k].array() / c2).sqrt() + adam_eps)).matrix();
        m1.db[k] = b1 * m1.db[k] + (1.0 - b1) * tape.db[k];
        m2.db[k] = (b2 * m2.db[k].array() + (1.0 - b2) * tape.db[k].array().square()).matrix();
        upd.db[k] = ((m1.db[k].array() / c1) / ((m2.db[k].array() / c2).sqrt() + adam_eps)).matrix();
      }
      net.sgd_step(upd, lr_t, 0.0);
    }
    report.epochs_run = epoch + 1;
    const Vec v_val = net.values_V(net.forward(X_val));
    report.validation_mse = (v_val - y_val).squaredNorm() / static_cast<double>(y_val.size());
    if (report.validation_mse <= mse_threshold) {
      report.converged = true;
      break;
    }
  }
  return report;
}

} // namespace rclbf
