#include "rclbf/training.hpp"

#include "rclbf/linearize.hpp"
#include "rclbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace rclbf {

TrainConfig TrainConfig::from_preset(const SystemPreset& preset) {
  TrainConfig cfg;
  cfg.c = preset.c;
  cfg.lambda = preset.lambda;
  cfg.rho = preset.relax_penalty;
  cfg.allow_relax = preset.allow_relax;
  cfg.n_train = preset.n_train;
  cfg.quotas = preset.quotas;
  cfg.quadratic_init = preset.quadratic_init;
  return cfg;
}

void TrainConfig::validate() const {
  check(a1 > 0 && a2 > 0 && a3 > 0, "train config: a1, a2, a3 must be positive");
  check(eps > 0, "train config: eps must be positive");
  check(c > 0 && lambda > 0, "train config: c and lambda must be positive");
  check(lr > 0, "train config: lr must be positive");
  check(n_train >= 1, "train config: n_train must be >= 1");
  check(epochs >= 0, "train config: epochs must be >= 0");
  check(batch >= 1 && alternation >= 1, "train config: batch and alternation must be >= 1");
  check(validation_fraction >= 0.0 && validation_fraction < 0.5,
        "train config: validation_fraction must be in [0, 0.5)");
  double quota_sum = 0.0;
  for (const auto& q : quotas) {
    check(q.fraction >= 0.0, "train config: quota fractions must be >= 0");
    quota_sum += q.fraction;
  }
  check(quota_sum <= 1.0 + 1e-12, "train config: quota fractions must sum to <= 1");
}

int SampleSet::n_safe() const {
  return static_cast<int>(std::count(is_safe.begin(), is_safe.end(), uint8_t{1}));
}

int SampleSet::n_unsafe() const {
  return static_cast<int>(std::count(is_unsafe.begin(), is_unsafe.end(), uint8_t{1}));
}

namespace {

bool in_quota_region(const SamplingQuota& q, const TaskSpec& task, const Vec& x) {
  switch (q.region) {
    case SamplingQuota::Region::safe_set: return task.safe(x);
    case SamplingQuota::Region::unsafe_set: return task.unsafe(x);
    case SamplingQuota::Region::norm_ball: {
      const double r = (x - task.x_goal).norm();
      return r >= q.radius_lo && (q.radius_hi <= 0.0 || r <= q.radius_hi);
    }
  }
  return false;
}

} // namespace

SampleSet sample_training_data(const SystemModel& system, const TrainConfig& cfg) {
  cfg.validate();
  const TaskSpec& task = system.task();
  const int n = system.state_dim();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto draw = [&] {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = task.lo[i] + unit(rng) * (task.hi[i] - task.lo[i]);
    return x;
  };
  const auto in_domain = [&](const Vec& x) {
    return (x.array() >= task.lo.array()).all() && (x.array() <= task.hi.array()).all();
  };
  // Bounded norm-ball shells are sampled directly (uniform in the annulus,
  // volume-correct radius); box rejection would stall for thin shells.
  const auto draw_ball = [&](double lo, double hi) {
    Vec dir = Vec::NullaryExpr(n, [&](Eigen::Index) { return gauss(rng); });
    const double norm = dir.norm();
    if (norm < 1e-300) {
      dir.setZero();
      dir[0] = 1.0;
    } else {
      dir /= norm;
    }
    const double lon = std::pow(lo, n), hin = std::pow(hi, n);
    const double r = std::pow(lon + unit(rng) * (hin - lon), 1.0 / n);
    return Vec(task.x_goal + r * dir);
  };

  std::vector<Vec> points;
  points.reserve(static_cast<size_t>(cfg.n_train));
  constexpr long kRejectionCap = 1000000;
  for (const auto& q : cfg.quotas) {
    const int want = static_cast<int>(std::llround(q.fraction * cfg.n_train));
    const bool direct = q.region == SamplingQuota::Region::norm_ball && q.radius_hi > 0.0;
    long rejections = 0;
    for (int got = 0; got < want;) {
      const Vec x = direct ? draw_ball(q.radius_lo, q.radius_hi) : draw();
      if (in_quota_region(q, task, x) && in_domain(x)) {
        points.push_back(x);
        ++got;
      } else if (++rejections >= kRejectionCap) {
        throw std::invalid_argument("sample_training_data: quota region unreachable after 1e6 "
                                    "rejection draws");
      }
    }
  }
  while (static_cast<int>(points.size()) < cfg.n_train) points.push_back(draw());
  std::shuffle(points.begin(), points.end(), rng);

  SampleSet set;
  set.X.resize(n, cfg.n_train);
  set.is_safe.resize(static_cast<size_t>(cfg.n_train));
  set.is_unsafe.resize(static_cast<size_t>(cfg.n_train));
  for (int b = 0; b < cfg.n_train; ++b) {
    set.X.col(b) = points[static_cast<size_t>(b)];
    set.is_safe[static_cast<size_t>(b)] = task.safe(points[static_cast<size_t>(b)]) ? 1 : 0;
    set.is_unsafe[static_cast<size_t>(b)] = task.unsafe(points[static_cast<size_t>(b)]) ? 1 : 0;
  }
  return set;
}

double policy_loss(const Mlp& policy, const NominalPolicy& nominal, const Mat& X,
                   GradientTape* tape) {
  const auto fw = policy.forward(X);
  const Eigen::Index B = X.cols();
  Mat diff = fw.output();
  for (Eigen::Index b = 0; b < B; ++b) diff.col(b) -= nominal.eval(X.col(b));
  const double loss = diff.squaredNorm() / static_cast<double>(B);
  if (tape != nullptr) {
    const Mat cot = (2.0 / static_cast<double>(B)) * diff;
    tape->axpy(1.0, policy.output_param_gradient(fw, cot));
  }
  return loss;
}

Vec compute_relaxations(const Mlp& v_net, const NominalPolicy& nominal,
                        const SystemModel& system, const TrainConfig& cfg, const Mat& X) {
  const auto fw = v_net.forward(X);
  const Vec v = v_net.values_V(fw);
  const Mat grads = v_net.input_gradients_V(fw);
  const auto& vertices = system.scenarios().vertices;

  Vec r(X.cols());
  std::vector<RclbfConstraint> constraints(vertices.size());
  for (Eigen::Index b = 0; b < X.cols(); ++b) {
    const Vec x = X.col(b);
    const Vec grad = grads.col(b);
    for (size_t i = 0; i < vertices.size(); ++i) {
      constraints[i].lhs = grad.dot(system.eval_f(x, vertices[i])) + cfg.lambda * v[b];
      constraints[i].lgv = system.eval_g(x, vertices[i]).transpose() * grad;
    }
    // Relaxation is always enabled here: the training weight is the maximum
    // violation even for systems deployed without relaxation.
    r[b] = solve_rclbf(nominal.eval(x), constraints, cfg.rho, true).relaxation;
  }
  return r;
}

LossBreakdown clbf_loss(const Mlp& v_net, const Mlp& pi_net, const NominalPolicy& nominal,
                        const SystemModel& system, const TrainConfig& cfg, const Batch& batch,
                        GradientTape* v_tape, GradientTape* pi_tape) {
  const Eigen::Index B = batch.X.cols();
  check(B >= 1, "clbf_loss: empty batch");
  check(static_cast<Eigen::Index>(batch.is_safe.size()) == B &&
            static_cast<Eigen::Index>(batch.is_unsafe.size()) == B && batch.r.size() == B,
        "clbf_loss: batch tag/relaxation sizes mismatch");
  const int ns = system.scenarios().count();
  const auto& vertices = system.scenarios().vertices;

  LossBreakdown out;
  const auto fw_v = v_net.forward(batch.X);
  const Vec v = v_net.values_V(fw_v);
  const Mat grads = v_net.input_gradients_V(fw_v);
  const auto fw_pi = pi_net.forward(batch.X);
  const Mat& U = fw_pi.output();

  // Goal term V(x_goal)^2 (its own forward pass; the goal is rarely a batch
  // point).
  const auto fw_goal = v_net.forward(system.task().x_goal);
  const double v_goal = v_net.values_V(fw_goal)[0];
  out.goal = v_goal * v_goal;
  if (v_tape != nullptr)
    v_tape->axpy(1.0, v_net.value_param_gradient(fw_goal, Vec::Constant(1, 2.0 * v_goal)));

  // Level-set hinges; their V-gradients share one weighted backward pass.
  Vec v_weights = Vec::Zero(B);
  const int n_safe = static_cast<int>(
      std::count(batch.is_safe.begin(), batch.is_safe.end(), uint8_t{1}));
  const int n_unsafe = static_cast<int>(
      std::count(batch.is_unsafe.begin(), batch.is_unsafe.end(), uint8_t{1}));
  for (Eigen::Index b = 0; b < B; ++b) {
    if (batch.is_safe[static_cast<size_t>(b)]) {
      const double h = cfg.eps + v[b] - cfg.c;
      if (h > 0.0) {
        out.safe += cfg.a1 * h / n_safe;
        v_weights[b] += cfg.a1 / n_safe;
      }
    }
    if (batch.is_unsafe[static_cast<size_t>(b)]) {
      const double h = cfg.eps + cfg.c - v[b];
      if (h > 0.0) {
        out.unsafe += cfg.a2 * h / n_unsafe;
        v_weights[b] -= cfg.a2 / n_unsafe;
      }
    }
  }

  // Decrease term, weighted point-wise by the precomputed relaxation r(x).
  Mat pi_cot = Mat::Zero(U.rows(), B);
  const double decrease_scale = cfg.a3 / (static_cast<double>(ns) * static_cast<double>(B));
  for (int i = 0; i < ns; ++i) {
    Mat D(batch.X.rows(), B); // closed-loop directions f_i + g_i u per column
    std::vector<Vec> lgv(static_cast<size_t>(B));
    for (Eigen::Index b = 0; b < B; ++b) {
      const Vec x = batch.X.col(b);
      const Mat g = system.eval_g(x, vertices[static_cast<size_t>(i)]);
      D.col(b) = system.eval_f(x, vertices[static_cast<size_t>(i)]) + g * U.col(b);
      lgv[static_cast<size_t>(b)] = g.transpose() * grads.col(b);
    }
    Vec dir_weights = Vec::Zero(B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const double h = cfg.eps + grads.col(b).dot(D.col(b)) + cfg.lambda * v[b];
      if (h > 0.0 && batch.r[b] > 0.0) {
        const double w = decrease_scale * batch.r[b];
        out.decrease += w * h;
        dir_weights[b] = w;
        v_weights[b] += w * cfg.lambda;
        if (pi_tape != nullptr) pi_cot.col(b) += w * lgv[static_cast<size_t>(b)];
      }
    }
    if (v_tape != nullptr && dir_weights.cwiseAbs().maxCoeff() > 0.0)
      v_tape->axpy(1.0, v_net.directional_param_gradient(fw_v, D, dir_weights));
  }
  if (v_tape != nullptr && v_weights.cwiseAbs().maxCoeff() > 0.0)
    v_tape->axpy(1.0, v_net.value_param_gradient(fw_v, v_weights));

  // Policy regularization toward the nominal controller.
  Mat diff = U;
  for (Eigen::Index b = 0; b < B; ++b) diff.col(b) -= nominal.eval(batch.X.col(b));
  out.policy_reg = diff.squaredNorm() / static_cast<double>(B);
  if (pi_tape != nullptr) {
    pi_cot += (cfg.pi_weight * 2.0 / static_cast<double>(B)) * diff;
    pi_tape->axpy(1.0, pi_net.output_param_gradient(fw_pi, pi_cot));
  }

  out.total = out.goal + out.safe + out.unsafe + out.decrease + cfg.pi_weight * out.policy_reg;
  return out;
}

std::string TrainingLog::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,phase,loss_total,loss_goal,loss_safe,loss_unsafe,loss_decrease,loss_policy,"
        "r_mean,r_max,r_positive_fraction,val_total,val_safe_fraction,val_unsafe_fraction\n";
  for (const auto& row : rows) {
    os << row.epoch << "," << row.phase << "," << row.train_loss.total << ","
       << row.train_loss.goal << "," << row.train_loss.safe << "," << row.train_loss.unsafe << ","
       << row.train_loss.decrease << "," << row.train_loss.policy_reg << "," << row.r_mean << ","
       << row.r_max << "," << row.r_positive_fraction << "," << row.val_total << ","
       << row.val_safe_fraction << "," << row.val_unsafe_fraction << "\n";
  }
  return os.str();
}

namespace {

/// Adam moments for one network; updates go through sgd_step on the scaled
/// direction so weight decay keeps its usual semantics.
class AdamState {
 public:
  explicit AdamState(const Mlp& net)
      : m1_(net.zero_tape()), m2_(net.zero_tape()), upd_(net.zero_tape()) {}

  void step(Mlp& net, const GradientTape& grad, double lr, double weight_decay) {
    ++t_;
    const double c1 = 1.0 - std::pow(kB1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kB2, static_cast<double>(t_));
    for (size_t k = 0; k < m1_.dW.size(); ++k) {
      m1_.dW[k] = kB1 * m1_.dW[k] + (1.0 - kB1) * grad.dW[k];
      m2_.dW[k] = (kB2 * m2_.dW[k].array() + (1.0 - kB2) * grad.dW[k].array().square()).matrix();
      upd_.dW[k] = ((m1_.dW[k].array() / c1) / ((m2_.dW[k].array() / c2).sqrt() + kEps)).matrix();
      m1_.db[k] = kB1 * m1_.db[k] + (1.0 - kB1) * grad.db[k];
      m2_.db[k] = (kB2 * m2_.db[k].array() + (1.0 - kB2) * grad.db[k].array().square()).matrix();
      upd_.db[k] = ((m1_.db[k].array() / c1) / ((m2_.db[k].array() / c2).sqrt() + kEps)).matrix();
    }
    net.sgd_step(upd_, lr, weight_decay);
  }

 private:
  static constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
  GradientTape m1_, m2_, upd_;
  long t_ = 0;
};

Batch slice_batch(const SampleSet& set, const Vec& r, const std::vector<int>& order, int begin,
                  int end) {
  Batch batch;
  const int count = end - begin;
  batch.X.resize(set.X.rows(), count);
  batch.is_safe.resize(static_cast<size_t>(count));
  batch.is_unsafe.resize(static_cast<size_t>(count));
  batch.r.resize(count);
  for (int k = 0; k < count; ++k) {
    const int idx = order[static_cast<size_t>(begin + k)];
    batch.X.col(k) = set.X.col(idx);
    batch.is_safe[static_cast<size_t>(k)] = set.is_safe[static_cast<size_t>(idx)];
    batch.is_unsafe[static_cast<size_t>(k)] = set.is_unsafe[static_cast<size_t>(idx)];
    batch.r[k] = r[idx];
  }
  return batch;
}

} // namespace

TrainResult train(const SystemModel& system, const TrainConfig& cfg) {
  cfg.validate();
  const auto& preset = system.preset();

  Mlp v_net = Mlp::certificate(system.state_dim(), preset.v_hidden, preset.v_layers);
  Mlp pi_net =
      Mlp::policy(system.state_dim(), preset.pi_hidden, preset.pi_layers, system.control_dim());
  v_net.init_xavier(cfg.seed + 1);
  pi_net.init_xavier(cfg.seed + 2);

  NominalPolicy nominal = make_nominal_policy(system);

  SampleSet data = sample_training_data(system, cfg);
  const int n_val = static_cast<int>(std::llround(cfg.validation_fraction * data.size()));
  const int n_fit = data.size() - n_val;

  // Pretraining: certificate toward the LQR quadratic, policy toward the
  // nominal controller.
  if (cfg.quadratic_init) {
    try {
      const Linearization lin =
          linearize(system, system.task().x_goal, nominal.u_goal.size() ? nominal.u_goal
                                                                        : Vec::Zero(system.control_dim()),
                    system.scenarios().nominal());
      const Mat P = care_solve(lin.A, lin.B, Mat::Identity(lin.A.rows(), lin.A.cols()),
                               Mat::Identity(lin.B.cols(), lin.B.cols()));
      fit_quadratic(v_net, P, system.task().x_goal, system.task().lo, system.task().hi,
                    /*epochs=*/60, /*n_samples=*/5000, /*lr=*/1e-3, cfg.seed + 3,
                    /*mse_threshold=*/1e-4);
    } catch (const std::exception&) {
      // Unstabilizable linearization: skip the quadratic warm start.
    }
    AdamState pi_pre(pi_net);
    for (int epoch = 0; epoch < 10; ++epoch) {
      for (int begin = 0; begin < n_fit; begin += cfg.batch) {
        const int end = std::min(begin + cfg.batch, n_fit);
        GradientTape tape = pi_net.zero_tape();
        policy_loss(pi_net, nominal, data.X.middleCols(begin, end - begin), &tape);
        pi_pre.step(pi_net, tape, cfg.lr, 0.0);
      }
    }
  }

  TrainResult result{v_net, pi_net, nominal, {}, false};
  Mlp v_ckpt = v_net, pi_ckpt = pi_net;
  AdamState v_opt(v_net), pi_opt(pi_net);

  std::mt19937_64 rng(cfg.seed + 4);
  std::vector<int> order(static_cast<size_t>(n_fit));
  std::iota(order.begin(), order.end(), 0);

  SampleSet val;
  if (n_val > 0) {
    val.X = data.X.rightCols(n_val);
    val.is_safe.assign(data.is_safe.end() - n_val, data.is_safe.end());
    val.is_unsafe.assign(data.is_unsafe.end() - n_val, data.is_unsafe.end());
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool update_v = (epoch / cfg.alternation) % 2 == 0;
    const Vec r_all = compute_relaxations(v_net, nominal, system, cfg, data.X);
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown epoch_loss;
    int n_batches = 0;
    for (int begin = 0; begin < n_fit; begin += cfg.batch, ++n_batches) {
      const int end = std::min(begin + cfg.batch, n_fit);
      const Batch batch = slice_batch(data, r_all, order, begin, end);
      GradientTape v_tape = v_net.zero_tape();
      GradientTape pi_tape = pi_net.zero_tape();
      const LossBreakdown loss =
          clbf_loss(v_net, pi_net, nominal, system, cfg, batch,
                    update_v ? &v_tape : nullptr, update_v ? nullptr : &pi_tape);
      epoch_loss.goal += loss.goal;
      epoch_loss.safe += loss.safe;
      epoch_loss.unsafe += loss.unsafe;
      epoch_loss.decrease += loss.decrease;
      epoch_loss.policy_reg += loss.policy_reg;
      epoch_loss.total += loss.total;
      if (update_v)
        v_opt.step(v_net, v_tape, cfg.lr, cfg.weight_decay);
      else
        pi_opt.step(pi_net, pi_tape, cfg.lr, cfg.weight_decay);
    }
    const double inv = 1.0 / std::max(1, n_batches);
    epoch_loss.goal *= inv;
    epoch_loss.safe *= inv;
    epoch_loss.unsafe *= inv;
    epoch_loss.decrease *= inv;
    epoch_loss.policy_reg *= inv;
    epoch_loss.total *= inv;

    TrainingLogRow row;
    row.epoch = epoch;
    row.phase = update_v ? 'V' : 'P';
    row.train_loss = epoch_loss;
    row.r_mean = r_all.head(n_fit).mean();
    row.r_max = r_all.head(n_fit).maxCoeff();
    row.r_positive_fraction =
        static_cast<double>((r_all.head(n_fit).array() > 1e-9).count()) / n_fit;

    if (n_val > 0) {
      Batch vb{val.X, val.is_safe, val.is_unsafe, r_all.tail(n_val)};
      const LossBreakdown vloss =
          clbf_loss(v_net, pi_net, nominal, system, cfg, vb, nullptr, nullptr);
      row.val_total = vloss.total;
      const Vec vv = v_net.values_V(v_net.forward(val.X));
      int safe_ok = 0, safe_n = 0, unsafe_ok = 0, unsafe_n = 0;
      for (Eigen::Index b = 0; b < vv.size(); ++b) {
        if (val.is_safe[static_cast<size_t>(b)]) {
          ++safe_n;
          if (vv[b] <= cfg.c) ++safe_ok;
        }
        if (val.is_unsafe[static_cast<size_t>(b)]) {
          ++unsafe_n;
          if (vv[b] > cfg.c) ++unsafe_ok;
        }
      }
      row.val_safe_fraction = safe_n ? static_cast<double>(safe_ok) / safe_n : 1.0;
      row.val_unsafe_fraction = unsafe_n ? static_cast<double>(unsafe_ok) / unsafe_n : 1.0;
    }
    result.log.rows.push_back(row);

    if (!std::isfinite(epoch_loss.total)) {
      result.diverged = true;
      result.v = v_ckpt;
      result.pi = pi_ckpt;
      return result;
    }
    v_ckpt = v_net;
    pi_ckpt = pi_net;
  }

  result.v = v_net;
  result.pi = pi_net;
  return result;
}

} // namespace rclbf
