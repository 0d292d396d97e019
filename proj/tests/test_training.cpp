#include "rclbf/training.hpp"

#include "oracles.hpp"
#include "rclbf/systems.hpp"

#include <doctest.h>

#include <cmath>

using namespace rclbf;
namespace oracle = rclbf::testing;

namespace {

TrainConfig small_config(const SystemModel& sys, int n_train) {
  TrainConfig cfg = TrainConfig::from_preset(sys.preset());
  cfg.n_train = n_train;
  cfg.seed = 11;
  return cfg;
}

} // namespace

TEST_CASE("sampling honors every quota within one percent") {
  const auto sys = make_system("kinematic_car");
  TrainConfig cfg = small_config(*sys, 125000);
  REQUIRE(cfg.quotas.size() == 3); // goal ball, safe set, unsafe set
  const SampleSet set = sample_training_data(*sys, cfg);
  REQUIRE(set.size() == cfg.n_train);
  const Vec& goal = sys->task().x_goal;
  int in_ball = 0;
  for (int k = 0; k < set.size(); ++k)
    if ((set.X.col(k) - goal).norm() <= cfg.quotas[0].radius_hi) ++in_ball;
  const double n = set.size();
  CHECK(in_ball / n >= cfg.quotas[0].fraction - 0.01);
  CHECK(set.n_safe() / n >= cfg.quotas[1].fraction - 0.01);
  CHECK(set.n_unsafe() / n >= cfg.quotas[2].fraction - 0.01);
  // Tags must agree with the task predicates.
  for (int k = 0; k < set.size(); ++k) {
    CHECK(static_cast<bool>(set.is_safe[k]) == sys->task().safe(set.X.col(k)));
    CHECK(static_cast<bool>(set.is_unsafe[k]) == sys->task().unsafe(set.X.col(k)));
  }
}

TEST_CASE("sampling is deterministic in the seed and stays inside the box") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 2000);
  const SampleSet a = sample_training_data(*sys, cfg);
  const SampleSet b = sample_training_data(*sys, cfg);
  CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < a.size(); ++k) CHECK(sys->task().in_domain(a.X.col(k), 1e-12));
}

TEST_CASE("loss terms reproduce hand-computed hinge values") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 100);
  const NominalPolicy nominal = make_nominal_policy(*sys);

  // Zero-parameter nets: V = 0 everywhere, pi = 0 everywhere.
  const Mlp v_net = Mlp::certificate(2, 8, 2);
  const Mlp pi_net = Mlp::policy(2, 8, 2, 2);

  Batch batch;
  batch.X = Mat::Zero(2, 4);
  batch.X.col(0) << 0.1, 0.0;  // safe
  batch.X.col(1) << 0.2, 0.0;  // safe
  batch.X.col(2) << 1.9, 0.0;  // unsafe
  batch.X.col(3) << 0.5, 0.5;  // untagged
  batch.is_safe = {1, 1, 0, 0};
  batch.is_unsafe = {0, 0, 1, 0};
  batch.r = Vec::Ones(4);

  const LossBreakdown loss = clbf_loss(v_net, pi_net, nominal, *sys, cfg, batch, nullptr, nullptr);
  // V = 0: goal term 0; safe hinge [eps + 0 - c]+ = 0; unsafe hinge
  // [eps + c - 0]+ = eps + c on the one unsafe point.
  CHECK(loss.goal == doctest::Approx(0.0));
  CHECK(loss.safe == doctest::Approx(0.0));
  CHECK(loss.unsafe == doctest::Approx(cfg.a2 * (cfg.eps + cfg.c)).epsilon(1e-12));
  // Zero certificate: every Lie derivative is zero, decrease hinge is
  // [eps + 0]+ = eps for each scenario and point.
  const double n_s = sys->scenarios().count();
  CHECK(loss.decrease ==
        doctest::Approx(cfg.a3 / (n_s * 4.0) * 4.0 * n_s * cfg.eps).epsilon(1e-12));
  // pi = 0 vs nominal LQR feedback.
  double reg = 0.0;
  for (int k = 0; k < 4; ++k) reg += nominal.eval(batch.X.col(k)).squaredNorm();
  CHECK(loss.policy_reg == doctest::Approx(reg / 4.0).epsilon(1e-12));
  CHECK(loss.total == doctest::Approx(loss.goal + loss.safe + loss.unsafe + loss.decrease +
                                      cfg.pi_weight * loss.policy_reg)
                          .epsilon(1e-12));
}

TEST_CASE("zero relaxation weights disable the decrease term") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 100);
  const NominalPolicy nominal = make_nominal_policy(*sys);
  Mlp v_net = Mlp::certificate(2, 8, 2);
  v_net.init_xavier(3);
  Mlp pi_net = Mlp::policy(2, 8, 2, 2);
  pi_net.init_xavier(5);
  Batch batch;
  batch.X = Mat::Random(2, 8);
  batch.is_safe.assign(8, 0);
  batch.is_unsafe.assign(8, 0);
  batch.r = Vec::Zero(8);
  const LossBreakdown loss = clbf_loss(v_net, pi_net, nominal, *sys, cfg, batch, nullptr, nullptr);
  CHECK(loss.decrease == doctest::Approx(0.0));
}

TEST_CASE("combined loss gradients match finite differences") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 100);
  cfg.eps = 0.05; // keep hinges away from their kinks
  const NominalPolicy nominal = make_nominal_policy(*sys);
  Mlp v_net = Mlp::certificate(2, 6, 2);
  v_net.init_xavier(7);
  Mlp pi_net = Mlp::policy(2, 6, 2, 2);
  pi_net.init_xavier(9);

  Batch batch;
  batch.X = 0.8 * Mat::Random(2, 6);
  batch.is_safe = {1, 1, 1, 0, 0, 0};
  batch.is_unsafe = {0, 0, 0, 1, 1, 0};
  batch.r = Vec::Ones(6);

  GradientTape v_tape = v_net.zero_tape();
  GradientTape pi_tape = pi_net.zero_tape();
  clbf_loss(v_net, pi_net, nominal, *sys, cfg, batch, &v_tape, &pi_tape);

  const auto loss_scalar = [&] {
    return clbf_loss(v_net, pi_net, nominal, *sys, cfg, batch, nullptr, nullptr).total;
  };
  const GradientTape v_fd = oracle::fd_param_gradient(v_net, loss_scalar);
  const GradientTape pi_fd = oracle::fd_param_gradient(pi_net, loss_scalar);
  CHECK(oracle::max_rel_err(v_tape, v_fd, 1e-4) <= 1e-3);
  CHECK(oracle::max_rel_err(pi_tape, pi_fd, 1e-4) <= 1e-3);
}

TEST_CASE("policy regularizer and its gradient agree with finite differences") {
  const auto sys = make_system("linear_test");
  const NominalPolicy nominal = make_nominal_policy(*sys);
  Mlp pi_net = Mlp::policy(2, 6, 2, 2);
  pi_net.init_xavier(13);
  const Mat X = 0.5 * Mat::Random(2, 5);
  GradientTape tape = pi_net.zero_tape();
  const double loss = policy_loss(pi_net, nominal, X, &tape);
  double manual = 0.0;
  for (int k = 0; k < 5; ++k)
    manual += (pi_net.eval_policy(X.col(k)) - nominal.eval(X.col(k))).squaredNorm();
  CHECK(loss == doctest::Approx(manual / 5.0).epsilon(1e-12));
  const GradientTape fd =
      oracle::fd_param_gradient(pi_net, [&] { return policy_loss(pi_net, nominal, X, nullptr); });
  CHECK(oracle::max_rel_err(tape, fd, 1e-5) <= 1e-3);
}

TEST_CASE("relaxations are zero for a zero certificate") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 100);
  const NominalPolicy nominal = make_nominal_policy(*sys);
  const Mlp v_net = Mlp::certificate(2, 8, 2);
  const Mat X = Mat::Random(2, 10);
  const Vec r = compute_relaxations(v_net, nominal, *sys, cfg, X);
  CHECK(r.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("training on the decay plant learns a working certificate") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 4000);
  cfg.epochs = 20;
  cfg.seed = 3;
  const TrainResult res = train(*sys, cfg);
  REQUIRE_FALSE(res.diverged);
  REQUIRE_FALSE(res.log.rows.empty());

  // The learned certificate must satisfy the decrease condition under the
  // learned policy on nearly all of the domain.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  int satisfied = 0;
  const int n_checks = 1000;
  for (int k = 0; k < n_checks; ++k) {
    Vec x(2);
    x << unit(rng), unit(rng);
    const double v = res.v.value_V(x);
    const Vec grad = res.v.grad_V(x);
    const Vec u = res.pi.eval_policy(x);
    const double vdot = grad.dot(sys->xdot(x, u, sys->scenarios().nominal()));
    if (vdot + cfg.lambda * v <= cfg.eps) ++satisfied;
  }
  CHECK(satisfied >= static_cast<int>(0.99 * n_checks));

  // Goal value pinned near zero and the log has both phases.
  CHECK(res.v.value_V(sys->task().x_goal) <= 1e-2);
  bool saw_v = false, saw_p = false;
  for (const auto& row : res.log.rows) {
    saw_v |= row.phase == 'V';
    saw_p |= row.phase == 'P';
  }
  CHECK(saw_v);
  CHECK(saw_p);
  const std::string csv = res.log.to_csv();
  CHECK(csv.rfind("epoch,phase,loss_total,loss_goal,loss_safe,loss_unsafe,loss_decrease,"
                  "loss_policy,r_mean,r_max,r_positive_fraction,val_total,val_safe_fraction,"
                  "val_unsafe_fraction",
                  0) == 0);
}

TEST_CASE("training is deterministic in the seed") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 500);
  cfg.epochs = 2;
  const TrainResult a = train(*sys, cfg);
  const TrainResult b = train(*sys, cfg);
  for (size_t k = 0; k < a.v.W.size(); ++k)
    CHECK((a.v.W[k] - b.v.W[k]).cwiseAbs().maxCoeff() == 0.0);
  for (size_t k = 0; k < a.pi.W.size(); ++k)
    CHECK((a.pi.W[k] - b.pi.W[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config validation rejects bad hyperparameters") {
  const auto sys = make_system("linear_test");
  TrainConfig cfg = small_config(*sys, 100);
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config(*sys, 100);
  cfg.validation_fraction = 0.9;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config(*sys, 100);
  cfg.quotas = {SamplingQuota::safe(0.7), SamplingQuota::unsafe(0.5)};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
