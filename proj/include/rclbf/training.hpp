#pragma once

#include "rclbf/controller.hpp"
#include "rclbf/mlp.hpp"
#include "rclbf/system.hpp"

#include <cstdint>

namespace rclbf {

/// Hyperparameters of the certificate/policy co-training loop.
struct TrainConfig {
  // Loss weights and margin.
  double a1 = 100.0;
  double a2 = 100.0;
  double a3 = 1.0;
  double eps = 0.01;
  double pi_weight = 1e-5;
  // Controller constants entering the loss.
  double c = 1.0;
  double lambda = 1.0;
  double rho = 100.0;
  bool allow_relax = true;
  // Optimization.
  double lr = 1e-3;
  double weight_decay = 1e-6;
  int n_train = 10000;
  int epochs = 20;
  int batch = 256;
  int alternation = 5; // epochs on V, then epochs on pi, repeating
  double validation_fraction = 0.1;
  std::vector<SamplingQuota> quotas;
  bool quadratic_init = true;
  uint64_t seed = 0;

  static TrainConfig from_preset(const SystemPreset& preset);
  void validate() const; // throws listing the first offending field
};

/// Training states with region tags; columns of X are samples.
struct SampleSet {
  Mat X;
  std::vector<uint8_t> is_safe;
  std::vector<uint8_t> is_unsafe;

  int size() const { return static_cast<int>(X.cols()); }
  int n_safe() const;
  int n_unsafe() const;
};

/// Uniform draws over the domain box with rejection sampling until every
/// quota (norm ball around the goal, safe set, unsafe set) is met. Throws if
/// a quota region stays empty after 1e6 rejection draws.
SampleSet sample_training_data(const SystemModel& system, const TrainConfig& cfg);

/// One minibatch: states, tags, and the per-point relaxation weights r(x)
/// (precomputed once per epoch, not differentiated).
struct Batch {
  Mat X;
  std::vector<uint8_t> is_safe;
  std::vector<uint8_t> is_unsafe;
  Vec r;
};

struct LossBreakdown {
  double goal = 0.0;     // V(x_goal)^2
  double safe = 0.0;     // a1 * mean_safe [eps + V - c]+
  double unsafe = 0.0;   // a2 * mean_unsafe [eps + c - V]+
  double decrease = 0.0; // a3/(n_s N) * sum_x r(x) sum_i [eps + LfV + LgV pi + lambda V]+
  double policy_reg = 0.0; // mean ||pi - pi_nominal||^2 (reported unweighted)
  double total = 0.0;      // goal + safe + unsafe + decrease + pi_weight * policy_reg
};

/// Evaluates the empirical loss on a batch; optionally accumulates parameter
/// gradients of the combined loss into the given tapes (either may be null).
LossBreakdown clbf_loss(const Mlp& v_net, const Mlp& pi_net, const NominalPolicy& nominal,
                        const SystemModel& system, const TrainConfig& cfg, const Batch& batch,
                        GradientTape* v_tape, GradientTape* pi_tape);

/// Mean squared deviation of the policy net from the nominal policy;
/// optionally accumulates its (unweighted) parameter gradient.
double policy_loss(const Mlp& policy, const NominalPolicy& nominal, const Mat& X,
                   GradientTape* tape = nullptr);

/// Per-point relaxations r(x) from solving the safety QP at each column of X
/// with the current certificate and the nominal reference control.
Vec compute_relaxations(const Mlp& v_net, const NominalPolicy& nominal,
                        const SystemModel& system, const TrainConfig& cfg, const Mat& X);

struct TrainingLogRow {
  int epoch = 0;
  char phase = 'V'; // which net this epoch updated
  LossBreakdown train_loss;
  double r_mean = 0.0;
  double r_max = 0.0;
  double r_positive_fraction = 0.0;
  double val_total = 0.0;
  double val_safe_fraction = 0.0;   // fraction of safe validation points with V <= c
  double val_unsafe_fraction = 0.0; // fraction of unsafe validation points with V > c
};

struct TrainingLog {
  std::vector<TrainingLogRow> rows;
  std::string to_csv() const;
};

struct TrainResult {
  Mlp v;
  Mlp pi;
  NominalPolicy nominal;
  TrainingLog log;
  bool diverged = false;
};

/// Alternating-epoch training of the certificate and policy networks.
/// Deterministic for a fixed config (single-threaded). On divergence (NaN
/// loss) the last finite checkpoint is returned with diverged = true.
TrainResult train(const SystemModel& system, const TrainConfig& cfg);

} // namespace rclbf
