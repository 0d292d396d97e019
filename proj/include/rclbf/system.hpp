#pragma once

#include "rclbf/types.hpp"

#include <memory>
#include <random>

namespace rclbf {

/// A control-affine plant xdot = f(x, theta) + g(x, theta) u whose dynamics
/// are affine in the parameter vector theta at fixed x. Immutable after
/// construction; evaluators are pure and safe for concurrent calls.
class SystemModel {
 public:
  SystemModel(std::string name, int n, int ell, ScenarioSet scenarios, TaskSpec task,
              SystemPreset preset)
      : name_(std::move(name)),
        n_(n),
        ell_(ell),
        scenarios_(std::move(scenarios)),
        task_(std::move(task)),
        preset_(std::move(preset)) {}
  virtual ~SystemModel() = default;

  const std::string& name() const { return name_; }
  int state_dim() const { return n_; }
  int control_dim() const { return ell_; }
  const ScenarioSet& scenarios() const { return scenarios_; }
  const TaskSpec& task() const { return task_; }
  const SystemPreset& preset() const { return preset_; }

  /// Drift vector f(x, theta).
  Vec eval_f(const Vec& x, const Vec& theta) const;
  /// Actuation matrix g(x, theta), n x ell.
  Mat eval_g(const Vec& x, const Vec& theta) const;

  Vec eval_f_nominal(const Vec& x) const { return eval_f(x, scenarios_.nominal()); }
  Mat eval_g_nominal(const Vec& x) const { return eval_g(x, scenarios_.nominal()); }

  Vec xdot(const Vec& x, const Vec& u, const Vec& theta) const {
    return eval_f(x, theta) + eval_g(x, theta) * u;
  }

  /// Uniform draw from the scenario hull (exact for axis-aligned hulls).
  Vec sample_theta(std::mt19937_64& rng) const;

 protected:
  virtual Vec f_impl(const Vec& x, const Vec& theta) const = 0;
  virtual Mat g_impl(const Vec& x, const Vec& theta) const = 0;

 private:
  std::string name_;
  int n_;
  int ell_;
  ScenarioSet scenarios_;
  TaskSpec task_;
  SystemPreset preset_;
};

struct AffinityReport {
  double max_f_deviation = 0.0;
  double max_g_deviation = 0.0;
  double worst() const { return std::max(max_f_deviation, max_g_deviation); }
};

/// Checks that f and g are affine in theta by comparing convex combinations
/// of random vertex pairs against interpolated evaluations.
AffinityReport check_affine_in_theta(const SystemModel& system, int trials, uint64_t seed = 0);

/// Factory for the shipped benchmark plants plus the test plants used by the
/// test-suite ("linear_test", "broken_affine").
std::shared_ptr<SystemModel> make_system(const std::string& name);

std::vector<std::string> benchmark_system_names();

} // namespace rclbf
