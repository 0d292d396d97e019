// Python bindings for the main operations: systems, certificate networks,
// the safety QP, training, simulation, and verification.

#include "rclbf/config.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace rclbf;

PYBIND11_MODULE(_rclbf, m) {
  m.doc() = "robust CLBF toolkit: learn neural certificates, deploy QP safety filters";

  py::class_<ScenarioSet>(m, "ScenarioSet")
      .def_readonly("vertices", &ScenarioSet::vertices)
      .def_readonly("nominal_index", &ScenarioSet::nominal_index)
      .def("count", &ScenarioSet::count)
      .def("nominal", &ScenarioSet::nominal)
      .def("contains", &ScenarioSet::contains, py::arg("theta"), py::arg("tol") = 1e-9);

  py::class_<SystemModel, std::shared_ptr<SystemModel>>(m, "SystemModel")
      .def_property_readonly("name", &SystemModel::name)
      .def_property_readonly("state_dim", &SystemModel::state_dim)
      .def_property_readonly("control_dim", &SystemModel::control_dim)
      .def_property_readonly("scenarios", &SystemModel::scenarios)
      .def("f", &SystemModel::eval_f, py::arg("x"), py::arg("theta"))
      .def("g", &SystemModel::eval_g, py::arg("x"), py::arg("theta"))
      .def("xdot", &SystemModel::xdot, py::arg("x"), py::arg("u"), py::arg("theta"))
      .def("x_goal", [](const SystemModel& s) { return s.task().x_goal; })
      .def("is_safe", [](const SystemModel& s, const Vec& x) { return s.task().safe(x); })
      .def("is_unsafe", [](const SystemModel& s, const Vec& x) { return s.task().unsafe(x); });

  m.def("make_system", &make_system, py::arg("name"));
  m.def("benchmark_system_names", &benchmark_system_names);
  m.def(
      "check_affine_in_theta",
      [](const SystemModel& system, int trials, uint64_t seed) {
        const AffinityReport rep = check_affine_in_theta(system, trials, seed);
        return py::make_tuple(rep.max_f_deviation, rep.max_g_deviation);
      },
      py::arg("system"), py::arg("trials") = 100, py::arg("seed") = 0);

  py::class_<Mlp>(m, "Mlp")
      .def_static("certificate", &Mlp::certificate, py::arg("input_dim"), py::arg("hidden"),
                  py::arg("hidden_layers"))
      .def_static("policy", &Mlp::policy, py::arg("input_dim"), py::arg("hidden"),
                  py::arg("hidden_layers"), py::arg("output_dim"))
      .def_static("load", &Mlp::load_file, py::arg("path"))
      .def("save", &Mlp::save_file, py::arg("path"))
      .def("init_xavier", &Mlp::init_xavier, py::arg("seed"))
      .def("value", &Mlp::value_V, py::arg("x"))
      .def("grad", &Mlp::grad_V, py::arg("x"))
      .def("eval_policy", &Mlp::eval_policy, py::arg("x"))
      .def_property_readonly("input_dim", &Mlp::input_dim)
      .def_property_readonly("output_dim", &Mlp::output_dim);

  py::enum_<QPStatus>(m, "QPStatus")
      .value("optimal", QPStatus::optimal)
      .value("infeasible", QPStatus::infeasible)
      .value("max_iter", QPStatus::max_iter);

  m.def(
      "solve_qp",
      [](const Mat& H, const Vec& c, const Mat& A, const Vec& b) {
        const QPSolution sol = solve(QPProblem{H, c, A, b});
        return py::make_tuple(sol.z, sol.objective, sol.status);
      },
      py::arg("H"), py::arg("c"), py::arg("A"), py::arg("b"),
      "Minimize 1/2 z'Hz + c'z subject to Az <= b");

  m.def(
      "solve_rclbf_qp",
      [](const Vec& u_nom, const std::vector<std::pair<double, Vec>>& constraints, double rho,
         bool allow_relax) {
        std::vector<RclbfConstraint> rows;
        for (const auto& [lhs, lgv] : constraints) rows.push_back({lhs, lgv});
        const RclbfQpResult res = solve_rclbf(u_nom, rows, rho, allow_relax);
        return py::make_tuple(res.u, res.relaxation, res.status);
      },
      py::arg("u_nom"), py::arg("constraints"), py::arg("rho"), py::arg("allow_relax") = true);

  py::class_<ControllerConfig>(m, "ControllerConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &ControllerConfig::lambda)
      .def_readwrite("c", &ControllerConfig::c)
      .def_readwrite("rho", &ControllerConfig::rho)
      .def_readwrite("allow_relax", &ControllerConfig::allow_relax);

  py::class_<NominalPolicy>(m, "NominalPolicy")
      .def_readonly("K", &NominalPolicy::K)
      .def_readonly("u_goal", &NominalPolicy::u_goal)
      .def_readonly("equilibrium_residual", &NominalPolicy::equilibrium_residual)
      .def("eval", &NominalPolicy::eval, py::arg("x"));

  m.def("make_nominal_policy", &make_nominal_policy, py::arg("system"), py::arg("q_weight") = 1.0,
        py::arg("r_weight") = 1.0);

  py::class_<ControlResult>(m, "ControlResult")
      .def_readonly("u", &ControlResult::u)
      .def_readonly("relaxation", &ControlResult::relaxation)
      .def_readonly("solve_time", &ControlResult::solve_time)
      .def_readonly("infeasible", &ControlResult::infeasible);

  py::class_<Controller>(m, "Controller")
      .def_property_readonly("name", &Controller::name)
      .def("control", &Controller::control, py::arg("x"));

  py::class_<RclbfQpController, Controller>(m, "RclbfQpController")
      .def(py::init<std::shared_ptr<const SystemModel>, Mlp, NominalPolicy, ControllerConfig>(),
           py::arg("system"), py::arg("certificate"), py::arg("reference"), py::arg("config"));

  py::class_<NominalController, Controller>(m, "NominalController")
      .def(py::init<NominalPolicy>(), py::arg("policy"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("n_train", &TrainConfig::n_train)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("c", &TrainConfig::c)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("rho", &TrainConfig::rho)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("quadratic_init", &TrainConfig::quadratic_init);

  m.def(
      "train_config_for",
      [](const SystemModel& system) { return TrainConfig::from_preset(system.preset()); },
      py::arg("system"));

  m.def(
      "train",
      [](const SystemModel& system, const TrainConfig& cfg) {
        const TrainResult res = train(system, cfg);
        return py::make_tuple(res.v, res.pi, res.log.to_csv(), res.diverged);
      },
      py::arg("system"), py::arg("config"),
      "Returns (certificate, policy, training_log_csv, diverged)");

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("dt_control", &SimConfig::dt_control)
      .def_readwrite("dt_integrate", &SimConfig::dt_integrate)
      .def_readwrite("horizon", &SimConfig::horizon)
      .def_readwrite("n_trials", &SimConfig::n_trials)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("x0_lo", &SimConfig::x0_lo)
      .def_readwrite("x0_hi", &SimConfig::x0_hi);

  m.def(
      "sim_config_for",
      [](const SystemModel& system) { return SimConfig::from_preset(system.preset()); },
      py::arg("system"));

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("controller_name", &EvalReport::controller_name)
      .def_readonly("safety_rate", &EvalReport::safety_rate)
      .def_readonly("goal_error", &EvalReport::goal_error)
      .def_readonly("mean_solve_time", &EvalReport::mean_solve_time)
      .def_readonly("median_solve_time", &EvalReport::median_solve_time);

  m.def("evaluate", &evaluate, py::arg("system"), py::arg("controller"), py::arg("config"));

  m.def(
      "level_set_report",
      [](const Mlp& net, const SystemModel& system, double c, int n, uint64_t seed) {
        const LevelSetReport rep = level_set_report(net, system, c, n, seed);
        return py::make_tuple(rep.safe_fraction, rep.unsafe_fraction);
      },
      py::arg("net"), py::arg("system"), py::arg("c"), py::arg("n") = 10000, py::arg("seed") = 0);

  m.def(
      "validate_config",
      [](const std::string& raw) {
        const ConfigResult res = validate_config(raw);
        return py::make_tuple(res.ok(), res.errors);
      },
      py::arg("raw_json"), "Returns (ok, errors)");

  m.def("run_experiment", &run_experiment, py::arg("config"));
  m.def("default_experiment", &default_experiment, py::arg("system_name"), py::arg("mode"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("system_name", &ExperimentConfig::system_name)
      .def_readwrite("mode", &ExperimentConfig::mode)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("out_dir", &ExperimentConfig::out_dir)
      .def_readwrite("checkpoint_v", &ExperimentConfig::checkpoint_v)
      .def_readwrite("checkpoint_pi", &ExperimentConfig::checkpoint_pi)
      .def_readwrite("train", &ExperimentConfig::train)
      .def_readwrite("sim", &ExperimentConfig::sim)
      .def("to_json", &ExperimentConfig::to_json);
}
