#include "vvord/analysis.hpp"
#include "vvord/cli.hpp"
#include "vvord/dynamics.hpp"
#include "vvord/emulator.hpp"
#include "vvord/equilibrium.hpp"
#include "vvord/parallel.hpp"
#include "vvord/rules_io.hpp"
#include "vvord/scenarios.hpp"
#include "vvord/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace vvord;

namespace {

std::vector<Scenario> to_scenarios(const Matrix& rows) {
    std::vector<Scenario> out;
    out.reserve(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index s = 0; s < rows.rows(); ++s) out.push_back(Scenario{rows.row(s).transpose()});
    return out;
}

Matrix stack(const std::vector<Vector>& rows) {
    if (rows.empty()) return Matrix();
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t t = 0; t < rows.size(); ++t) m.row(static_cast<Eigen::Index>(t)) = rows[t].transpose();
    return m;
}

StopRule make_stop(std::optional<int> steps, double tol, int max_steps) {
    return steps ? StopRule::fixed(*steps, tol) : StopRule::tolerance(tol, max_steps);
}

py::dict analysis_dict(const FeederAnalysis& a) {
    py::dict d;
    d["single_phase"] = a.single_phase;
    d["x_norm"] = a.x_norm;
    d["q_norm"] = a.q_norm;
    d["eps1"] = a.eps1;
    d["kappa"] = a.kappa;
    d["lambda_min"] = a.lambda_min;
    d["lambda_max"] = a.lambda_max;
    d["mu0"] = a.mu0;
    d["contraction"] = a.contraction;
    d["T_single"] = a.depth_single;
    d["mu_bound_multiphase"] = a.mu_bound_multiphase;
    d["mu_multi"] = a.mu_multiphase;
    d["contraction_multi"] = a.contraction_multiphase;
    d["T_multi"] = a.depth_multiphase;
    d["pgd_iterations"] = a.pgd_iterations;
    d["apgd_iterations"] = a.apgd_iterations;
    d["inc_stable_at_mu0"] = a.inc_stable_at_mu0;
    d["inc_stable_at_mu_multi"] = a.inc_stable_at_mu_multiphase;
    return d;
}

}  // namespace

PYBIND11_MODULE(_vvord, m) {
    m.doc() = "Volt/VAR rule simulation, equilibrium analysis and optimal rule design.";
    m.attr("__version__") = version();

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::enum_<PhaseLayout>(m, "PhaseLayout").value("single", PhaseLayout::single).value("multi", PhaseLayout::multi);

    py::class_<FeederModel>(m, "FeederModel")
        .def_readonly("x", &FeederModel::x)
        .def_readonly("r", &FeederModel::r)
        .def_readonly("v0", &FeederModel::v0)
        .def_readonly("layout", &FeederModel::layout)
        .def_readonly("der_nodes", &FeederModel::der_nodes)
        .def_readonly("q_rating", &FeederModel::q_rating)
        .def_property_readonly("n_nodes", &FeederModel::n_nodes)
        .def_property_readonly("single_phase", &FeederModel::single_phase)
        .def("to_json", &feeder_to_json);

    m.def("load_feeder", &load_feeder, py::arg("path"));
    m.def("feeder_from_json", [](const std::string& text) { return feeder_from_json(text); }, py::arg("text"));
    m.def(
        "build_radial_feeder",
        [](const std::vector<std::tuple<int, int, double, double>>& branches, double v0) {
            std::vector<Branch> b;
            for (const auto& [from, to, r, x] : branches) b.push_back({from, to, r, x});
            return build_radial_feeder(b, v0);
        },
        py::arg("branches"), py::arg("v0") = 1.0, "Branches are (from, to, r, x) tuples; node 0 is the substation.");
    m.def("with_ders", &with_ders, py::arg("feeder"), py::arg("nodes"), py::arg("ratings"));
    m.def(
        "grid_conditions",
        [](const FeederModel& f, const Vector& p, const Vector& q_load) { return grid_conditions(f, p, q_load).v_tilde; },
        py::arg("feeder"), py::arg("p"), py::arg("q_load"));
    m.def("spectral_norm", &spectral_norm, py::arg("m"));
    m.def(
        "symmetric_eig_extremes",
        [](const Matrix& x) {
            const auto e = symmetric_eig_extremes(x);
            return py::make_tuple(e.min, e.max);
        },
        py::arg("m"));
    m.def("condition_number", &condition_number, py::arg("m"));

    py::class_<NodeRule>(m, "NodeRule")
        .def(py::init<double, double, double, double, double>(), py::arg("v_ref"), py::arg("deadband"),
             py::arg("slope"), py::arg("q_max"), py::arg("sigma") = 0.0)
        .def_readwrite("v_ref", &NodeRule::v_ref)
        .def_readwrite("deadband", &NodeRule::deadband)
        .def_readwrite("slope", &NodeRule::slope)
        .def_readwrite("q_max", &NodeRule::q_max)
        .def_readwrite("sigma", &NodeRule::sigma);
    py::class_<NodeRuleT>(m, "NodeRuleT")
        .def(py::init<double, double, double, double>(), py::arg("v_ref"), py::arg("delta_t"), py::arg("alpha_t"),
             py::arg("q_max"))
        .def_readwrite("v_ref", &NodeRuleT::v_ref)
        .def_readwrite("delta_t", &NodeRuleT::delta_t)
        .def_readwrite("alpha_t", &NodeRuleT::alpha_t)
        .def_readwrite("q_max", &NodeRuleT::q_max);

    py::class_<RuleParams>(m, "RuleParams")
        .def_static("uncontrolled", &RuleParams::uncontrolled, py::arg("n"))
        .def_readwrite("v_ref", &RuleParams::v_ref)
        .def_readwrite("deadband", &RuleParams::deadband)
        .def_readwrite("slope", &RuleParams::slope)
        .def_readwrite("q_max", &RuleParams::q_max)
        .def_readwrite("sigma", &RuleParams::sigma)
        .def("node", &RuleParams::node)
        .def("set_node", &RuleParams::set_node);
    py::class_<TransformedParams>(m, "TransformedParams")
        .def_static("uncontrolled", &TransformedParams::uncontrolled, py::arg("n"))
        .def_readwrite("v_ref", &TransformedParams::v_ref)
        .def_readwrite("delta_t", &TransformedParams::delta_t)
        .def_readwrite("alpha_t", &TransformedParams::alpha_t)
        .def_readwrite("q_max", &TransformedParams::q_max)
        .def("node", &TransformedParams::node)
        .def("set_node", &TransformedParams::set_node);

    m.def("nonincremental_curve", &nonincremental_curve, py::arg("v"), py::arg("rule"));
    m.def("prox_g", &prox_g, py::arg("y"), py::arg("mu"), py::arg("delta_t"), py::arg("q_max"));
    m.def("prox_g_relu_form", &prox_g_relu_form, py::arg("y"), py::arg("mu"), py::arg("delta_t"), py::arg("q_max"));
    m.def(
        "prox_branch",
        [](double y, double mu, double dt, double qm) { return std::string(to_string(prox_branch(y, mu, dt, qm))); },
        py::arg("y"), py::arg("mu"), py::arg("delta_t"), py::arg("q_max"));
    m.def("to_transformed", py::overload_cast<const RuleParams&, double>(&to_transformed), py::arg("z"), py::arg("mu"));
    m.def("from_transformed", py::overload_cast<const TransformedParams&, double>(&from_transformed), py::arg("zt"),
          py::arg("mu"));
    m.def("incremental_step", &incremental_step, py::arg("q"), py::arg("v"), py::arg("zt"), py::arg("mu"));

    py::class_<SimulationTrace>(m, "SimulationTrace")
        .def_property_readonly("q", [](const SimulationTrace& t) { return stack(t.q_history); })
        .def_property_readonly("v", [](const SimulationTrace& t) { return stack(t.v_history); })
        .def_readonly("converged", &SimulationTrace::converged)
        .def_readonly("diverged", &SimulationTrace::diverged)
        .def_readonly("iterations", &SimulationTrace::iterations_used)
        .def_readonly("residual", &SimulationTrace::final_residual);

    m.def(
        "simulate",
        [](const std::string& rule, const FeederModel& f, const Vector& v_tilde, py::object params,
           std::optional<double> mu, std::optional<int> steps, double tol, int max_steps) {
            const StopRule stop = make_stop(steps, tol, max_steps);
            const Scenario s{v_tilde};
            const RuleKind kind = parse_rule_kind(rule);
            if (kind == RuleKind::nonincremental) return simulate_nonincremental(params.cast<RuleParams>(), f, s, stop);
            const bool acc = kind == RuleKind::accelerated;
            const double step = mu ? *mu : default_step_size(f, acc);
            py::gil_scoped_release release;
            return simulate_incremental(params.cast<TransformedParams>(), step, acc, f, s, stop);
        },
        py::arg("rule"), py::arg("feeder"), py::arg("v_tilde"), py::arg("params"), py::arg("mu") = py::none(),
        py::arg("steps") = py::none(), py::arg("tol") = 1e-8, py::arg("max_steps") = 10'000,
        "Closed-loop simulation from q = 0. rule is 'noninc' (RuleParams), 'inc' or 'acc' (TransformedParams).");
    m.def(
        "check_stability_noninc",
        [](const RuleParams& z, const FeederModel& f) {
            const auto c = check_stability_noninc(z, f);
            return py::make_tuple(c.stable, c.norm);
        },
        py::arg("z"), py::arg("feeder"));
    m.def(
        "check_stability_inc_single",
        [](double mu, const FeederModel& f) {
            const auto c = check_stability_inc_single(mu, f);
            return py::make_tuple(c.stable, c.norm);
        },
        py::arg("mu"), py::arg("feeder"));
    m.def("multiphase_step_bound", py::overload_cast<const Matrix&>(&multiphase_step_bound), py::arg("x"));
    m.def("default_step_size", &default_step_size, py::arg("feeder"), py::arg("accelerated") = false);

    py::class_<EquilibriumResult>(m, "EquilibriumResult")
        .def_readonly("q_star", &EquilibriumResult::q_star)
        .def_readonly("v_star", &EquilibriumResult::v_star)
        .def_readonly("kkt_residual", &EquilibriumResult::kkt_residual)
        .def_readonly("iterations", &EquilibriumResult::iterations);
    m.def(
        "find_equilibrium",
        [](const TransformedParams& zt, double mu, const FeederModel& f, const Vector& v_tilde) {
            return find_equilibrium(zt, mu, f, Scenario{v_tilde});
        },
        py::arg("zt"), py::arg("mu"), py::arg("feeder"), py::arg("v_tilde"));
    m.def(
        "solve_inner",
        [](const RuleParams& z, const FeederModel& f, const Vector& v_tilde, double tol) {
            return solve_inner(z, f, Scenario{v_tilde}, tol);
        },
        py::arg("z"), py::arg("feeder"), py::arg("v_tilde"), py::arg("tol") = 1e-12);
    m.def(
        "objective",
        [](const TransformedParams& zt, double mu, const FeederModel& f, const Matrix& scenarios) {
            return objective_F(zt, mu, f, to_scenarios(scenarios));
        },
        py::arg("zt"), py::arg("mu"), py::arg("feeder"), py::arg("scenarios"));
    m.def(
        "baseline_objective", [](const Matrix& scenarios) { return baseline_objective(to_scenarios(scenarios)); },
        py::arg("scenarios"));

    m.def(
        "loss_and_grad",
        [](const TransformedParams& zt, const FeederModel& f, const Matrix& scenarios, double mu, bool accelerated,
           std::optional<int> depth, double tol, int max_steps) {
            const UnrolledConfig config{mu, accelerated, make_stop(depth, tol, max_steps)};
            const auto batch = to_scenarios(scenarios);
            BatchLossGrad lg;
            {
                py::gil_scoped_release release;
                lg = loss_and_grad_batch(zt, f, batch, config);
            }
            return py::make_tuple(lg.loss, lg.grad);
        },
        py::arg("zt"), py::arg("feeder"), py::arg("scenarios"), py::arg("mu") = 1.0, py::arg("accelerated") = true,
        py::arg("depth") = py::none(), py::arg("tol") = 1e-6, py::arg("max_steps") = 5'000,
        "Batch-mean emulator loss and its gradient with respect to the transformed parameters.");

    m.def(
        "analyze_feeder",
        [](const FeederModel& f, double eps1, std::optional<double> mu) { return analysis_dict(analyze_feeder(f, eps1, mu)); },
        py::arg("feeder"), py::arg("eps1") = 1e-5, py::arg("mu") = py::none());
    m.def("depth_bound_single", &depth_bound_single, py::arg("kappa"), py::arg("x_norm"), py::arg("q_norm"),
          py::arg("eps1"));
    m.def("depth_bound_contraction", &depth_bound_contraction, py::arg("contraction"), py::arg("x_norm"),
          py::arg("q_norm"), py::arg("eps1"));

    m.def(
        "generate_scenarios",
        [](const FeederModel& f, int count, std::pair<double, double> load, std::pair<double, double> solar,
           std::uint64_t seed, double reactive_ratio) {
            const ScenarioSet set =
                generate_synthetic(f, count, {load.first, load.second}, {solar.first, solar.second}, seed, reactive_ratio);
            std::vector<Vector> rows;
            for (const auto& s : set.scenarios) rows.push_back(s.v_tilde);
            return stack(rows);
        },
        py::arg("feeder"), py::arg("count"), py::arg("load"), py::arg("solar"), py::arg("seed") = 0,
        py::arg("reactive_ratio") = 0.2, "Returns a (count, n_nodes) array of grid conditions.");

    m.def("preset_initialization", &preset_initialization, py::arg("feeder"), py::arg("mu") = 1.0);
    m.def("project_box", &project_box, py::arg("zt"), py::arg("feeder"));
    m.def(
        "train",
        [](const FeederModel& f, const Matrix& scenarios, int epochs, int batch_size, double lr,
           const std::string& optimizer, double mu, bool accelerated, std::uint64_t seed,
           std::optional<TransformedParams> init) {
            TrainConfig config;
            config.epochs = epochs;
            config.batch_size = batch_size;
            config.learning_rate = lr;
            config.optimizer = parse_optimizer(optimizer);
            config.mu = mu;
            config.accelerated = accelerated;
            config.seed = seed;
            config.init = std::move(init);
            const auto set = to_scenarios(scenarios);
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(f, set, config);
            }
            py::dict history;
            history["epoch_objective"] = r.history.epoch_objective;
            history["step_loss"] = r.history.step_loss;
            history["best_epoch"] = r.history.best_epoch;
            history["wall_seconds"] = r.history.wall_seconds;
            return py::make_tuple(r.params, history);
        },
        py::arg("feeder"), py::arg("scenarios"), py::arg("epochs") = 200, py::arg("batch_size") = 8,
        py::arg("lr") = 1e-3, py::arg("optimizer") = "adam", py::arg("mu") = 1.0, py::arg("accelerated") = true,
        py::arg("seed") = 0, py::arg("init") = py::none());

    m.def("rules_to_json", py::overload_cast<const TransformedParams&, const FeederModel&>(&rules_to_json),
          py::arg("zt"), py::arg("feeder"));
    m.def(
        "rules_from_json",
        [](const std::string& text, const FeederModel& f, double mu) { return rules_from_json(text, f).as_transformed(mu); },
        py::arg("text"), py::arg("feeder"), py::arg("mu") = 1.0,
        "Parses a rules file (either form) into transformed parameters.");

    m.def("set_thread_count", &set_thread_count, py::arg("threads"));
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            py::gil_scoped_release release;
            return run_cli(args);
        },
        py::arg("args"), "Runs the vvord command line with the given arguments; returns the exit code.");
}
