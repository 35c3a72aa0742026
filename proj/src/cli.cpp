#include "vvord/cli.hpp"

#include "vvord/analysis.hpp"
#include "vvord/dynamics.hpp"
#include "vvord/equilibrium.hpp"
#include "vvord/parallel.hpp"
#include "vvord/rules_io.hpp"
#include "vvord/scenarios.hpp"
#include "vvord/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <unistd.h>

namespace vvord {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

// Outputs are staged in memory and only written once the whole command has
// succeeded; each file is written to a temporary name and renamed into place.
class OutputSet {
public:
    void add(const std::string& path, std::string content) {
        if (!path.empty()) files_.emplace_back(path, std::move(content));
    }
    bool empty() const { return files_.empty(); }
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

    void commit() const {
        for (const auto& [path, content] : files_) write_atomic(path, content);
    }

    static void write_atomic(const fs::path& path, const std::string& content) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw ValidationError("cannot write " + path.string());
            out << content;
            if (!out) throw ValidationError("cannot write " + path.string());
        }
        fs::rename(tmp, path);
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

struct RunContext {
    std::string subcommand;
    json config = json::object();
    json inputs = json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void input(const std::string& role, const std::string& path) {
        inputs[role] = {{"path", path}, {"sha256", sha256_hex(read_file(path))}};
    }

    // Manifest for a run, written next to its first output.
    void finish(OutputSet& outputs) const {
        if (outputs.empty()) return;
        json manifest;
        manifest["subcommand"] = subcommand;
        manifest["config"] = config;
        manifest["inputs"] = inputs;
        manifest["library_version"] = version();
        json paths = json::array();
        for (const auto& f : outputs.files()) paths.push_back(f.first);
        manifest["outputs"] = paths;
        manifest["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const std::string manifest_path = outputs.files().front().first + ".manifest.json";
        outputs.add(manifest_path, manifest.dump(2) + "\n");
    }
};

json rules_json_both(const TransformedParams& zt, double mu, const FeederModel& feeder) {
    json nodes = json::array();
    for (int node : feeder.der_nodes) {
        const auto t = zt.node(node);
        json entry = {{"node", node},
                      {"transformed", {{"v_ref", t.v_ref}, {"delta_t", t.delta_t}, {"alpha_t", t.alpha_t},
                                       {"q_max", t.q_max}}}};
        if (auto z = try_from_transformed(t, mu)) {
            entry["physical"] = {{"v_ref", z->v_ref}, {"delta", z->deadband}, {"alpha", z->slope},
                                 {"q_max", z->q_max}, {"sigma", z->sigma}};
        } else {
            entry["physical"] = nullptr;
        }
        nodes.push_back(std::move(entry));
    }
    return nodes;
}

struct Globals {
    int threads = 0;
};

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
    std::string feeder;
    double eps1 = 1e-5;
    std::optional<double> mu;
    std::string out;
};

void run_analyze(const AnalyzeArgs& a) {
    RunContext ctx{"analyze"};
    const FeederModel feeder = load_feeder(a.feeder);
    ctx.input("feeder", a.feeder);
    const FeederAnalysis r = analyze_feeder(feeder, a.eps1, a.mu);
    json doc;
    doc["phase_layout"] = r.single_phase ? "single" : "multi";
    doc["n_nodes"] = feeder.n_nodes();
    doc["kappa"] = optional_json(r.kappa);
    doc["lambda_min"] = optional_json(r.lambda_min);
    doc["lambda_max"] = optional_json(r.lambda_max);
    doc["x_norm"] = r.x_norm;
    doc["q_norm"] = r.q_norm;
    doc["eps1"] = r.eps1;
    doc["mu0"] = optional_json(r.mu0);
    doc["contraction"] = optional_json(r.contraction);
    doc["T_single"] = optional_json(r.depth_single);
    doc["mu_multi"] = optional_json(r.mu_multiphase);
    doc["contraction_multi"] = optional_json(r.contraction_multiphase);
    doc["T_multi"] = optional_json(r.depth_multiphase);
    doc["mu_bound_multiphase"] = optional_json(r.mu_bound_multiphase);
    doc["pgd_iterations"] = optional_json(r.pgd_iterations);
    doc["apgd_iterations"] = optional_json(r.apgd_iterations);
    doc["stability"] = {{"inc_stable_at_mu0", r.inc_stable_at_mu0},
                        {"inc_stable_at_mu_multi", r.inc_stable_at_mu_multiphase}};
    const std::string text = doc.dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
        return;
    }
    ctx.config = {{"eps1", a.eps1}, {"mu", optional_json(a.mu)}};
    OutputSet outputs;
    outputs.add(a.out, text);
    ctx.finish(outputs);
    outputs.commit();
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string feeder, rules, scenarios;
    int index = 0;
    std::string rule = "inc";
    std::optional<double> mu;
    std::optional<int> steps;
    double tol = 1e-8;
    int max_iter = 10'000;
    std::string trace, summary;
};

void run_simulate(const SimulateArgs& a) {
    RunContext ctx{"simulate"};
    const FeederModel feeder = load_feeder(a.feeder);
    const RulesFile rules = load_rules(a.rules, feeder);
    const ScenarioSet set = load_scenarios(a.scenarios, feeder);
    ctx.input("feeder", a.feeder);
    ctx.input("rules", a.rules);
    ctx.input("scenarios", a.scenarios);
    if (a.index < 0 || static_cast<std::size_t>(a.index) >= set.size()) {
        throw ValidationError("--index out of range (file has " + std::to_string(set.size()) + " scenarios)");
    }
    const Scenario& scenario = set.scenarios[static_cast<std::size_t>(a.index)];
    const RuleKind kind = parse_rule_kind(a.rule);
    const double mu = a.mu ? *a.mu : default_step_size(feeder, kind == RuleKind::accelerated);
    const StopRule stop = a.steps ? StopRule::fixed(*a.steps, a.tol) : StopRule::tolerance(a.tol, a.max_iter);

    json summary;
    summary["rule"] = std::string(to_string(kind));
    SimulationTrace trace;
    if (kind == RuleKind::nonincremental) {
        const RuleParams z = rules.as_physical(mu);
        const auto stability = check_stability_noninc(z, feeder);
        summary["stability"] = {{"criterion", "||diag(alpha) X||_2 < 1"},
                                {"margin", stability.norm},
                                {"stable", stability.stable}};
        if (!stability.stable) {
            std::cerr << "warning: non-incremental rules are unstable (||diag(alpha) X||_2 = " << stability.norm
                      << ")\n";
        }
        trace = simulate_nonincremental(z, feeder, scenario, stop);
        summary["status"] = stability.stable ? "stable" : "unstable";
    } else {
        summary["mu"] = mu;
        const TransformedParams zt = rules.as_transformed(mu);
        const Matrix iteration = Matrix::Identity(feeder.n_nodes(), feeder.n_nodes()) - mu * feeder.x;
        const double norm = spectral_norm(iteration);
        summary["stability"] = {{"criterion", "||I - mu X||_2 < 1"}, {"margin", norm}, {"stable", norm < 1.0}};
        if (kind == RuleKind::accelerated && !feeder.single_phase()) {
            summary["stability"]["note"] = "no convergence guarantee for accelerated rules on multiphase feeders";
        }
        trace = simulate_incremental(zt, mu, kind == RuleKind::accelerated, feeder, scenario, stop);
        summary["status"] = norm < 1.0 ? "stable" : "unstable";
    }
    summary["converged"] = trace.converged;
    summary["diverged"] = trace.diverged;
    summary["iterations"] = trace.iterations_used;
    summary["residual"] = trace.final_residual;
    summary["scenario_index"] = a.index;
    summary["final_deviation"] = squared_deviation(trace.v_history.back());

    std::string csv = "t,node,q,v\n";
    for (std::size_t t = 0; t < trace.q_history.size(); ++t) {
        for (Eigen::Index i = 0; i < trace.q_history[t].size(); ++i) {
            csv += std::to_string(t) + ',' + std::to_string(i) + ',' + format_double(trace.q_history[t](i)) + ',' +
                   format_double(trace.v_history[t](i)) + '\n';
        }
    }
    ctx.config = {{"rule", a.rule}, {"mu", mu}, {"index", a.index}, {"tol", a.tol},
                  {"max_iter", a.max_iter}, {"steps", a.steps ? json(*a.steps) : json(nullptr)}};
    OutputSet outputs;
    outputs.add(a.trace, std::move(csv));
    outputs.add(a.summary, summary.dump(2) + "\n");
    if (a.summary.empty()) std::cout << summary.dump(2) << "\n";
    ctx.finish(outputs);
    outputs.commit();
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string feeder, rules, scenarios;
    std::optional<double> mu;
    std::string out_csv, out_json;
};

void run_evaluate(const EvaluateArgs& a) {
    RunContext ctx{"evaluate"};
    const FeederModel feeder = load_feeder(a.feeder);
    const RulesFile rules = load_rules(a.rules, feeder);
    const ScenarioSet set = load_scenarios(a.scenarios, feeder);
    ctx.input("feeder", a.feeder);
    ctx.input("rules", a.rules);
    ctx.input("scenarios", a.scenarios);
    const double mu = a.mu ? *a.mu : default_step_size(feeder);
    const RulesReport report = evaluate_rules(rules.as_transformed(mu), mu, feeder, set.view());

    std::string csv = "scenario,objective,baseline,worst_deviation,equilibrium_iterations\n";
    for (std::size_t s = 0; s < report.scenarios.size(); ++s) {
        const auto& r = report.scenarios[s];
        csv += std::to_string(s) + ',' + format_double(r.objective) + ',' + format_double(r.baseline) + ',' +
               format_double(r.worst_deviation) + ',' + std::to_string(r.equilibrium_iterations) + '\n';
    }
    json doc;
    doc["objective"] = report.objective;
    doc["baseline_objective"] = report.baseline;
    doc["ratio_to_baseline"] = report.baseline > 0.0 ? json(report.objective / report.baseline) : json(nullptr);
    doc["n_scenarios"] = report.scenarios.size();
    doc["mu"] = mu;
    doc["equilibrium_method"] = feeder.single_phase() ? "coordinate_descent" : "incremental_fixed_point";
    doc["inc_contraction"] = report.inc_contraction;
    doc["noninc_margin"] = optional_json(report.noninc_margin);
    doc["rules"] = rules_json_both(report.transformed, mu, feeder);
    ctx.config = {{"mu", mu}};
    OutputSet outputs;
    outputs.add(a.out_json, doc.dump(2) + "\n");
    outputs.add(a.out_csv, std::move(csv));
    if (a.out_json.empty()) std::cout << doc.dump(2) << "\n";
    ctx.finish(outputs);
    outputs.commit();
}

// ---------------------------------------------------------------- gen-scenarios

struct GenArgs {
    std::string feeder;
    int count = 80;
    double load_min = 0.0, load_max = 1.0, solar_min = 0.0, solar_max = 1.0;
    double reactive_ratio = 0.2;
    std::uint64_t seed = 0;
    std::string out;
};

void run_gen(const GenArgs& a) {
    RunContext ctx{"gen-scenarios"};
    const FeederModel feeder = load_feeder(a.feeder);
    ctx.input("feeder", a.feeder);
    const ScenarioSet set = generate_synthetic(feeder, a.count, {a.load_min, a.load_max},
                                               {a.solar_min, a.solar_max}, a.seed, a.reactive_ratio);
    ctx.config = {{"count", a.count}, {"load", {a.load_min, a.load_max}}, {"solar", {a.solar_min, a.solar_max}},
                  {"reactive_ratio", a.reactive_ratio}, {"seed", a.seed}, {"provenance", set.provenance}};
    const std::string csv = scenarios_to_csv(set);
    if (a.out.empty()) {
        std::cout << csv;
        return;
    }
    OutputSet outputs;
    outputs.add(a.out, csv);
    ctx.finish(outputs);
    outputs.commit();
}

// ---------------------------------------------------------------- design

struct DesignArgs {
    std::string feeder, scenarios, init;
    int epochs = 200;
    int batch = 8;
    double lr = 1e-3;
    std::string optimizer = "adam";
    std::optional<double> mu;
    bool accelerated = true;
    std::uint64_t seed = 0;
    double depth_tol = 1e-6;
    int depth_max = 5'000;
    std::optional<int> depth_fixed;
    std::string out, history;
};

void run_design(const DesignArgs& a) {
    RunContext ctx{"design"};
    const FeederModel feeder = load_feeder(a.feeder);
    const ScenarioSet set = load_scenarios(a.scenarios, feeder);
    ctx.input("feeder", a.feeder);
    ctx.input("scenarios", a.scenarios);

    TrainConfig config;
    config.epochs = a.epochs;
    config.batch_size = a.batch;
    config.learning_rate = a.lr;
    config.optimizer = parse_optimizer(a.optimizer);
    config.mu = a.mu ? *a.mu : 1.0;
    config.accelerated = a.accelerated;
    config.seed = a.seed;
    config.depth = a.depth_fixed ? StopRule::fixed(*a.depth_fixed) : StopRule::tolerance(a.depth_tol, a.depth_max);
    if (!a.init.empty()) {
        config.init = load_rules(a.init, feeder).as_transformed(config.mu);
        ctx.input("init", a.init);
    }
    const TrainResult result = train(feeder, set.view(), config);

    std::string history = "epoch,objective\n";
    for (std::size_t e = 0; e < result.history.epoch_objective.size(); ++e) {
        history += std::to_string(e) + ',' + format_double(result.history.epoch_objective[e]) + '\n';
    }
    ctx.config = {{"epochs", a.epochs}, {"batch", a.batch}, {"lr", a.lr}, {"optimizer", a.optimizer},
                  {"mu", config.mu}, {"accelerated", a.accelerated}, {"seed", a.seed},
                  {"depth", a.depth_fixed ? json{{"fixed", *a.depth_fixed}}
                                          : json{{"tol", a.depth_tol}, {"max", a.depth_max}}},
                  {"best_epoch", result.history.best_epoch},
                  {"best_objective", result.history.epoch_objective[static_cast<std::size_t>(result.history.best_epoch)]}};
    OutputSet outputs;
    const std::string rules = rules_to_json(result.params, feeder);
    if (a.out.empty()) std::cout << rules;
    outputs.add(a.out, rules);
    outputs.add(a.history, std::move(history));
    ctx.finish(outputs);
    outputs.commit();
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Volt/VAR rule simulation and optimal rule design"};
    app.require_subcommand(0, 1);
    bool show_version = false;
    Globals globals;
    app.add_flag("--version", show_version, "Print the library version");
    app.add_option("--threads", globals.threads, "Worker threads (0 = available parallelism)")
        ->envname("VVORD_THREADS")
        ->check(CLI::NonNegativeNumber);

    AnalyzeArgs analyze;
    auto* c_analyze = app.add_subcommand("analyze", "Spectral quantities, step sizes and depth bounds");
    c_analyze->add_option("--feeder", analyze.feeder, "Feeder JSON")->required()->check(CLI::ExistingFile);
    c_analyze->add_option("--eps1", analyze.eps1, "Voltage accuracy target for the depth bounds");
    c_analyze->add_option("--mu", analyze.mu, "Step size for the contraction-based depth bound");
    c_analyze->add_option("--out", analyze.out, "Output JSON (stdout if omitted)");

    SimulateArgs simulate;
    auto* c_sim = app.add_subcommand("simulate", "Closed-loop simulation of one scenario");
    c_sim->add_option("--feeder", simulate.feeder)->required()->check(CLI::ExistingFile);
    c_sim->add_option("--rules", simulate.rules)->required()->check(CLI::ExistingFile);
    c_sim->add_option("--scenarios", simulate.scenarios)->required()->check(CLI::ExistingFile);
    c_sim->add_option("--index", simulate.index, "Row of the scenario file to simulate");
    c_sim->add_option("--rule", simulate.rule, "noninc | inc | acc")
        ->check(CLI::IsMember({"noninc", "inc", "acc"}));
    c_sim->add_option("--mu", simulate.mu, "Step size of the incremental rules");
    c_sim->add_option("--steps", simulate.steps, "Run exactly this many updates");
    c_sim->add_option("--tol", simulate.tol, "Stop when ||q^t - q^{t-1}||_2 <= tol");
    c_sim->add_option("--max-iter", simulate.max_iter, "Update cap for the tolerance rule");
    c_sim->add_option("--trace", simulate.trace, "Trace CSV (t,node,q,v)");
    c_sim->add_option("--summary", simulate.summary, "Summary JSON (stdout if omitted)");

    EvaluateArgs evaluate;
    auto* c_eval = app.add_subcommand("evaluate", "Equilibrium objective of a rule set over scenarios");
    c_eval->add_option("--feeder", evaluate.feeder)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--rules", evaluate.rules)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--scenarios", evaluate.scenarios)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--mu", evaluate.mu, "Step size linking physical and transformed parameters");
    c_eval->add_option("--out-csv", evaluate.out_csv, "Per-scenario CSV");
    c_eval->add_option("--out-json", evaluate.out_json, "Aggregate JSON (stdout if omitted)");

    GenArgs gen;
    auto* c_gen = app.add_subcommand("gen-scenarios", "Synthetic loading scenarios");
    c_gen->add_option("--feeder", gen.feeder)->required()->check(CLI::ExistingFile);
    c_gen->add_option("--count", gen.count, "Number of scenarios")->check(CLI::PositiveNumber);
    c_gen->add_option("--load-min", gen.load_min);
    c_gen->add_option("--load-max", gen.load_max);
    c_gen->add_option("--solar-min", gen.solar_min);
    c_gen->add_option("--solar-max", gen.solar_max);
    c_gen->add_option("--reactive-ratio", gen.reactive_ratio, "Reactive load per unit of active load");
    c_gen->add_option("--seed", gen.seed);
    c_gen->add_option("--out", gen.out, "Scenario CSV (stdout if omitted)");

    DesignArgs design;
    auto* c_design = app.add_subcommand("design", "Train rule parameters through the unrolled emulator");
    c_design->add_option("--feeder", design.feeder)->required()->check(CLI::ExistingFile);
    c_design->add_option("--scenarios", design.scenarios)->required()->check(CLI::ExistingFile);
    c_design->add_option("--epochs", design.epochs)->check(CLI::PositiveNumber);
    c_design->add_option("--batch", design.batch)->check(CLI::PositiveNumber);
    c_design->add_option("--lr", design.lr)->check(CLI::NonNegativeNumber);
    c_design->add_option("--optimizer", design.optimizer, "sgd | adam")->check(CLI::IsMember({"sgd", "adam"}));
    c_design->add_option("--mu", design.mu, "Step size of the emulated rules (default 1)");
    c_design->add_option("--accelerated", design.accelerated, "Unroll the accelerated rule (true/false)");
    c_design->add_option("--seed", design.seed);
    c_design->add_option("--depth-tol", design.depth_tol, "Dynamic depth: stop when the q residual is below this");
    c_design->add_option("--depth-max", design.depth_max, "Dynamic depth: layer cap");
    c_design->add_option("--depth-fixed", design.depth_fixed, "Fixed depth (overrides the dynamic policy)");
    c_design->add_option("--init", design.init, "Initial rules JSON (default preset)")->check(CLI::ExistingFile);
    c_design->add_option("--out", design.out, "Trained rules JSON (stdout if omitted)");
    c_design->add_option("--history", design.history, "Per-epoch objective CSV");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    if (show_version) {
        std::cout << "vvord " << version() << "\n";
        return kExitOk;
    }
    set_thread_count(globals.threads);
    try {
        if (*c_analyze) {
            run_analyze(analyze);
        } else if (*c_sim) {
            run_simulate(simulate);
        } else if (*c_eval) {
            run_evaluate(evaluate);
        } else if (*c_gen) {
            run_gen(gen);
        } else if (*c_design) {
            run_design(design);
        } else {
            std::cerr << app.help();
            return kExitInvalid;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace vvord
