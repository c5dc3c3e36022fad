#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poolwise/harness.hpp"
#include "poolwise/session.hpp"

using namespace poolwise;
namespace fs = std::filesystem;

namespace {

struct GibbsFlags {
    std::optional<int> burn_in;
    std::optional<int> window;
    std::optional<double> tolerance;
    std::optional<int> max_iterations;

    void add_to(CLI::App& app) {
        app.add_option("--gibbs-burn-in", burn_in, "Gibbs burn-in sweeps");
        app.add_option("--gibbs-window", window, "Gibbs convergence window");
        app.add_option("--gibbs-tol", tolerance, "Gibbs convergence tolerance");
        app.add_option("--gibbs-max-iters", max_iterations, "Gibbs iteration cap");
    }
    void apply(GibbsConfig& cfg) const {
        if (burn_in) cfg.burn_in = *burn_in;
        if (window) cfg.window = *window;
        if (tolerance) cfg.tolerance = *tolerance;
        if (max_iterations) cfg.max_iterations = *max_iterations;
        cfg.validate();
    }
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

void emit_json(const std::string& path, const Json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json_file(path, j);
    }
}

InferenceMode parse_mode(const std::string& s) {
    if (s == "auto") return InferenceMode::Auto;
    if (s == "exact") return InferenceMode::Exact;
    if (s == "gibbs") return InferenceMode::Gibbs;
    throw ParameterError("--inference must be auto, exact or gibbs");
}

std::vector<std::string> split_policies(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poolwise: pooled testing planners, evaluators and live session server"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    GibbsFlags gibbs_flags;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--jobs", jobs, "Worker threads for bench and sweep")->check(CLI::Range(1, 256));
    gibbs_flags.add_to(app);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a random instance");
    int gen_n = 3, gen_b = 2, gen_g = 3;
    std::string gen_utility = "uniform", gen_out;
    std::vector<double> gen_values{1, 2, 3};
    gen->add_option("-n,--agents", gen_n, "Number of agents")->check(CLI::PositiveNumber);
    gen->add_option("-B,--budget", gen_b, "Testing budget")->check(CLI::PositiveNumber);
    gen->add_option("-G,--pool-cap", gen_g, "Maximum pool size")->check(CLI::PositiveNumber);
    gen->add_option("--utility", gen_utility, "uniform or discrete")
        ->check(CLI::IsMember({"uniform", "discrete"}));
    gen->add_option("--values", gen_values, "Utility values for the discrete model");
    gen->add_option("-o,--out", gen_out, "Output file (default stdout)");

    // plan
    auto* plan = app.add_subcommand("plan", "Build a plan for an instance");
    std::string plan_policy, plan_instance, plan_out, plan_inference = "auto";
    int plan_restarts = PlannerSettings{}.restarts;
    plan->add_option("--policy", plan_policy, "Policy kind")->required();
    plan->add_option("--instance", plan_instance, "Instance file")->required()->check(CLI::ExistingFile);
    plan->add_option("-o,--out", plan_out, "Plan file (default stdout)");
    plan->add_option("--restarts", plan_restarts, "Local search restarts")->check(CLI::NonNegativeNumber);
    plan->add_option("--inference", plan_inference, "auto, exact or gibbs")
        ->check(CLI::IsMember({"auto", "exact", "gibbs"}));

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a plan on an instance");
    std::string eval_instance, eval_plan, eval_method = "exact", eval_out;
    MonteCarloConfig eval_mc;
    eval->add_option("--instance", eval_instance, "Instance file")->required()->check(CLI::ExistingFile);
    eval->add_option("--plan", eval_plan, "Plan file")->required()->check(CLI::ExistingFile);
    eval->add_option("--method", eval_method, "exact or mc")->check(CLI::IsMember({"exact", "mc"}));
    eval->add_option("--mass-threshold", eval_mc.mass_threshold, "Monte Carlo covered-mass target");
    eval->add_option("--max-samples", eval_mc.max_samples, "Monte Carlo sample cap");
    eval->add_option("-o,--out", eval_out, "Report file (default stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "Run an experiment from a config file");
    std::string bench_dir = ".", bench_policies;
    std::optional<int> bench_instances;
    bench->add_option("--out-dir", bench_dir, "Directory for results.jsonl and summary.csv");
    bench->add_option("--instances", bench_instances, "Override n_instances")->check(CLI::NonNegativeNumber);
    bench->add_option("--policies", bench_policies, "Comma-separated policy override");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Budget sweep from a config file");
    std::string sweep_dir = ".";
    std::vector<int> sweep_budgets{2, 3, 4};
    sweep->add_option("--out-dir", sweep_dir, "Directory for sweep.csv");
    sweep->add_option("--budgets", sweep_budgets, "Budgets to run")->delimiter(',');
    sweep->add_option("--instances", bench_instances, "Override n_instances")->check(CLI::NonNegativeNumber);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the live session HTTP server");
    ServeOptions serve_opts;
    std::string static_dir, journal;
    serve_cmd->add_option("--host", serve_opts.host, "Bind address");
    serve_cmd->add_option("--port", serve_opts.port, "Port")->check(CLI::Range(1, 65535));
    serve_cmd->add_option("--static-dir", static_dir, "Console assets to serve at /");
    serve_cmd->add_option("--journal", journal, "Append-only session journal");

    CLI11_PARSE(app, argc, argv);

    try {
        Json config = Json::object();
        if (!config_path.empty()) config = read_json_file(config_path);

        auto experiment = [&] {
            auto spec = spec_from_json(config);
            if (seed) spec.base_seed = *seed;
            if (bench_instances) spec.n_instances = *bench_instances;
            if (!bench_policies.empty()) {
                spec.policies.clear();
                for (const auto& p : split_policies(bench_policies)) spec.policies.push_back(policy_from_string(p));
                if (spec.baseline && std::find(spec.policies.begin(), spec.policies.end(), *spec.baseline) ==
                                         spec.policies.end()) {
                    spec.baseline.reset();
                }
            }
            gibbs_flags.apply(spec.planner.inference.gibbs);
            spec.validate();
            if (spec.policies.empty()) std::cerr << "warning: no policies configured\n";
            return spec;
        };
        auto planner_settings = [&] {
            // planner knobs may come from an experiment config
            PlannerSettings settings = spec_from_json(config).planner;
            if (seed) settings.seed = *seed;
            gibbs_flags.apply(settings.inference.gibbs);
            return settings;
        };

        if (gen->parsed()) {
            UtilitySpec utility;
            if (gen_utility == "discrete") utility = {UtilityModel::DiscreteSet, gen_values};
            const auto inst = generate_instance(gen_n, gen_b, gen_g, utility, seed.value_or(0));
            emit_json(gen_out, to_json(inst));
        } else if (plan->parsed()) {
            const auto inst = instance_from_json(read_json_file(plan_instance));
            auto settings = planner_settings();
            settings.restarts = plan_restarts;
            settings.inference.mode = parse_mode(plan_inference);
            const auto result = make_plan(policy_from_string(plan_policy), inst, settings);
            emit_json(plan_out, to_json(result));
        } else if (eval->parsed()) {
            const auto inst = instance_from_json(read_json_file(eval_instance));
            const auto p = plan_from_json(read_json_file(eval_plan));
            p.check(inst);
            EvalReport report;
            if (eval_method == "exact") {
                report = evaluate_exact(inst, p);
            } else {
                eval_mc.seed = seed.value_or(0);
                report = evaluate_monte_carlo(inst, p, eval_mc);
            }
            emit_json(eval_out, to_json(report));
        } else if (bench->parsed()) {
            const auto spec = experiment();
            const auto result = run_experiment(spec, jobs);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
            fs::create_directories(bench_dir);
            write_text((fs::path(bench_dir) / "results.jsonl").string(), results_jsonl(result));
            write_text((fs::path(bench_dir) / "summary.csv").string(), summary_csv(result.summary));
            std::cout << summary_csv(result.summary);
        } else if (sweep->parsed()) {
            const auto spec = experiment();
            std::vector<std::string> warnings;
            const auto rows = budget_sweep(spec, sweep_budgets, jobs, &warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
            fs::create_directories(sweep_dir);
            write_text((fs::path(sweep_dir) / "sweep.csv").string(), sweep_csv(rows));
            std::cout << sweep_csv(rows);
        } else if (serve_cmd->parsed()) {
            InferenceSettings inference;
            gibbs_flags.apply(inference.gibbs);
            std::optional<fs::path> journal_path;
            if (!journal.empty()) journal_path = journal;
            if (!static_dir.empty()) serve_opts.static_dir = static_dir;
            SessionStore store(inference, journal_path);
            std::cerr << "listening on http://" << serve_opts.host << ":" << serve_opts.port << '\n';
            serve(store, serve_opts);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
