#include "poolwise/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "poolwise/rng.hpp"

namespace poolwise {

DynamicPlan make_plan(PolicyKind kind, const Instance& instance, const PlannerSettings& settings) {
    switch (kind) {
        case PolicyKind::NonPooled:
            return non_pooled_plan(instance).to_plan();
        case PolicyKind::GreedyNonOverlapping:
            return greedy_non_overlapping_plan(instance).to_plan();
        case PolicyKind::ExactNonOverlapping:
            return exact_non_overlapping_plan(instance, settings.non_overlapping_cap).to_plan();
        case PolicyKind::ExactOverlappingStatic:
            return exact_overlapping_static_plan(instance, settings.overlapping).to_plan();
        case PolicyKind::StaticLocalSearch:
            return static_local_search_plan(instance, settings.restarts, settings.seed).to_plan();
        case PolicyKind::GreedyDynamic:
            return greedy_dynamic_plan(instance, settings.inference, settings.greedy_tree_cap);
        case PolicyKind::OptimalDynamic:
            return optimal_dynamic_plan(instance, settings.optimal).plan;
    }
    throw ParameterError("make_plan: unknown policy");
}

std::optional<std::string> capacity_problem(PolicyKind kind, int n, int budget,
                                            const PlannerSettings& settings) {
    auto too_big = [&](const char* what, int value, int cap) -> std::optional<std::string> {
        if (value <= cap) return std::nullopt;
        return to_string(kind) + ": " + what + " = " + std::to_string(value) + " exceeds cap " +
               std::to_string(cap);
    };
    switch (kind) {
        case PolicyKind::ExactNonOverlapping:
            return too_big("N", n, settings.non_overlapping_cap);
        case PolicyKind::ExactOverlappingStatic:
            if (auto p = too_big("N", n, settings.overlapping.max_agents)) return p;
            return too_big("B", budget, settings.overlapping.max_budget);
        case PolicyKind::OptimalDynamic:
            if (auto p = too_big("N", n, settings.optimal.max_agents)) return p;
            return too_big("B", settings.optimal.horizon.value_or(budget), settings.optimal.max_budget);
        default:
            return std::nullopt;
    }
}

void ExperimentSpec::validate() const {
    if (n < 1) throw ParameterError("experiment: n must be >= 1");
    if (budget < 1) throw ParameterError("experiment: budget must be >= 1");
    if (pool_cap < 1) throw ParameterError("experiment: pool_cap must be >= 1");
    if (n_instances < 0) throw ParameterError("experiment: n_instances must be >= 0");
    if (utility.model == UtilityModel::DiscreteSet && utility.values.empty()) {
        throw ParameterError("experiment: discrete utility model needs values");
    }
    if (baseline && std::find(policies.begin(), policies.end(), *baseline) == policies.end()) {
        throw ParameterError("experiment: baseline " + to_string(*baseline) + " is not a listed policy");
    }
    if (eval.method == EvalMethod::MonteCarlo) eval.monte_carlo.validate();
    planner.inference.gibbs.validate();
    if (planner.restarts < 0) throw ParameterError("experiment: restarts must be >= 0");
}

namespace {

template <typename T>
T field(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("experiment: bad field \"") + key + "\": " + e.what());
    }
}

InferenceMode inference_mode_from_string(const std::string& s) {
    if (s == "auto") return InferenceMode::Auto;
    if (s == "exact") return InferenceMode::Exact;
    if (s == "gibbs") return InferenceMode::Gibbs;
    throw ParameterError("inference mode must be auto, exact or gibbs, got \"" + s + "\"");
}

const char* to_string(InferenceMode mode) {
    switch (mode) {
        case InferenceMode::Exact: return "exact";
        case InferenceMode::Gibbs: return "gibbs";
        case InferenceMode::Auto: break;
    }
    return "auto";
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

ExperimentSpec spec_from_json(const Json& j) {
    if (!j.is_object()) throw ParameterError("experiment: expected a JSON object");
    ExperimentSpec spec;
    spec.name = field<std::string>(j, "name", spec.name);
    spec.n = field<int>(j, "n", field<int>(j, "N", spec.n));
    spec.budget = field<int>(j, "budget", field<int>(j, "B", spec.budget));
    spec.pool_cap = field<int>(j, "pool_cap", field<int>(j, "G", spec.pool_cap));
    const auto model = field<std::string>(j, "utility_model", "uniform");
    if (model == "uniform") {
        spec.utility = {};
    } else if (model == "discrete") {
        spec.utility = {UtilityModel::DiscreteSet,
                        field<std::vector<double>>(j, "utility_values", {1.0, 2.0, 3.0})};
    } else {
        throw ParameterError("experiment: utility_model must be uniform or discrete");
    }
    spec.n_instances = field<int>(j, "n_instances", spec.n_instances);
    if (j.contains("policies")) {
        const auto& p = j.at("policies");
        if (p.is_string() && p.get<std::string>() == "all") {
            spec.policies.assign(all_policies().begin(), all_policies().end());
        } else {
            for (const auto& name : field<std::vector<std::string>>(j, "policies", {})) {
                spec.policies.push_back(policy_from_string(name));
            }
        }
    }
    if (j.contains("baseline") && !j.at("baseline").is_null()) {
        spec.baseline = policy_from_string(field<std::string>(j, "baseline", ""));
    }
    spec.base_seed = field<std::uint64_t>(j, "base_seed", field<std::uint64_t>(j, "seed", 0));

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        if (!e.is_object()) throw ParameterError("experiment: eval must be an object");
        const auto method = field<std::string>(e, "method", "exact");
        if (method == "exact") {
            spec.eval.method = EvalMethod::Exact;
        } else if (method == "mc" || method == "monte_carlo") {
            spec.eval.method = EvalMethod::MonteCarlo;
        } else {
            throw ParameterError("experiment: eval.method must be exact or mc");
        }
        spec.eval.exact_cap = field<int>(e, "exact_cap", spec.eval.exact_cap);
        Json mc = e;
        mc.erase("method");
        mc.erase("exact_cap");
        update_from_json(spec.eval.monte_carlo, mc);
    }

    auto& planner = spec.planner;
    planner.restarts = field<int>(j, "restarts", planner.restarts);
    planner.seed = field<std::uint64_t>(j, "planner_seed", planner.seed);
    if (j.contains("inference")) {
        const auto& inf = j.at("inference");
        if (inf.is_string()) {
            planner.inference.mode = inference_mode_from_string(inf.get<std::string>());
        } else {
            planner.inference.mode =
                inference_mode_from_string(field<std::string>(inf, "mode", "auto"));
            planner.inference.exact_cap = field<int>(inf, "exact_cap", planner.inference.exact_cap);
        }
    }
    if (j.contains("gibbs")) update_from_json(planner.inference.gibbs, j.at("gibbs"));
    spec.validate();
    return spec;
}

Json to_json(const ExperimentSpec& spec) {
    Json j;
    j["name"] = spec.name;
    j["n"] = spec.n;
    j["budget"] = spec.budget;
    j["pool_cap"] = spec.pool_cap;
    if (spec.utility.model == UtilityModel::DiscreteSet) {
        j["utility_model"] = "discrete";
        j["utility_values"] = spec.utility.values;
    } else {
        j["utility_model"] = "uniform";
    }
    j["n_instances"] = spec.n_instances;
    Json policies = Json::array();
    for (auto p : spec.policies) policies.push_back(to_string(p));
    j["policies"] = std::move(policies);
    j["baseline"] = spec.baseline ? Json(to_string(*spec.baseline)) : Json(nullptr);
    j["base_seed"] = spec.base_seed;
    const auto& mc = spec.eval.monte_carlo;
    j["eval"] = Json{{"method", to_string(spec.eval.method)},
                     {"exact_cap", spec.eval.exact_cap},
                     {"mass_threshold", mc.mass_threshold},
                     {"max_samples", mc.max_samples},
                     {"seed", mc.seed},
                     {"normalize", mc.normalize_by_covered_mass}};
    j["restarts"] = spec.planner.restarts;
    j["planner_seed"] = spec.planner.seed;
    j["inference"] = Json{{"mode", to_string(spec.planner.inference.mode)},
                          {"exact_cap", spec.planner.inference.exact_cap}};
    j["gibbs"] = to_json(spec.planner.inference.gibbs);
    return j;
}

namespace {

EvalReport evaluate_policy(PolicyKind kind, const Instance& instance, const ExperimentSpec& spec,
                           std::uint64_t instance_seed) {
    PlannerSettings planner = spec.planner;
    planner.seed = derive_seed(planner.seed, instance_seed);
    planner.inference.gibbs.seed = derive_seed(planner.inference.gibbs.seed, instance_seed);
    // every policy sees the same sample stream on a given instance
    MonteCarloConfig mc = spec.eval.monte_carlo;
    mc.seed = derive_seed(mc.seed, instance_seed);

    if (spec.eval.method == EvalMethod::MonteCarlo) {
        if (kind == PolicyKind::GreedyDynamic) {
            return evaluate_monte_carlo(instance, greedy_online_policy(instance, planner.inference), mc);
        }
        return evaluate_monte_carlo(instance, make_plan(kind, instance, planner), mc);
    }
    return evaluate_exact(instance, make_plan(kind, instance, planner), spec.eval.exact_cap);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs) {
    spec.validate();
    ExperimentResult result;
    result.name = spec.name;

    std::vector<PolicyKind> active;
    for (auto kind : spec.policies) {
        if (auto problem = capacity_problem(kind, spec.n, spec.budget, spec.planner)) {
            result.warnings.push_back("skipping " + *problem);
        } else {
            active.push_back(kind);
        }
    }
    if (active.empty() || spec.n_instances == 0) {
        result.summary = summarize({}, active, std::nullopt);
        return result;
    }

    const auto n_inst = static_cast<std::size_t>(spec.n_instances);
    std::vector<std::vector<std::optional<InstanceResult>>> slots(
        n_inst, std::vector<std::optional<InstanceResult>>(active.size()));
    std::vector<std::vector<std::string>> notes(n_inst);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_inst) return;
            try {
                const std::uint64_t seed = spec.base_seed + i;
                const auto instance =
                    generate_instance(spec.n, spec.budget, spec.pool_cap, spec.utility, seed);
                for (std::size_t k = 0; k < active.size(); ++k) {
                    try {
                        slots[i][k] = InstanceResult{static_cast<int>(i), seed, active[k],
                                                     evaluate_policy(active[k], instance, spec, seed)};
                    } catch (const CapacityError& e) {
                        notes[i].push_back("instance " + std::to_string(i) + ": skipping " +
                                           to_string(active[k]) + ": " + e.what());
                    }
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n_inst);
            }
        }
    };
    if (jobs <= 0) jobs = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    jobs = std::min<int>(jobs, static_cast<int>(n_inst));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t i = 0; i < n_inst; ++i) {
        for (auto& slot : slots[i]) {
            if (slot) result.records.push_back(std::move(*slot));
        }
        for (auto& note : notes[i]) result.warnings.push_back(std::move(note));
    }
    std::optional<PolicyKind> baseline = spec.baseline;
    if (!baseline) baseline = spec.policies.front();
    if (std::find(active.begin(), active.end(), *baseline) == active.end()) baseline.reset();
    result.summary = summarize(result.records, active, baseline);
    return result;
}

std::vector<SummaryRow> summarize(const std::vector<InstanceResult>& records,
                                  std::span<const PolicyKind> policies,
                                  std::optional<PolicyKind> baseline) {
    std::vector<double> base_welfare;
    std::vector<bool> has_base;
    if (baseline) {
        for (const auto& r : records) {
            if (r.policy != *baseline) continue;
            const auto i = static_cast<std::size_t>(r.instance);
            if (base_welfare.size() <= i) {
                base_welfare.resize(i + 1, 0.0);
                has_base.resize(i + 1, false);
            }
            base_welfare[i] = r.report.expected_welfare;
            has_base[i] = true;
        }
    }
    std::vector<SummaryRow> rows;
    for (auto kind : policies) {
        SummaryRow row;
        row.policy = kind;
        std::vector<double> values;
        for (const auto& r : records) {
            if (r.policy != kind) continue;
            const double w = r.report.expected_welfare;
            values.push_back(w);
            if (w <= 0.0) ++row.zero_welfare_count;
            const auto i = static_cast<std::size_t>(r.instance);
            if (baseline && i < has_base.size() && has_base[i]) {
                const double b = base_welfare[i];
                if (w > b + kTieTolerance * std::max(1.0, std::abs(b))) ++row.wins_vs_baseline;
            }
        }
        row.n = values.size();
        row.mean_welfare = mean_of(values);
        if (values.size() > 1) {
            double ss = 0.0;
            for (double x : values) ss += (x - row.mean_welfare) * (x - row.mean_welfare);
            const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
            row.std_error = sd / std::sqrt(static_cast<double>(values.size()));
        }
        rows.push_back(row);
    }
    return rows;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::string results_jsonl(const ExperimentResult& result) {
    std::string out;
    for (const auto& r : result.records) {
        Json j;
        j["experiment"] = result.name;
        j["instance"] = r.instance;
        j["seed"] = r.seed;
        j["policy"] = to_string(r.policy);
        j["welfare"] = r.report.expected_welfare;
        j["method"] = to_string(r.report.method);
        j["covered_mass"] = r.report.covered_mass;
        j["n_realizations"] = r.report.n_realizations;
        if (r.report.method == EvalMethod::MonteCarlo) {
            j["n_samples"] = r.report.n_samples;
            j["raw_welfare"] = r.report.raw_welfare;
            j["sample_mean"] = r.report.sample_mean;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
    std::string out = "policy,mean_welfare,std_error,n,wins_vs_baseline,zero_welfare_count\n";
    for (const auto& r : rows) {
        out += to_string(r.policy) + "," + format_double(r.mean_welfare) + "," +
               format_double(r.std_error) + "," + std::to_string(r.n) + "," +
               std::to_string(r.wins_vs_baseline) + "," + std::to_string(r.zero_welfare_count) + "\n";
    }
    return out;
}

std::vector<SweepRow> budget_sweep(const ExperimentSpec& spec, std::span<const int> budgets,
                                   int jobs, std::vector<std::string>* warnings) {
    for (int b : budgets) {
        if (b < 1) throw ParameterError("budget_sweep: budgets must be >= 1");
    }
    std::vector<SweepRow> rows;
    for (int b : budgets) {
        ExperimentSpec run = spec;
        run.budget = b;
        run.base_seed = derive_seed(spec.base_seed, static_cast<std::uint64_t>(b));
        run.name = spec.name + "-B" + std::to_string(b);
        auto result = run_experiment(run, jobs);
        for (const auto& row : result.summary) rows.push_back({b, row});
        if (warnings) {
            for (auto& w : result.warnings) warnings->push_back("B=" + std::to_string(b) + ": " + w);
        }
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "budget,policy,mean_welfare,std_error,n\n";
    for (const auto& r : rows) {
        out += std::to_string(r.budget) + "," + to_string(r.row.policy) + "," +
               format_double(r.row.mean_welfare) + "," + format_double(r.row.std_error) + "," +
               std::to_string(r.row.n) + "\n";
    }
    return out;
}

}  // namespace poolwise
