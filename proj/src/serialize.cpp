#include "poolwise/serialize.hpp"

#include <algorithm>
#include <fstream>

namespace poolwise {

namespace {

template <typename T>
T required(const Json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParameterError(std::string(what) + ": missing field \"" + key + "\"");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string(what) + ": bad field \"" + key + "\": " + e.what());
    }
}

PlanNodePtr node_from_json(const Json& j, int depth) {
    if (j.is_null()) return nullptr;
    if (!j.is_object()) throw ParameterError("plan node must be an object or null");
    if (depth > 64) throw StructuralError("plan nesting too deep");
    Pool pool = pool_from_json(j.contains("pool") ? j.at("pool") : Json());
    auto neg = j.contains("neg") ? node_from_json(j.at("neg"), depth + 1) : nullptr;
    auto pos = j.contains("pos") ? node_from_json(j.at("pos"), depth + 1) : nullptr;
    return make_node(std::move(pool), std::move(neg), std::move(pos));
}

Json node_to_json(const PlanNode* node) {
    if (node == nullptr) return nullptr;
    Json j;
    j["pool"] = to_json(node->pool);
    j["neg"] = node_to_json(node->on_negative.get());
    j["pos"] = node_to_json(node->on_positive.get());
    return j;
}

}  // namespace

Json to_json(const Instance& instance) {
    Json j;
    Json agents = Json::array();
    for (const auto& a : instance.agents()) {
        agents.push_back(Json{{"id", a.id}, {"u", a.utility}, {"p", a.prior}});
    }
    j["agents"] = std::move(agents);
    j["B"] = instance.budget();
    j["G"] = instance.pool_cap();
    if (!instance.meta().empty()) j["meta"] = Json::parse(instance.meta());
    return j;
}

Instance instance_from_json(const Json& j) {
    if (!j.is_object()) throw ParameterError("instance: expected a JSON object");
    if (!j.contains("agents") || !j.at("agents").is_array()) {
        throw ParameterError("instance: \"agents\" must be an array");
    }
    std::vector<Agent> agents;
    for (const auto& aj : j.at("agents")) {
        Agent a;
        a.id = required<AgentId>(aj, "id", "agent");
        a.utility = required<double>(aj, "u", "agent");
        a.prior = required<double>(aj, "p", "agent");
        agents.push_back(a);
    }
    std::sort(agents.begin(), agents.end(),
              [](const Agent& a, const Agent& b) { return a.id < b.id; });
    std::string meta;
    if (j.contains("meta") && !j.at("meta").is_null()) meta = j.at("meta").dump();
    return Instance(std::move(agents), required<int>(j, "B", "instance"),
                    required<int>(j, "G", "instance"), std::move(meta));
}

Json to_json(const Pool& pool) { return Json(pool.members()); }

Pool pool_from_json(const Json& j) {
    if (!j.is_array()) throw ParameterError("pool must be an array of agent ids");
    std::vector<AgentId> ids;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw ParameterError("pool ids must be integers");
        ids.push_back(v.get<AgentId>());
    }
    return Pool(std::move(ids));
}

Json to_json(const DynamicPlan& plan) { return node_to_json(plan.root()); }

DynamicPlan plan_from_json(const Json& j) { return DynamicPlan(node_from_json(j, 0)); }

Outcome outcome_from_string(const std::string& s) {
    if (s == "neg" || s == "negative" || s == "-") return Outcome::Negative;
    if (s == "pos" || s == "positive" || s == "+") return Outcome::Positive;
    throw ParameterError("result must be \"neg\" or \"pos\", got \"" + s + "\"");
}

Json to_json(const History& history) {
    Json j = Json::array();
    for (const auto& step : history) {
        j.push_back(Json{{"pool", to_json(step.pool)}, {"result", to_string(step.outcome)}});
    }
    return j;
}

History history_from_json(const Json& j) {
    if (!j.is_array()) throw ParameterError("history must be a JSON array");
    History history;
    for (const auto& sj : j) {
        if (!sj.is_object() || !sj.contains("pool")) {
            throw ParameterError("history step: missing field \"pool\"");
        }
        history.push_back(TestRecord{pool_from_json(sj.at("pool")),
                                     outcome_from_string(required<std::string>(sj, "result", "history step"))});
    }
    return history;
}

Json to_json(const BeliefState& belief) {
    Json j;
    j["marginals"] = belief.marginals;
    j["confirmed_healthy"] = belief.confirmed_healthy;
    j["confirmed_infected"] = belief.confirmed_infected;
    Json pools = Json::array();
    for (const auto& p : belief.residual_positive_pools) pools.push_back(to_json(p));
    j["residual_positive_pools"] = std::move(pools);
    const char* method = belief.method == InferenceMethod::Exact   ? "exact"
                         : belief.method == InferenceMethod::Gibbs ? "gibbs"
                                                                   : "structural";
    j["method"] = method;
    if (belief.gibbs) {
        const auto& g = *belief.gibbs;
        const char* stop = g.stop == GibbsStop::Converged       ? "converged"
                           : g.stop == GibbsStop::MaxIterations ? "max_iterations"
                                                                : "no_sampling";
        j["gibbs"] = Json{{"iterations", g.iterations},
                          {"samples", g.samples},
                          {"final_drift", g.final_drift},
                          {"stop", stop},
                          {"init_repaired", g.init_repaired}};
    }
    return j;
}

Json to_json(const EvalReport& report) {
    Json j;
    j["method"] = to_string(report.method);
    j["expected_welfare"] = report.expected_welfare;
    j["per_agent_confirmation"] = report.per_agent_confirmation;
    j["covered_mass"] = report.covered_mass;
    j["n_realizations"] = report.n_realizations;
    if (report.method == EvalMethod::MonteCarlo) {
        j["n_samples"] = report.n_samples;
        j["raw_welfare"] = report.raw_welfare;
        j["sample_mean"] = report.sample_mean;
        j["sample_std_error"] = report.sample_std_error;
    }
    return j;
}

Json to_json(const GibbsConfig& config) {
    return Json{{"burn_in", config.burn_in},
                {"window", config.window},
                {"tolerance", config.tolerance},
                {"max_iterations", config.max_iterations},
                {"seed", config.seed},
                {"order", config.order == SweepOrder::RandomSweep ? "sweep" : "site"}};
}

void update_from_json(GibbsConfig& config, const Json& j) {
    if (!j.is_object()) throw ParameterError("gibbs config must be an object");
    if (j.contains("burn_in")) config.burn_in = required<int>(j, "burn_in", "gibbs");
    if (j.contains("window")) config.window = required<int>(j, "window", "gibbs");
    if (j.contains("tolerance")) config.tolerance = required<double>(j, "tolerance", "gibbs");
    if (j.contains("max_iterations")) {
        config.max_iterations = required<int>(j, "max_iterations", "gibbs");
    }
    if (j.contains("seed")) config.seed = required<std::uint64_t>(j, "seed", "gibbs");
    if (j.contains("order")) {
        const auto order = required<std::string>(j, "order", "gibbs");
        if (order == "sweep") {
            config.order = SweepOrder::RandomSweep;
        } else if (order == "site") {
            config.order = SweepOrder::RandomSite;
        } else {
            throw ParameterError("gibbs: order must be \"sweep\" or \"site\"");
        }
    }
    config.validate();
}

void update_from_json(MonteCarloConfig& config, const Json& j) {
    if (!j.is_object()) throw ParameterError("monte carlo config must be an object");
    if (j.contains("mass_threshold")) {
        config.mass_threshold = required<double>(j, "mass_threshold", "eval");
    }
    if (j.contains("max_samples")) {
        config.max_samples = required<std::size_t>(j, "max_samples", "eval");
    }
    if (j.contains("seed")) config.seed = required<std::uint64_t>(j, "seed", "eval");
    if (j.contains("normalize")) config.normalize_by_covered_mass = required<bool>(j, "normalize", "eval");
    config.validate();
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParameterError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace poolwise
