#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poolwise/harness.hpp"

namespace py = pybind11;
using namespace poolwise;

// Structured values cross the boundary as JSON text; the Python package wraps
// these with json.loads / json.dumps.

namespace {

Instance parse_instance(const std::string& text) { return instance_from_json(Json::parse(text)); }

InferenceSettings inference_settings(const std::string& mode, const std::string& gibbs) {
    InferenceSettings s;
    if (mode == "exact") {
        s.mode = InferenceMode::Exact;
    } else if (mode == "gibbs") {
        s.mode = InferenceMode::Gibbs;
    } else if (mode != "auto") {
        throw ParameterError("inference must be auto, exact or gibbs");
    }
    if (!gibbs.empty()) update_from_json(s.gibbs, Json::parse(gibbs));
    return s;
}

}  // namespace

PYBIND11_MODULE(_poolwise, m) {
    m.doc() = "pooled testing planners and evaluators";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
    py::register_exception<InconsistencyError>(m, "InconsistencyError", PyExc_ValueError);
    py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
    py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);

    m.def(
        "generate_instance",
        [](int n, int budget, int pool_cap, const std::vector<double>& values, std::uint64_t seed) {
            UtilitySpec utility;
            if (!values.empty()) utility = {UtilityModel::DiscreteSet, values};
            return to_json(generate_instance(n, budget, pool_cap, utility, seed)).dump();
        },
        py::arg("n"), py::arg("budget"), py::arg("pool_cap"), py::arg("values") = std::vector<double>{},
        py::arg("seed") = 0);

    m.def(
        "plan",
        [](const std::string& policy, const std::string& instance, int restarts, std::uint64_t seed,
           const std::string& inference) {
            PlannerSettings settings;
            settings.restarts = restarts;
            settings.seed = seed;
            settings.inference = inference_settings(inference, "");
            py::gil_scoped_release release;
            return to_json(make_plan(policy_from_string(policy), parse_instance(instance), settings)).dump();
        },
        py::arg("policy"), py::arg("instance"), py::arg("restarts") = PlannerSettings{}.restarts,
        py::arg("seed") = 0, py::arg("inference") = "auto");

    m.def(
        "evaluate",
        [](const std::string& instance, const std::string& plan, const std::string& method,
           double mass_threshold, std::size_t max_samples, std::uint64_t seed) {
            const auto inst = parse_instance(instance);
            const auto p = plan_from_json(Json::parse(plan));
            p.check(inst);
            py::gil_scoped_release release;
            if (method == "exact") return to_json(evaluate_exact(inst, p)).dump();
            if (method != "mc") throw ParameterError("method must be exact or mc");
            MonteCarloConfig cfg;
            cfg.mass_threshold = mass_threshold;
            cfg.max_samples = max_samples;
            cfg.seed = seed;
            return to_json(evaluate_monte_carlo(inst, p, cfg)).dump();
        },
        py::arg("instance"), py::arg("plan"), py::arg("method") = "exact",
        py::arg("mass_threshold") = MonteCarloConfig{}.mass_threshold,
        py::arg("max_samples") = MonteCarloConfig{}.max_samples, py::arg("seed") = 0);

    m.def(
        "posterior",
        [](const std::string& instance, const std::string& history, const std::string& inference,
           const std::string& gibbs) {
            const auto inst = parse_instance(instance);
            const auto h = history_from_json(Json::parse(history));
            const auto settings = inference_settings(inference, gibbs);
            py::gil_scoped_release release;
            return to_json(infer(inst, h, settings)).dump();
        },
        py::arg("instance"), py::arg("history") = "[]", py::arg("inference") = "auto",
        py::arg("gibbs") = "");

    m.def(
        "greedy_step",
        [](const std::string& instance, const std::string& history, const std::string& inference) {
            const auto inst = parse_instance(instance);
            const auto h = history_from_json(Json::parse(history));
            const auto step = greedy_dynamic_step(inst, h, inference_settings(inference, ""));
            if (!step) return Json{{"pool", nullptr}, {"value", 0.0}}.dump();
            return Json{{"pool", to_json(step->pool)}, {"value", step->value}}.dump();
        },
        py::arg("instance"), py::arg("history") = "[]", py::arg("inference") = "auto");

    m.def(
        "best_single_test",
        [](const std::vector<double>& utilities, const std::vector<double>& marginals, int pool_cap) {
            if (utilities.size() != marginals.size()) {
                throw ParameterError("utilities and marginals differ in length");
            }
            std::vector<Candidate> c;
            for (std::size_t i = 0; i < utilities.size(); ++i) {
                c.push_back({static_cast<AgentId>(i), utilities[i], marginals[i]});
            }
            const auto t = best_single_test(c, pool_cap);
            return py::make_tuple(t.pool.members(), t.value);
        },
        py::arg("utilities"), py::arg("marginals"), py::arg("pool_cap"));

    m.def(
        "run_experiment",
        [](const std::string& spec, int jobs) {
            const auto s = spec_from_json(Json::parse(spec));
            ExperimentResult result;
            {
                py::gil_scoped_release release;
                result = run_experiment(s, jobs);
            }
            return py::make_tuple(results_jsonl(result), summary_csv(result.summary), result.warnings);
        },
        py::arg("spec"), py::arg("jobs") = 1);

    m.def(
        "budget_sweep",
        [](const std::string& spec, const std::vector<int>& budgets, int jobs) {
            const auto s = spec_from_json(Json::parse(spec));
            py::gil_scoped_release release;
            return sweep_csv(budget_sweep(s, budgets, jobs));
        },
        py::arg("spec"), py::arg("budgets"), py::arg("jobs") = 1);

    m.def("policies", [] {
        std::vector<std::string> names;
        for (auto p : all_policies()) names.push_back(to_string(p));
        return names;
    });
}
