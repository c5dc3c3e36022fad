#include "poolwise/planning.hpp"

namespace poolwise {

std::vector<Candidate> greedy_candidates(const Instance& instance, const BeliefState& belief) {
    std::vector<Candidate> out;
    for (const auto& a : instance.agents()) {
        if (belief.is_confirmed_healthy(a.id)) continue;
        const double q = belief.marginals[static_cast<std::size_t>(a.id)];
        if (q <= 0.0) continue;
        out.push_back(Candidate{a.id, a.utility, q});
    }
    return out;
}

std::optional<SingleTest> greedy_dynamic_step(const Instance& instance, const History& history,
                                              const InferenceSettings& inference) {
    if (static_cast<int>(history.size()) >= instance.budget()) {
        throw StateError("testing budget of " + std::to_string(instance.budget()) +
                         " is exhausted");
    }
    const BeliefState belief = infer(instance, history, inference);
    const auto candidates = greedy_candidates(instance, belief);
    if (candidates.empty()) return std::nullopt;
    return best_single_test(candidates, instance.pool_cap());
}

namespace {

PlanNodePtr build_greedy(const Instance& instance, History& history,
                         const InferenceSettings& inference) {
    const auto step = greedy_dynamic_step(instance, history, inference);
    if (!step) return nullptr;
    PlanNodePtr children[2];
    if (static_cast<int>(history.size()) + 1 < instance.budget()) {
        for (Outcome outcome : {Outcome::Negative, Outcome::Positive}) {
            if (!outcome_possible(instance, history, step->pool, outcome)) continue;
            history.push_back(TestRecord{step->pool, outcome});
            children[outcome == Outcome::Negative ? 0 : 1] = build_greedy(instance, history, inference);
            history.pop_back();
        }
    }
    return make_node(step->pool, std::move(children[0]), std::move(children[1]));
}

}  // namespace

DynamicPlan greedy_dynamic_plan(const Instance& instance, const InferenceSettings& inference,
                                int max_budget) {
    if (instance.budget() > max_budget) {
        throw CapacityError("greedy_dynamic_plan: budget " + std::to_string(instance.budget()) +
                            " exceeds the tree cap of " + std::to_string(max_budget) +
                            "; use the online policy");
    }
    History history;
    return DynamicPlan(build_greedy(instance, history, inference));
}

Policy greedy_online_policy(const Instance& instance, const InferenceSettings& inference) {
    return [instance, inference](const History& history) -> std::optional<Pool> {
        if (static_cast<int>(history.size()) >= instance.budget()) return std::nullopt;
        auto step = greedy_dynamic_step(instance, history, inference);
        if (!step) return std::nullopt;
        return std::move(step->pool);
    };
}

}  // namespace poolwise
