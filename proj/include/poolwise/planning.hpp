#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolwise/core.hpp"
#include "poolwise/inference.hpp"

namespace poolwise {

enum class PolicyKind : std::uint8_t {
    NonPooled,
    GreedyNonOverlapping,
    ExactNonOverlapping,
    ExactOverlappingStatic,
    StaticLocalSearch,
    GreedyDynamic,
    OptimalDynamic,
};

std::string to_string(PolicyKind kind);
PolicyKind policy_from_string(const std::string& name);
std::span<const PolicyKind> all_policies();

// Relative tolerance under which two objective values count as tied.
inline constexpr double kTieTolerance = 1e-12;

// Ordering used by every planner: higher value, then smaller pool, then the
// lexicographically smaller member list.
bool preferred(double value_a, const Pool& a, double value_b, const Pool& b);

struct Candidate {
    AgentId id = 0;
    double utility = 0.0;
    double marginal = 1.0;  // healthy probability
};

struct SingleTest {
    Pool pool;
    double value = 0.0;  // (prod marginal) * (sum utility)
};

// Exact single-pool maximizer of (prod q)(sum u) over pools of size <= pool_cap,
// by depth-first enumeration with a product/sum bound. Throws ParameterError on
// an empty candidate list.
SingleTest best_single_test(std::span<const Candidate> candidates, int pool_cap);

// Candidates for the next greedy test: agents not yet confirmed healthy by a
// negative pool and with positive healthy marginal.
std::vector<Candidate> greedy_candidates(const Instance& instance, const BeliefState& belief);

// One step of the online greedy policy. nullopt when no candidate remains.
// Throws StateError when the history already used the whole budget.
std::optional<SingleTest> greedy_dynamic_step(const Instance& instance, const History& history,
                                              const InferenceSettings& inference);

inline constexpr int kDefaultGreedyTreeCap = 12;

// Full greedy tree, one node per reachable history. Outcomes with zero
// probability get no subtree.
DynamicPlan greedy_dynamic_plan(const Instance& instance, const InferenceSettings& inference,
                                int max_budget = kDefaultGreedyTreeCap);

using Policy = std::function<std::optional<Pool>(const History&)>;

// Online greedy policy as a callable; evaluation code memoizes per history.
Policy greedy_online_policy(const Instance& instance, const InferenceSettings& inference);

struct OptimalConfig {
    int max_agents = 7;
    int max_budget = 4;
    // Number of tests to plan; defaults to the instance budget.
    std::optional<int> horizon;
};

struct PlanWithValue {
    DynamicPlan plan;
    double expected_welfare = 0.0;
};

// Expectimax over all pools at every node with exact posteriors.
PlanWithValue optimal_dynamic_plan(const Instance& instance, const OptimalConfig& config = {});

struct StaticPlan {
    std::vector<Pool> pools;
    double expected_welfare = 0.0;

    DynamicPlan to_plan() const { return DynamicPlan::from_static(pools); }
};

// Closed-form welfare of disjoint pools: sum over pools of (prod p)(sum u).
double disjoint_static_welfare(const Instance& instance, std::span<const Pool> pools);

// Top-B agents by u*p tested individually.
StaticPlan non_pooled_plan(const Instance& instance);

StaticPlan greedy_non_overlapping_plan(const Instance& instance);

inline constexpr int kDefaultNonOverlappingCap = 12;

// Exact best collection of <= B disjoint pools, memoized over agent subsets.
StaticPlan exact_non_overlapping_plan(const Instance& instance,
                                      int max_agents = kDefaultNonOverlappingCap);

struct OverlappingConfig {
    int max_agents = 5;
    int max_budget = 3;
};

// Exact best static plan when pools may overlap; ordered tuples are
// canonicalized to non-decreasing pool order and scored by exact evaluation.
StaticPlan exact_overlapping_static_plan(const Instance& instance,
                                         const OverlappingConfig& config = {});

// Hill climbing over disjoint plans from the greedy non-overlapping start, best
// of `restarts` runs (the first from the greedy plan, the rest from seeded
// perturbations of it). restarts == 0 returns the greedy plan unchanged.
StaticPlan static_local_search_plan(const Instance& instance, int restarts, std::uint64_t seed);

}  // namespace poolwise
