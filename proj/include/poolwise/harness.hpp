#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolwise/evaluation.hpp"
#include "poolwise/inference.hpp"
#include "poolwise/planning.hpp"
#include "poolwise/serialize.hpp"

namespace poolwise {

// Everything a planner needs besides the instance.
struct PlannerSettings {
    InferenceSettings inference;
    int restarts = 8;                       // static local search
    std::uint64_t seed = 0;                 // local search perturbations
    OptimalConfig optimal;
    OverlappingConfig overlapping;
    int non_overlapping_cap = kDefaultNonOverlappingCap;
    int greedy_tree_cap = kDefaultGreedyTreeCap;
};

// Runs one planner. Throws CapacityError when the instance exceeds its cap.
DynamicPlan make_plan(PolicyKind kind, const Instance& instance, const PlannerSettings& settings);

// Whether the planner's size caps admit an (N, B) instance.
std::optional<std::string> capacity_problem(PolicyKind kind, int n, int budget,
                                            const PlannerSettings& settings);

struct EvalSettings {
    EvalMethod method = EvalMethod::Exact;
    MonteCarloConfig monte_carlo;
    int exact_cap = kDefaultExactEvalCap;
};

struct ExperimentSpec {
    std::string name = "experiment";
    int n = 3;
    int budget = 2;
    int pool_cap = 3;
    UtilitySpec utility;
    int n_instances = 200;
    std::vector<PolicyKind> policies;
    // wins_vs_baseline compares against this policy; defaults to the first
    // listed policy
    std::optional<PolicyKind> baseline;
    EvalSettings eval;
    PlannerSettings planner;
    std::uint64_t base_seed = 0;

    void validate() const;
};

ExperimentSpec spec_from_json(const Json& j);
Json to_json(const ExperimentSpec& spec);

struct InstanceResult {
    int instance = 0;
    std::uint64_t seed = 0;
    PolicyKind policy = PolicyKind::NonPooled;
    EvalReport report;
};

struct SummaryRow {
    PolicyKind policy = PolicyKind::NonPooled;
    double mean_welfare = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
    std::size_t wins_vs_baseline = 0;
    std::size_t zero_welfare_count = 0;
};

struct ExperimentResult {
    std::string name;
    std::vector<InstanceResult> records;  // by instance, then policy order
    std::vector<SummaryRow> summary;
    std::vector<std::string> warnings;
};

// Instance i is generated with seed base_seed + i. Instances are spread over
// `jobs` worker threads; output does not depend on jobs.
ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs = 1);

// Mean welfare per policy with sample standard error, in spec policy order.
std::vector<SummaryRow> summarize(const std::vector<InstanceResult>& records,
                                  std::span<const PolicyKind> policies,
                                  std::optional<PolicyKind> baseline);

std::string results_jsonl(const ExperimentResult& result);
std::string summary_csv(std::span<const SummaryRow> rows);

struct SweepRow {
    int budget = 0;
    SummaryRow row;
};

// One experiment per budget; budget b uses base seed derive_seed(base_seed, b).
std::vector<SweepRow> budget_sweep(const ExperimentSpec& spec, std::span<const int> budgets,
                                   int jobs = 1, std::vector<std::string>* warnings = nullptr);

std::string sweep_csv(std::span<const SweepRow> rows);

// Fixed-format double for CSV output.
std::string format_double(double value);

}  // namespace poolwise
