#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "poolwise/core.hpp"

namespace poolwise {

enum class EvalMethod : std::uint8_t { Exact, MonteCarlo };

const char* to_string(EvalMethod method);

struct EvalReport {
    EvalMethod method = EvalMethod::Exact;
    double expected_welfare = 0.0;
    std::vector<double> per_agent_confirmation;  // P(agent in >= 1 negative pool)
    double covered_mass = 1.0;
    std::size_t n_realizations = 0;  // distinct health vectors weighed
    // Monte Carlo only.
    std::size_t n_samples = 0;
    double raw_welfare = 0.0;        // mass-weighted sum, not renormalized
    double sample_mean = 0.0;        // plain average over all draws
    double sample_std_error = 0.0;
};

inline constexpr int kDefaultExactEvalCap = 20;

// Sums realized welfare times realization probability over every joint health
// state of the agents the plan can test; agents the plan never touches
// marginalize out, so the enumeration is 2^(touched agents). Throws
// CapacityError when more than `max_agents` agents are touched.
EvalReport evaluate_exact(const Instance& instance, const DynamicPlan& plan,
                          int max_agents = kDefaultExactEvalCap);

struct MonteCarloConfig {
    double mass_threshold = 0.95;
    std::size_t max_samples = 100000;
    std::uint64_t seed = 0;
    bool normalize_by_covered_mass = true;

    void validate() const;
};

// Deterministic policy: next pool given the history so far, nullopt to stop.
using PolicyFn = std::function<std::optional<Pool>(const History&)>;

// Draws health vectors from the priors and weighs each distinct realization
// once by its exact probability. Stops at mass_threshold covered mass or
// max_samples draws.
EvalReport evaluate_monte_carlo(const Instance& instance, const DynamicPlan& plan,
                                const MonteCarloConfig& config);

// Same, for an online policy. The policy is called at most once per distinct
// history (results are memoized in a lazily built tree) and must therefore be
// a pure function of the history.
EvalReport evaluate_monte_carlo(const Instance& instance, const PolicyFn& policy,
                                const MonteCarloConfig& config);

}  // namespace poolwise
