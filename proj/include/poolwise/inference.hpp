#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "poolwise/core.hpp"

namespace poolwise {

enum class InferenceMethod : std::uint8_t { Structural, Exact, Gibbs };

enum class GibbsStop : std::uint8_t { NoSampling, Converged, MaxIterations };

enum class SweepOrder : std::uint8_t {
    RandomSweep,  // every iteration visits all agents in a fresh random order
    RandomSite,   // every iteration updates one uniformly chosen agent
};

struct GibbsConfig {
    int burn_in = 1000;
    int window = 500;
    double tolerance = 2.5e-4;
    int max_iterations = 100000;
    std::uint64_t seed = 0;
    SweepOrder order = SweepOrder::RandomSweep;
    // Re-check after every update that each residual positive pool still holds
    // an infected member; throws InconsistencyError otherwise. Test builds only.
    bool check_states = false;

    void validate() const;
};

struct GibbsStats {
    int iterations = 0;       // total iterations run, burn-in included
    int samples = 0;          // post-burn-in iterations accumulated
    double final_drift = 0.0; // last spread of the running means over the window
    GibbsStop stop = GibbsStop::NoSampling;
    bool init_repaired = false;
};

// Posterior summary after a history.
//
// confirmed_healthy holds agents that appeared in a negative pool, which is also
// the set whose utility counts toward welfare. Agents with prior exactly 1 are
// certain-healthy (marginal 1) but stay out of confirmed_healthy until a negative
// pool includes them. Agents with prior exactly 0 are listed as confirmed infected.
//
// residual_positive_pools contains only unresolved agents (0 < prior < 1, not
// confirmed); pools already explained by a confirmed-infected member are dropped,
// and every surviving pool has at least two members.
struct BeliefState {
    std::vector<double> marginals;
    std::vector<AgentId> confirmed_healthy;
    std::vector<AgentId> confirmed_infected;
    std::vector<Pool> residual_positive_pools;
    InferenceMethod method = InferenceMethod::Structural;
    std::optional<GibbsStats> gibbs;

    bool is_confirmed_healthy(AgentId id) const;
    bool is_confirmed_infected(AgentId id) const;
    // Agents that appear in at least one residual positive pool, ascending.
    std::vector<AgentId> coupled_agents() const;
};

// Deterministic preprocessing: negative pools confirm members; confirmed and
// prior-certain healthy agents leave positive pools; singleton residual pools
// force infection, propagated to a fixed point. Marginals hold priors with
// resolved agents set to 0/1. Throws InconsistencyError for impossible histories.
BeliefState apply_history(const Instance& instance, const History& history);

// Whether `outcome` has nonzero probability for `pool` after `history`.
bool outcome_possible(const Instance& instance, const History& history, const Pool& pool,
                      Outcome outcome);

inline constexpr int kDefaultExactCap = 20;

// Exact marginals by enumerating the joint states of coupled agents. Each
// connected component of the residual pools is enumerated separately; the cap
// applies to the total number of coupled agents. Throws CapacityError above it.
BeliefState exact_posterior(const Instance& instance, const History& history,
                            int max_coupled_agents = kDefaultExactCap);

BeliefState gibbs_posterior(const Instance& instance, const History& history,
                            const GibbsConfig& config);

enum class InferenceMode : std::uint8_t { Exact, Gibbs, Auto };

struct InferenceSettings {
    InferenceMode mode = InferenceMode::Auto;
    GibbsConfig gibbs{};
    int exact_cap = kDefaultExactCap;
};

// Dispatches on settings.mode; Auto runs exact inference when the coupled set is
// within exact_cap and Gibbs otherwise. The Gibbs seed is mixed with a hash of
// the history so that the same (instance, history, settings) always yields the
// same beliefs.
BeliefState infer(const Instance& instance, const History& history,
                  const InferenceSettings& settings);

std::uint64_t history_hash(const History& history);

}  // namespace poolwise
