#pragma once

// Brute-force reference computations used only by tests. Nothing here calls
// into the inference, planning or evaluation code it is used to check.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "poolwise/core.hpp"
#include "poolwise/rng.hpp"

namespace poolwise::oracle {

inline Instance example1() {
    return Instance({{0, 0.129, 0.5562}, {1, 0.17483, 1.0}, {2, 0.569, 0.12}}, 2, 3);
}

inline Instance example2() {
    return Instance({{0, 1.0, 0.5}, {1, 1.0, 0.5}, {2, 1.0, 1.0}}, 2, 3);
}

inline double mass(const Instance& inst, std::uint64_t healthy_bits) {
    double m = 1.0;
    for (int i = 0; i < inst.size(); ++i) {
        const double p = inst.prior(i);
        m *= ((healthy_bits >> i) & 1U) ? p : 1.0 - p;
    }
    return m;
}

inline bool all_healthy(const Pool& pool, std::uint64_t bits) {
    return std::all_of(pool.begin(), pool.end(), [&](AgentId id) { return (bits >> id) & 1U; });
}

inline bool consistent(const History& history, std::uint64_t bits) {
    for (const auto& step : history) {
        const bool neg = all_healthy(step.pool, bits);
        if (neg != (step.outcome == Outcome::Negative)) return false;
    }
    return true;
}

// Posterior healthy marginals by enumerating all 2^N joint states.
inline std::vector<double> posterior(const Instance& inst, const History& history) {
    const int n = inst.size();
    std::vector<double> healthy(static_cast<std::size_t>(n), 0.0);
    double total = 0.0;
    for (std::uint64_t h = 0; h < (std::uint64_t{1} << n); ++h) {
        if (!consistent(history, h)) continue;
        const double m = mass(inst, h);
        total += m;
        for (int i = 0; i < n; ++i) {
            if ((h >> i) & 1U) healthy[static_cast<std::size_t>(i)] += m;
        }
    }
    for (auto& v : healthy) v /= total;
    return healthy;
}

// Expected welfare of a plan by walking it under every one of the 2^N states.
inline double plan_welfare(const Instance& inst, const DynamicPlan& plan) {
    double total = 0.0;
    for (std::uint64_t h = 0; h < (std::uint64_t{1} << inst.size()); ++h) {
        std::vector<bool> confirmed(static_cast<std::size_t>(inst.size()), false);
        for (const PlanNode* node = plan.root(); node != nullptr;) {
            if (all_healthy(node->pool, h)) {
                for (AgentId id : node->pool) confirmed[static_cast<std::size_t>(id)] = true;
                node = node->on_negative.get();
            } else {
                node = node->on_positive.get();
            }
        }
        double w = 0.0;
        for (int i = 0; i < inst.size(); ++i) {
            if (confirmed[static_cast<std::size_t>(i)]) w += inst.utility(i);
        }
        total += mass(inst, h) * w;
    }
    return total;
}

struct SubsetChoice {
    std::vector<AgentId> ids;
    double value = -1.0;
};

// Exhaustive best single pool over all subsets of size <= cap, with the tie
// order higher value, smaller size, lexicographic ids.
inline SubsetChoice best_subset(const std::vector<AgentId>& ids, const std::vector<double>& u,
                                const std::vector<double>& q, int cap) {
    SubsetChoice best;
    const std::size_t k = ids.size();
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << k); ++m) {
        if (std::popcount(m) > cap) continue;
        double prod = 1.0, sum = 0.0;
        std::vector<AgentId> members;
        for (std::size_t i = 0; i < k; ++i) {
            if ((m >> i) & 1U) {
                prod *= q[i];
                sum += u[i];
                members.push_back(ids[i]);
            }
        }
        std::sort(members.begin(), members.end());
        const double v = prod * sum;
        const double tol = 1e-12 * std::max({1.0, std::abs(v), std::abs(best.value)});
        bool take = best.value < 0.0 || v > best.value + tol;
        if (!take && std::abs(v - best.value) <= tol) {
            take = members.size() != best.ids.size() ? members.size() < best.ids.size()
                                                     : members < best.ids;
        }
        if (take) best = SubsetChoice{members, v};
    }
    return best;
}

// Best disjoint collection of <= B pools of size <= G by assigning each agent
// to an existing pool, a new pool, or no pool.
inline double best_partition(const Instance& inst) {
    const int n = inst.size();
    std::vector<std::vector<AgentId>> pools;
    double best = 0.0;
    std::function<void(int)> rec = [&](int i) {
        if (i == n) {
            double total = 0.0;
            for (const auto& pool : pools) {
                double prod = 1.0, sum = 0.0;
                for (AgentId id : pool) {
                    prod *= inst.prior(id);
                    sum += inst.utility(id);
                }
                total += prod * sum;
            }
            best = std::max(best, total);
            return;
        }
        rec(i + 1);
        for (auto& pool : pools) {
            if (static_cast<int>(pool.size()) < inst.pool_cap()) {
                pool.push_back(i);
                rec(i + 1);
                pool.pop_back();
            }
        }
        if (static_cast<int>(pools.size()) < inst.budget()) {
            pools.push_back({i});
            rec(i + 1);
            pools.pop_back();
        }
    };
    rec(0);
    return best;
}

// Expectimax over histories, posteriors by full joint enumeration. No memo;
// only for tiny instances.
inline double optimal_value(const Instance& inst, History& history, std::vector<bool>& counted,
                            int remaining) {
    if (remaining == 0) return 0.0;
    const int n = inst.size();
    double z = 0.0;
    for (std::uint64_t h = 0; h < (std::uint64_t{1} << n); ++h) {
        if (consistent(history, h)) z += mass(inst, h);
    }
    double best = 0.0;
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << n); ++m) {
        if (std::popcount(m) > inst.pool_cap()) continue;
        std::vector<AgentId> ids;
        for (int i = 0; i < n; ++i) {
            if ((m >> i) & 1U) ids.push_back(i);
        }
        const Pool pool(ids);
        double p_neg = 0.0;
        for (std::uint64_t h = 0; h < (std::uint64_t{1} << n); ++h) {
            if (consistent(history, h) && all_healthy(pool, h)) p_neg += mass(inst, h);
        }
        p_neg /= z;
        double value = 0.0;
        if (p_neg > 0.0) {
            double gain = 0.0;
            auto saved = counted;
            for (AgentId id : ids) {
                if (!counted[static_cast<std::size_t>(id)]) gain += inst.utility(id);
                counted[static_cast<std::size_t>(id)] = true;
            }
            history.push_back({pool, Outcome::Negative});
            value += p_neg * (gain + optimal_value(inst, history, counted, remaining - 1));
            history.pop_back();
            counted = saved;
        }
        if (p_neg < 1.0) {
            history.push_back({pool, Outcome::Positive});
            value += (1.0 - p_neg) * optimal_value(inst, history, counted, remaining - 1);
            history.pop_back();
        }
        best = std::max(best, value);
    }
    return best;
}

inline double optimal_value(const Instance& inst) {
    History history;
    std::vector<bool> counted(static_cast<std::size_t>(inst.size()), false);
    return optimal_value(inst, history, counted, inst.budget());
}

// Random history consistent with a hidden health vector drawn from the priors.
inline History random_history(const Instance& inst, Rng& rng, int tests) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(inst.size()));
    for (int i = 0; i < inst.size(); ++i) {
        bits[static_cast<std::size_t>(i)] = rng.bernoulli(inst.prior(i)) ? 1 : 0;
    }
    const HealthVector health(bits);
    History history;
    for (int t = 0; t < tests; ++t) {
        const int size = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                                 std::min(inst.pool_cap(), inst.size()))));
        std::vector<AgentId> all(static_cast<std::size_t>(inst.size()));
        for (int i = 0; i < inst.size(); ++i) all[static_cast<std::size_t>(i)] = i;
        rng.shuffle(std::span<AgentId>(all));
        all.resize(static_cast<std::size_t>(size));
        Pool pool(all);
        history.push_back({pool, health.test(pool)});
    }
    return history;
}

}  // namespace poolwise::oracle
