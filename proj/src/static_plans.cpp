#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "poolwise/evaluation.hpp"
#include "poolwise/planning.hpp"
#include "poolwise/rng.hpp"

namespace poolwise {

double disjoint_static_welfare(const Instance& instance, std::span<const Pool> pools) {
    double total = 0.0;
    for (const auto& pool : pools) {
        double prod = 1.0, sum = 0.0;
        for (AgentId id : pool) {
            prod *= instance.prior(id);
            sum += instance.utility(id);
        }
        total += prod * sum;
    }
    return total;
}

StaticPlan non_pooled_plan(const Instance& instance) {
    std::vector<AgentId> order(static_cast<std::size_t>(instance.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](AgentId a, AgentId b) {
        return instance.utility(a) * instance.prior(a) > instance.utility(b) * instance.prior(b);
    });
    StaticPlan plan;
    const auto count = std::min<std::size_t>(order.size(), static_cast<std::size_t>(instance.budget()));
    for (std::size_t k = 0; k < count; ++k) plan.pools.push_back(Pool{order[k]});
    plan.expected_welfare = disjoint_static_welfare(instance, plan.pools);
    return plan;
}

StaticPlan greedy_non_overlapping_plan(const Instance& instance) {
    std::vector<Candidate> remaining;
    for (const auto& a : instance.agents()) remaining.push_back(Candidate{a.id, a.utility, a.prior});
    StaticPlan plan;
    for (int round = 0; round < instance.budget() && !remaining.empty(); ++round) {
        auto choice = best_single_test(remaining, instance.pool_cap());
        std::erase_if(remaining, [&](const Candidate& c) { return choice.pool.contains(c.id); });
        plan.pools.push_back(std::move(choice.pool));
    }
    plan.expected_welfare = disjoint_static_welfare(instance, plan.pools);
    return plan;
}

StaticPlan exact_non_overlapping_plan(const Instance& instance, int max_agents) {
    const int n = instance.size();
    if (n > max_agents || n > 20) {
        throw CapacityError("exact_non_overlapping_plan: " + std::to_string(n) +
                            " agents exceed the cap of " + std::to_string(max_agents) +
                            "; use static_local_search_plan");
    }
    const int budget = std::min(instance.budget(), n);
    const std::uint32_t full = (n == 32) ? ~0U : ((1U << n) - 1U);
    const std::size_t masks = std::size_t{1} << n;

    std::vector<double> pool_value(masks, 0.0);
    for (std::uint32_t m = 1; m <= full; ++m) {
        if (std::popcount(m) > instance.pool_cap()) continue;
        double prod = 1.0, sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if ((m >> i) & 1U) {
                prod *= instance.prior(i);
                sum += instance.utility(i);
            }
        }
        pool_value[m] = prod * sum;
    }

    // best[mask][b]: best welfare using agents in `mask` and at most b pools.
    // choice = pool mask that contains the lowest agent of `mask`, 0 = skip it.
    const auto stride = static_cast<std::size_t>(budget) + 1;
    std::vector<double> best(masks * stride, -1.0);
    std::vector<std::uint32_t> choice(masks * stride, 0);

    auto solve = [&](auto&& self, std::uint32_t mask, int b) -> double {
        if (mask == 0 || b == 0) return 0.0;
        const std::size_t slot = mask * stride + static_cast<std::size_t>(b);
        if (best[slot] >= 0.0) return best[slot];
        const std::uint32_t low = mask & (0U - mask);
        const std::uint32_t rest = mask ^ low;
        double value = self(self, rest, b);
        std::uint32_t pick = 0;
        // every subset of `rest` joined with `low`
        for (std::uint32_t sub = rest;; sub = (sub - 1) & rest) {
            const std::uint32_t pool = sub | low;
            if (std::popcount(pool) <= instance.pool_cap()) {
                const double v = pool_value[pool] + self(self, rest & ~sub, b - 1);
                if (v > value + kTieTolerance * std::max(1.0, value)) {
                    value = v;
                    pick = pool;
                }
            }
            if (sub == 0) break;
        }
        best[slot] = value;
        choice[slot] = pick;
        return value;
    };
    const double value = solve(solve, full, budget);

    StaticPlan plan;
    std::uint32_t mask = full;
    int b = budget;
    while (mask != 0 && b > 0) {
        const std::uint32_t pick = choice[mask * stride + static_cast<std::size_t>(b)];
        const std::uint32_t low = mask & (0U - mask);
        if (pick == 0) {
            mask ^= low;
            continue;
        }
        std::vector<AgentId> ids;
        for (int i = 0; i < n; ++i) {
            if ((pick >> i) & 1U) ids.push_back(i);
        }
        plan.pools.emplace_back(std::move(ids));
        mask &= ~pick;
        --b;
    }
    std::sort(plan.pools.begin(), plan.pools.end());
    plan.expected_welfare = disjoint_static_welfare(instance, plan.pools);
    (void)value;
    return plan;
}

StaticPlan exact_overlapping_static_plan(const Instance& instance, const OverlappingConfig& config) {
    const int n = instance.size();
    const int budget = instance.budget();
    if (n > config.max_agents || n > 16) {
        throw CapacityError("exact_overlapping_static_plan: " + std::to_string(n) +
                            " agents exceed the cap of " + std::to_string(config.max_agents));
    }
    if (budget > config.max_budget) {
        throw CapacityError("exact_overlapping_static_plan: budget " + std::to_string(budget) +
                            " exceeds the cap of " + std::to_string(config.max_budget));
    }

    std::vector<Pool> pools;
    for (std::uint32_t m = 1; m < (1U << n); ++m) {
        if (std::popcount(m) > instance.pool_cap()) continue;
        std::vector<AgentId> ids;
        for (int i = 0; i < n; ++i) {
            if ((m >> i) & 1U) ids.push_back(i);
        }
        pools.emplace_back(std::move(ids));
    }
    std::sort(pools.begin(), pools.end(),
              [](const Pool& a, const Pool& b) { return a.members() < b.members(); });
    std::vector<std::uint32_t> masks;
    for (const auto& pool : pools) {
        std::uint32_t m = 0;
        for (AgentId id : pool) m |= 1U << id;
        masks.push_back(m);
    }

    const std::size_t states = std::size_t{1} << n;
    std::vector<double> mass(states);
    for (std::size_t h = 0; h < states; ++h) {
        double m = 1.0;
        for (int i = 0; i < n; ++i) m *= ((h >> i) & 1U) ? instance.prior(i) : 1.0 - instance.prior(i);
        mass[h] = m;
    }
    std::vector<double> utility_of(std::size_t{1} << n, 0.0);
    for (std::uint32_t m = 1; m < (1U << n); ++m) {
        const int low = std::countr_zero(m);
        utility_of[m] = utility_of[m & (m - 1)] + instance.utility(low);
    }

    // Non-decreasing index tuples of length `budget`; a repeated pool is the
    // same as a shorter plan, so shorter plans are covered too.
    std::vector<std::size_t> idx(static_cast<std::size_t>(budget), 0);
    std::vector<std::size_t> best_idx = idx;
    double best_value = -1.0;
    while (true) {
        double value = 0.0;
        for (std::size_t h = 0; h < states; ++h) {
            if (mass[h] == 0.0) continue;
            std::uint32_t confirmed = 0;
            for (auto t : idx) {
                if ((static_cast<std::uint32_t>(h) & masks[t]) == masks[t]) confirmed |= masks[t];
            }
            value += mass[h] * utility_of[confirmed];
        }
        if (value > best_value + kTieTolerance * std::max(1.0, best_value)) {
            best_value = value;
            best_idx = idx;
        }
        // advance to the next non-decreasing tuple
        int pos = budget - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] + 1 == pools.size()) --pos;
        if (pos < 0) break;
        const auto next = idx[static_cast<std::size_t>(pos)] + 1;
        for (auto k = static_cast<std::size_t>(pos); k < idx.size(); ++k) idx[k] = next;
    }

    StaticPlan plan;
    for (auto t : best_idx) {
        if (plan.pools.empty() || plan.pools.back() != pools[t]) plan.pools.push_back(pools[t]);
    }
    plan.expected_welfare = evaluate_exact(instance, plan.to_plan()).expected_welfare;
    return plan;
}

namespace {

// Disjoint static plan under hill climbing. Pool values are cached and
// recomputed only for pools a move touches.
class LocalSearch {
public:
    explicit LocalSearch(const Instance& instance) : instance_(instance) {}

    void load(const std::vector<Pool>& pools) {
        pools_.clear();
        for (const auto& p : pools) pools_.push_back(p.members());
        rebuild();
    }

    std::vector<Pool> pools() const {
        std::vector<Pool> out;
        for (const auto& p : pools_) {
            if (!p.empty()) out.emplace_back(p);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    double objective() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

    void perturb(Rng& rng) {
        auto unpooled = unpooled_agents();
        for (auto& pool : pools_) {
            for (auto& id : pool) {
                if (unpooled.empty() || !rng.bernoulli(0.3)) continue;
                const auto k = rng.below(unpooled.size());
                std::swap(id, unpooled[k]);
            }
        }
        const auto all = pooled_agents();
        for (std::size_t s = 0; s < all.size() / 2; ++s) {
            const auto a = all[rng.below(all.size())];
            const auto b = all[rng.below(all.size())];
            swap_agents(a, b);
        }
        rebuild();
    }

    // Best-improvement hill climbing until no move gains.
    void climb() {
        while (true) {
            const double current = objective();
            const double tol = kTieTolerance * std::max(1.0, std::abs(current));
            Move best{};
            double best_gain = tol;
            scan([&](const Move& m, double gain) {
                if (gain > best_gain) {
                    best_gain = gain;
                    best = m;
                }
            });
            if (best.kind == Move::None) return;
            apply(best);
        }
    }

private:
    struct Move {
        enum Kind { None, Relocate, Swap, Replace } kind = None;
        std::size_t pool_a = 0, pool_b = 0;  // pool_b == pools_.size() -> new pool, npos -> unpooled
        std::size_t pos_a = 0, pos_b = 0;
        AgentId outside = -1;
    };
    static constexpr std::size_t kOut = static_cast<std::size_t>(-1);

    double value_of(const std::vector<AgentId>& pool) const {
        if (pool.empty()) return 0.0;
        double prod = 1.0, sum = 0.0;
        for (AgentId id : pool) {
            prod *= instance_.prior(id);
            sum += instance_.utility(id);
        }
        return prod * sum;
    }

    void rebuild() {
        values_.clear();
        for (const auto& p : pools_) values_.push_back(value_of(p));
    }

    std::vector<AgentId> pooled_agents() const {
        std::vector<AgentId> out;
        for (const auto& p : pools_) out.insert(out.end(), p.begin(), p.end());
        return out;
    }

    std::vector<AgentId> unpooled_agents() const {
        std::vector<std::uint8_t> used(static_cast<std::size_t>(instance_.size()), 0);
        for (AgentId id : pooled_agents()) used[static_cast<std::size_t>(id)] = 1;
        std::vector<AgentId> out;
        for (int i = 0; i < instance_.size(); ++i) {
            if (!used[static_cast<std::size_t>(i)]) out.push_back(i);
        }
        return out;
    }

    void swap_agents(AgentId a, AgentId b) {
        for (auto& pool : pools_) {
            for (auto& id : pool) {
                if (id == a) {
                    id = b;
                } else if (id == b) {
                    id = a;
                }
            }
        }
    }

    int open_pools() const {
        return static_cast<int>(std::count_if(pools_.begin(), pools_.end(),
                                              [](const auto& p) { return !p.empty(); }));
    }

    template <typename Visit>
    void scan(Visit&& visit) {
        const std::size_t np = pools_.size();
        const auto cap = static_cast<std::size_t>(instance_.pool_cap());
        const bool can_open = open_pools() < instance_.budget();
        const auto outside = unpooled_agents();
        std::vector<AgentId> tmp_a, tmp_b;

        for (std::size_t i = 0; i < np; ++i) {
            for (std::size_t x = 0; x < pools_[i].size(); ++x) {
                tmp_a = pools_[i];
                tmp_a.erase(tmp_a.begin() + static_cast<std::ptrdiff_t>(x));
                const double without = value_of(tmp_a) - values_[i];
                const AgentId agent = pools_[i][x];
                // drop from the plan
                visit(Move{Move::Relocate, i, kOut, x, 0, -1}, without);
                // move into another pool or a fresh one
                for (std::size_t j = 0; j < np; ++j) {
                    if (j == i || pools_[j].size() >= cap) continue;
                    if (pools_[j].empty() && (!can_open && pools_[i].size() > 1)) continue;
                    tmp_b = pools_[j];
                    tmp_b.push_back(agent);
                    visit(Move{Move::Relocate, i, j, x, 0, -1}, without + value_of(tmp_b) - values_[j]);
                }
                if (can_open && pools_[i].size() > 1) {
                    visit(Move{Move::Relocate, i, np, x, 0, -1},
                          without + value_of({agent}));
                }
                // swap with a member of a later pool
                for (std::size_t j = i + 1; j < np; ++j) {
                    for (std::size_t y = 0; y < pools_[j].size(); ++y) {
                        tmp_a = pools_[i];
                        tmp_a[x] = pools_[j][y];
                        tmp_b = pools_[j];
                        tmp_b[y] = agent;
                        visit(Move{Move::Swap, i, j, x, y, -1},
                              value_of(tmp_a) - values_[i] + value_of(tmp_b) - values_[j]);
                    }
                }
                // replace with an unpooled agent
                for (AgentId c : outside) {
                    tmp_a = pools_[i];
                    tmp_a[x] = c;
                    visit(Move{Move::Replace, i, 0, x, 0, c}, value_of(tmp_a) - values_[i]);
                }
            }
        }
        // insert an unpooled agent
        for (AgentId c : outside) {
            for (std::size_t j = 0; j < np; ++j) {
                if (pools_[j].size() >= cap) continue;
                if (pools_[j].empty() && !can_open) continue;
                tmp_b = pools_[j];
                tmp_b.push_back(c);
                visit(Move{Move::Replace, kOut, j, 0, 0, c}, value_of(tmp_b) - values_[j]);
            }
            if (can_open) {
                visit(Move{Move::Replace, kOut, np, 0, 0, c}, value_of({c}));
            }
        }
    }

    void apply(const Move& m) {
        if (m.kind == Move::Swap) {
            std::swap(pools_[m.pool_a][m.pos_a], pools_[m.pool_b][m.pos_b]);
        } else if (m.kind == Move::Relocate) {
            const AgentId agent = pools_[m.pool_a][m.pos_a];
            pools_[m.pool_a].erase(pools_[m.pool_a].begin() + static_cast<std::ptrdiff_t>(m.pos_a));
            if (m.pool_b == pools_.size()) {
                pools_.push_back({agent});
            } else if (m.pool_b != kOut) {
                pools_[m.pool_b].push_back(agent);
            }
        } else if (m.kind == Move::Replace) {
            if (m.pool_a != kOut) {
                pools_[m.pool_a][m.pos_a] = m.outside;
            } else if (m.pool_b == pools_.size()) {
                pools_.push_back({m.outside});
            } else {
                pools_[m.pool_b].push_back(m.outside);
            }
        }
        std::erase_if(pools_, [](const auto& p) { return p.empty(); });
        rebuild();
    }

    const Instance& instance_;
    std::vector<std::vector<AgentId>> pools_;
    std::vector<double> values_;
};

}  // namespace

StaticPlan static_local_search_plan(const Instance& instance, int restarts, std::uint64_t seed) {
    if (restarts < 0) throw ParameterError("static_local_search_plan: restarts must be >= 0");
    StaticPlan greedy = greedy_non_overlapping_plan(instance);
    StaticPlan best = greedy;
    if (restarts == 0) return best;

    Rng root(seed);
    LocalSearch search(instance);
    for (int r = 0; r < restarts; ++r) {
        search.load(greedy.pools);
        if (r > 0) {
            Rng rng = root.split(static_cast<std::uint64_t>(r));
            search.perturb(rng);
        }
        search.climb();
        const double value = search.objective();
        if (value > best.expected_welfare + kTieTolerance * std::max(1.0, best.expected_welfare)) {
            best.pools = search.pools();
            best.expected_welfare = disjoint_static_welfare(instance, best.pools);
        }
    }
    return best;
}

}  // namespace poolwise
