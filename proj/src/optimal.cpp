#include <bit>
#include <unordered_map>

#include "poolwise/planning.hpp"
#include "poolwise/rng.hpp"

namespace poolwise {

namespace {

// Posterior state as the set of joint health vectors (bit i of a vector = agent
// i healthy) still consistent with the history, plus the agents already
// counted by a negative pool. The consistent set determines the confirmed sets
// and residual pools and vice versa, so it is a canonical memo key.
using StateSet = std::vector<std::uint64_t>;

struct Key {
    StateSet set;
    std::uint32_t counted;
    int budget;

    bool operator==(const Key&) const = default;
};

struct KeyHash {
    std::size_t operator()(const Key& k) const {
        std::uint64_t h = mix64(k.counted ^ (static_cast<std::uint64_t>(k.budget) << 40));
        for (auto w : k.set) h = mix64(h ^ w);
        return static_cast<std::size_t>(h);
    }
};

struct Entry {
    double value = 0.0;
    int pool = -1;  // index into pools_, -1 = stop
};

class OptimalSearch {
public:
    OptimalSearch(const Instance& instance, int horizon)
        : instance_(instance), n_(instance.size()), horizon_(horizon) {
        const std::size_t states = std::size_t{1} << n_;
        words_ = (states + 63) / 64;
        mass_.resize(states);
        for (std::size_t h = 0; h < states; ++h) {
            double m = 1.0;
            for (int i = 0; i < n_; ++i) {
                const double p = instance.prior(i);
                m *= ((h >> i) & 1U) ? p : 1.0 - p;
            }
            mass_[h] = m;
        }
        // Pools in lexicographic member order.
        std::vector<Pool> pools;
        for (std::uint32_t mask = 1; mask < (1U << n_); ++mask) {
            if (std::popcount(mask) > instance.pool_cap()) continue;
            std::vector<AgentId> ids;
            for (int i = 0; i < n_; ++i) {
                if ((mask >> i) & 1U) ids.push_back(i);
            }
            pools.emplace_back(std::move(ids));
        }
        std::sort(pools.begin(), pools.end(),
                  [](const Pool& a, const Pool& b) { return a.members() < b.members(); });
        for (auto& pool : pools) {
            std::uint32_t mask = 0;
            for (AgentId id : pool) mask |= 1U << id;
            StateSet neg(words_, 0);
            for (std::size_t h = 0; h < states; ++h) {
                if ((static_cast<std::uint32_t>(h) & mask) == mask) neg[h / 64] |= std::uint64_t{1} << (h % 64);
            }
            pool_masks_.push_back(mask);
            negative_sets_.push_back(std::move(neg));
            pools_.push_back(std::move(pool));
        }
    }

    PlanWithValue run() {
        StateSet start(words_, 0);
        for (std::size_t h = 0; h < mass_.size(); ++h) {
            if (mass_[h] > 0.0) start[h / 64] |= std::uint64_t{1} << (h % 64);
        }
        const double value = solve(start, 0, horizon_);
        return PlanWithValue{DynamicPlan(build(start, 0, horizon_)), value};
    }

private:
    double mass_of(const StateSet& set) const {
        double total = 0.0;
        for (std::size_t w = 0; w < set.size(); ++w) {
            for (auto bits = set[w]; bits != 0; bits &= bits - 1) {
                total += mass_[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))];
            }
        }
        return total;
    }

    static bool empty(const StateSet& set) {
        for (auto w : set) {
            if (w) return false;
        }
        return true;
    }

    void split(const StateSet& set, std::size_t pool, StateSet& neg, StateSet& pos) const {
        neg.resize(words_);
        pos.resize(words_);
        for (std::size_t w = 0; w < words_; ++w) {
            neg[w] = set[w] & negative_sets_[pool][w];
            pos[w] = set[w] & ~negative_sets_[pool][w];
        }
    }

    double gain(std::size_t pool, std::uint32_t counted) const {
        double g = 0.0;
        for (auto bits = pool_masks_[pool] & ~counted; bits != 0; bits &= bits - 1) {
            g += instance_.utility(std::countr_zero(bits));
        }
        return g;
    }

    const Entry& lookup(const StateSet& set, std::uint32_t counted, int budget) {
        Key key{set, counted, budget};
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;

        Entry best;
        if (budget > 0) {
            const double total = mass_of(set);
            StateSet neg, pos;
            for (std::size_t t = 0; t < pools_.size(); ++t) {
                split(set, t, neg, pos);
                const double p_neg = mass_of(neg) / total;
                double value = 0.0;
                if (!empty(neg)) {
                    value += p_neg * (gain(t, counted) +
                                      solve(neg, counted | pool_masks_[t], budget - 1));
                }
                if (!empty(pos)) {
                    value += (1.0 - p_neg) * solve(pos, counted, budget - 1);
                }
                if (best.pool < 0 ? value > kTieTolerance
                                  : preferred(value, pools_[t], best.value,
                                              pools_[static_cast<std::size_t>(best.pool)])) {
                    best = Entry{value, static_cast<int>(t)};
                }
            }
        }
        return memo_.emplace(std::move(key), best).first->second;
    }

    double solve(const StateSet& set, std::uint32_t counted, int budget) {
        return lookup(set, counted, budget).value;
    }

    PlanNodePtr build(const StateSet& set, std::uint32_t counted, int budget) {
        const Entry entry = lookup(set, counted, budget);
        if (entry.pool < 0) return nullptr;
        const auto t = static_cast<std::size_t>(entry.pool);
        StateSet neg, pos;
        split(set, t, neg, pos);
        PlanNodePtr on_neg = empty(neg) ? nullptr : build(neg, counted | pool_masks_[t], budget - 1);
        PlanNodePtr on_pos = empty(pos) ? nullptr : build(pos, counted, budget - 1);
        return make_node(pools_[t], std::move(on_neg), std::move(on_pos));
    }

    const Instance& instance_;
    int n_;
    int horizon_;
    std::size_t words_ = 0;
    std::vector<double> mass_;
    std::vector<Pool> pools_;
    std::vector<std::uint32_t> pool_masks_;
    std::vector<StateSet> negative_sets_;
    std::unordered_map<Key, Entry, KeyHash> memo_;
};

}  // namespace

PlanWithValue optimal_dynamic_plan(const Instance& instance, const OptimalConfig& config) {
    const int horizon = config.horizon.value_or(instance.budget());
    if (horizon < 0) throw ParameterError("optimal_dynamic_plan: horizon must be >= 0");
    if (instance.size() > config.max_agents || instance.size() > 16) {
        throw CapacityError("optimal_dynamic_plan: " + std::to_string(instance.size()) +
                            " agents exceed the cap of " + std::to_string(config.max_agents));
    }
    if (horizon > config.max_budget) {
        throw CapacityError("optimal_dynamic_plan: budget " + std::to_string(horizon) +
                            " exceeds the cap of " + std::to_string(config.max_budget));
    }
    if (horizon == 0) return PlanWithValue{};
    return OptimalSearch(instance, horizon).run();
}

}  // namespace poolwise
