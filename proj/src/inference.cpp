#include "poolwise/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "poolwise/rng.hpp"

namespace poolwise {

void GibbsConfig::validate() const {
    if (burn_in < 0) throw ParameterError("gibbs: burn_in must be >= 0");
    if (window < 1) throw ParameterError("gibbs: window must be >= 1");
    if (!(tolerance > 0.0)) throw ParameterError("gibbs: tolerance must be > 0");
    if (max_iterations < burn_in + window) {
        throw ParameterError("gibbs: max_iterations must be >= burn_in + window");
    }
}

bool BeliefState::is_confirmed_healthy(AgentId id) const {
    return std::binary_search(confirmed_healthy.begin(), confirmed_healthy.end(), id);
}

bool BeliefState::is_confirmed_infected(AgentId id) const {
    return std::binary_search(confirmed_infected.begin(), confirmed_infected.end(), id);
}

std::vector<AgentId> BeliefState::coupled_agents() const {
    std::vector<AgentId> ids;
    for (const auto& pool : residual_positive_pools) {
        ids.insert(ids.end(), pool.begin(), pool.end());
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

namespace {

enum class Status : std::uint8_t { Unknown, Healthy, Infected };

std::string describe(const Pool& pool) {
    std::string s = "{";
    for (std::size_t i = 0; i < pool.members().size(); ++i) {
        if (i) s += ",";
        s += std::to_string(pool.members()[i]);
    }
    return s + "}";
}

bool is_subset(const std::vector<AgentId>& small, const std::vector<AgentId>& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

// Sliding-window max (or min, through negation) over a stream, ring-buffer
// backed monotone queue.
class WindowMax {
public:
    explicit WindowMax(std::size_t span) : index_(span + 1), value_(span + 1) {}

    void push(std::int64_t i, double v, std::int64_t oldest) {
        const std::size_t cap = value_.size();
        while (size_ > 0 && value_[(head_ + size_ - 1) % cap] <= v) --size_;
        index_[(head_ + size_) % cap] = i;
        value_[(head_ + size_) % cap] = v;
        ++size_;
        while (index_[head_] < oldest) {
            head_ = (head_ + 1) % cap;
            --size_;
        }
    }
    double max() const { return value_[head_]; }

private:
    std::vector<std::int64_t> index_;
    std::vector<double> value_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

}  // namespace

BeliefState apply_history(const Instance& instance, const History& history) {
    const auto n = static_cast<std::size_t>(instance.size());
    std::vector<Status> status(n, Status::Unknown);
    for (const auto& a : instance.agents()) {
        if (a.prior == 0.0) status[static_cast<std::size_t>(a.id)] = Status::Infected;
    }

    for (const auto& step : history) {
        step.pool.check(instance);
        if (step.outcome != Outcome::Negative) continue;
        for (AgentId id : step.pool) {
            if (status[static_cast<std::size_t>(id)] == Status::Infected) {
                throw InconsistencyError("negative pool " + describe(step.pool) +
                                         " contains agent " + std::to_string(id) +
                                         ", who is certainly infected");
            }
            status[static_cast<std::size_t>(id)] = Status::Healthy;
        }
    }

    // Positive pools minus everyone known to be healthy.
    std::vector<std::vector<AgentId>> residual;
    for (const auto& step : history) {
        if (step.outcome != Outcome::Positive) continue;
        std::vector<AgentId> rest;
        for (AgentId id : step.pool) {
            if (status[static_cast<std::size_t>(id)] == Status::Healthy) continue;
            if (instance.prior(id) == 1.0) continue;
            rest.push_back(id);
        }
        if (rest.empty()) {
            throw InconsistencyError("positive pool " + describe(step.pool) +
                                     " has no member who could be infected");
        }
        residual.push_back(std::move(rest));
    }

    // Singletons force infection; pools holding an infected member are explained.
    // Removing explained pools never shrinks the others, so this terminates with
    // every surviving pool of size >= 2.
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::vector<AgentId>> kept;
        for (auto& pool : residual) {
            const bool explained = std::any_of(pool.begin(), pool.end(), [&](AgentId id) {
                return status[static_cast<std::size_t>(id)] == Status::Infected;
            });
            if (explained) continue;
            if (pool.size() == 1) {
                status[static_cast<std::size_t>(pool.front())] = Status::Infected;
                changed = true;
                continue;
            }
            kept.push_back(std::move(pool));
        }
        residual = std::move(kept);
    }

    // Canonical form: sorted, deduplicated, and without supersets of other pools
    // (a superset is implied by any pool it contains).
    std::sort(residual.begin(), residual.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    residual.erase(std::unique(residual.begin(), residual.end()), residual.end());
    std::vector<std::vector<AgentId>> minimal;
    for (auto& pool : residual) {
        const bool implied = std::any_of(minimal.begin(), minimal.end(),
                                         [&](const auto& m) { return is_subset(m, pool); });
        if (!implied) minimal.push_back(std::move(pool));
    }
    std::sort(minimal.begin(), minimal.end());

    BeliefState belief;
    belief.marginals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        switch (status[i]) {
            case Status::Healthy:
                belief.marginals[i] = 1.0;
                belief.confirmed_healthy.push_back(static_cast<AgentId>(i));
                break;
            case Status::Infected:
                belief.marginals[i] = 0.0;
                belief.confirmed_infected.push_back(static_cast<AgentId>(i));
                break;
            case Status::Unknown:
                belief.marginals[i] = instance.agents()[i].prior;
                break;
        }
    }
    for (auto& pool : minimal) belief.residual_positive_pools.emplace_back(std::move(pool));
    return belief;
}

bool outcome_possible(const Instance& instance, const History& history, const Pool& pool,
                      Outcome outcome) {
    History extended = history;
    extended.push_back(TestRecord{pool, outcome});
    try {
        apply_history(instance, extended);
    } catch (const InconsistencyError&) {
        return false;
    }
    return true;
}

namespace {

// Coupled agents split into connected components of the residual pools.
struct Component {
    std::vector<AgentId> agents;
    std::vector<std::vector<int>> pools;  // local indices
};

std::vector<Component> components_of(const BeliefState& belief) {
    const auto coupled = belief.coupled_agents();
    auto local = [&](AgentId id) {
        return static_cast<int>(std::lower_bound(coupled.begin(), coupled.end(), id) -
                                coupled.begin());
    };
    std::vector<int> parent(coupled.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            x = parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        }
        return x;
    };
    for (const auto& pool : belief.residual_positive_pools) {
        const int first = find(local(pool.members().front()));
        for (AgentId id : pool) parent[static_cast<std::size_t>(find(local(id)))] = first;
    }

    std::vector<int> comp_of_root(coupled.size(), -1);
    std::vector<Component> comps;
    std::vector<int> index_in_comp(coupled.size());
    for (std::size_t i = 0; i < coupled.size(); ++i) {
        const int root = find(static_cast<int>(i));
        auto& c = comp_of_root[static_cast<std::size_t>(root)];
        if (c < 0) {
            c = static_cast<int>(comps.size());
            comps.emplace_back();
        }
        auto& comp = comps[static_cast<std::size_t>(c)];
        index_in_comp[i] = static_cast<int>(comp.agents.size());
        comp.agents.push_back(coupled[i]);
    }
    for (const auto& pool : belief.residual_positive_pools) {
        const int root = find(local(pool.members().front()));
        auto& comp = comps[static_cast<std::size_t>(comp_of_root[static_cast<std::size_t>(root)])];
        std::vector<int> members;
        for (AgentId id : pool) members.push_back(index_in_comp[static_cast<std::size_t>(local(id))]);
        comp.pools.push_back(std::move(members));
    }
    return comps;
}

void enumerate_component(const Instance& instance, const Component& comp,
                         std::vector<double>& marginals) {
    const int k = static_cast<int>(comp.agents.size());
    std::vector<std::uint64_t> pool_masks;
    for (const auto& pool : comp.pools) {
        std::uint64_t m = 0;
        for (int idx : pool) m |= std::uint64_t{1} << idx;
        pool_masks.push_back(m);
    }
    std::vector<double> healthy(static_cast<std::size_t>(k), 0.0);
    std::vector<double> p(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) p[static_cast<std::size_t>(i)] = instance.prior(comp.agents[static_cast<std::size_t>(i)]);

    double total = 0.0;
    const std::uint64_t states = std::uint64_t{1} << k;
    for (std::uint64_t infected = 0; infected < states; ++infected) {
        bool ok = true;
        for (auto m : pool_masks) {
            if ((m & infected) == 0) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        double w = 1.0;
        for (int i = 0; i < k; ++i) {
            w *= ((infected >> i) & 1U) ? 1.0 - p[static_cast<std::size_t>(i)] : p[static_cast<std::size_t>(i)];
        }
        total += w;
        for (int i = 0; i < k; ++i) {
            if (!((infected >> i) & 1U)) healthy[static_cast<std::size_t>(i)] += w;
        }
    }
    for (int i = 0; i < k; ++i) {
        marginals[static_cast<std::size_t>(comp.agents[static_cast<std::size_t>(i)])] =
            healthy[static_cast<std::size_t>(i)] / total;
    }
}

}  // namespace

BeliefState exact_posterior(const Instance& instance, const History& history,
                            int max_coupled_agents) {
    if (max_coupled_agents > 40) {
        throw ParameterError("exact_posterior: cap above 40 coupled agents is not supported");
    }
    BeliefState belief = apply_history(instance, history);
    const auto coupled = belief.coupled_agents().size();
    if (static_cast<int>(coupled) > max_coupled_agents) {
        throw CapacityError("exact_posterior: " + std::to_string(coupled) +
                            " coupled agents exceed the cap of " +
                            std::to_string(max_coupled_agents) + "; use gibbs_posterior");
    }
    for (const auto& comp : components_of(belief)) {
        enumerate_component(instance, comp, belief.marginals);
    }
    belief.method = InferenceMethod::Exact;
    return belief;
}

BeliefState gibbs_posterior(const Instance& instance, const History& history,
                            const GibbsConfig& config) {
    config.validate();
    BeliefState belief = apply_history(instance, history);
    belief.method = InferenceMethod::Gibbs;
    GibbsStats stats;

    const auto coupled = belief.coupled_agents();
    const std::size_t j = coupled.size();
    if (j == 0) {
        belief.gibbs = stats;
        return belief;
    }
    auto local = [&](AgentId id) {
        return static_cast<std::size_t>(std::lower_bound(coupled.begin(), coupled.end(), id) -
                                        coupled.begin());
    };

    std::vector<std::vector<std::size_t>> pool_members;
    std::vector<std::vector<std::size_t>> agent_pools(j);
    for (const auto& pool : belief.residual_positive_pools) {
        std::vector<std::size_t> members;
        for (AgentId id : pool) {
            const auto a = local(id);
            members.push_back(a);
            agent_pools[a].push_back(pool_members.size());
        }
        pool_members.push_back(std::move(members));
    }
    std::vector<double> infected_prob(j);
    for (std::size_t a = 0; a < j; ++a) infected_prob[a] = 1.0 - instance.prior(coupled[a]);

    Rng rng(config.seed);
    std::vector<std::uint8_t> infected(j);
    std::vector<int> infected_count(pool_members.size());
    auto recount = [&] {
        for (std::size_t t = 0; t < pool_members.size(); ++t) {
            int c = 0;
            for (auto a : pool_members[t]) c += infected[a];
            infected_count[t] = c;
        }
    };
    auto consistent = [&] {
        return std::all_of(infected_count.begin(), infected_count.end(),
                           [](int c) { return c > 0; });
    };

    // Initial state from priors; rejection first, then seed each unexplained
    // pool with one infected member.
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        for (std::size_t a = 0; a < j; ++a) infected[a] = rng.bernoulli(infected_prob[a]) ? 1 : 0;
        recount();
        ok = consistent();
    }
    if (!ok) {
        for (std::size_t t = 0; t < pool_members.size(); ++t) {
            if (infected_count[t] > 0) continue;
            const auto& members = pool_members[t];
            const auto a = members[rng.below(members.size())];
            infected[a] = 1;
            for (auto t2 : agent_pools[a]) ++infected_count[t2];
        }
        stats.init_repaired = true;
    }

    auto update = [&](std::size_t a) {
        bool forced = false;
        for (auto t : agent_pools[a]) {
            if (infected_count[t] - infected[a] == 0) {
                forced = true;
                break;
            }
        }
        const std::uint8_t next = forced ? 1 : (rng.bernoulli(infected_prob[a]) ? 1 : 0);
        if (next != infected[a]) {
            const int delta = next ? 1 : -1;
            for (auto t : agent_pools[a]) infected_count[t] += delta;
            infected[a] = next;
        }
        if (config.check_states && !consistent()) {
            throw InconsistencyError("gibbs: chain reached a state with an unexplained positive pool");
        }
    };

    std::vector<std::size_t> order(j);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> healthy_sum(j, 0.0);
    // drift = spread (max - min) of each running mean over the last window+1
    // post-burn-in iterations, tracked with monotone queues
    const auto span = static_cast<std::size_t>(config.window) + 1;
    std::vector<WindowMax> hi(j, WindowMax(span)), lo(j, WindowMax(span));

    stats.stop = GibbsStop::MaxIterations;
    for (int it = 0; it < config.max_iterations; ++it) {
        if (config.order == SweepOrder::RandomSweep) {
            rng.shuffle(std::span<std::size_t>(order));
            for (auto a : order) update(a);
        } else {
            update(rng.below(j));
        }
        ++stats.iterations;
        if (it < config.burn_in) continue;

        ++stats.samples;
        const std::int64_t s = stats.samples;
        const double inv = 1.0 / static_cast<double>(s);
        double drift = 0.0;
        for (std::size_t a = 0; a < j; ++a) {
            healthy_sum[a] += infected[a] ? 0.0 : 1.0;
            const double m = healthy_sum[a] * inv;
            hi[a].push(s, m, s - config.window);
            lo[a].push(s, -m, s - config.window);
            drift = std::max(drift, hi[a].max() + lo[a].max());
        }
        if (s > config.window) {
            stats.final_drift = drift;
            if (drift <= config.tolerance) {
                stats.stop = GibbsStop::Converged;
                break;
            }
        }
    }

    for (std::size_t a = 0; a < j; ++a) {
        belief.marginals[static_cast<std::size_t>(coupled[a])] =
            stats.samples > 0 ? healthy_sum[a] / stats.samples : instance.prior(coupled[a]);
    }
    belief.gibbs = stats;
    return belief;
}

std::uint64_t history_hash(const History& history) {
    std::uint64_t h = 0x51ed270b27a3c5f1ULL;
    for (const auto& step : history) {
        for (AgentId id : step.pool) h = mix64(h ^ static_cast<std::uint64_t>(id));
        h = mix64(h ^ (step.outcome == Outcome::Positive ? 0xa5a5ULL : 0x5a5aULL));
    }
    return h;
}

BeliefState infer(const Instance& instance, const History& history,
                  const InferenceSettings& settings) {
    auto gibbs = [&] {
        GibbsConfig cfg = settings.gibbs;
        cfg.seed = derive_seed(settings.gibbs.seed, history_hash(history));
        return gibbs_posterior(instance, history, cfg);
    };
    switch (settings.mode) {
        case InferenceMode::Exact:
            return exact_posterior(instance, history, settings.exact_cap);
        case InferenceMode::Gibbs:
            return gibbs();
        case InferenceMode::Auto:
            break;
    }
    const auto coupled = apply_history(instance, history).coupled_agents().size();
    if (static_cast<int>(coupled) <= settings.exact_cap) {
        return exact_posterior(instance, history, settings.exact_cap);
    }
    return gibbs();
}

}  // namespace poolwise
