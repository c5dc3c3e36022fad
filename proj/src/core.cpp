#include "poolwise/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "poolwise/rng.hpp"

namespace poolwise {

Instance::Instance(std::vector<Agent> agents, int budget, int pool_cap, std::string meta)
    : agents_(std::move(agents)), budget_(budget), pool_cap_(pool_cap), meta_(std::move(meta)) {
    if (agents_.empty()) {
        throw ParameterError("instance must contain at least one agent");
    }
    if (budget_ < 1) {
        throw ParameterError("budget must be >= 1");
    }
    if (pool_cap_ < 1) {
        throw ParameterError("pool cap must be >= 1");
    }
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        const Agent& a = agents_[i];
        if (a.id != static_cast<AgentId>(i)) {
            throw ParameterError("agent ids must be contiguous from 0 in order");
        }
        if (!(a.utility >= 0.0) || !std::isfinite(a.utility)) {
            throw ParameterError("agent " + std::to_string(i) + ": utility must be finite and >= 0");
        }
        if (!(a.prior >= 0.0 && a.prior <= 1.0)) {
            throw ParameterError("agent " + std::to_string(i) + ": prior must lie in [0,1]");
        }
    }
}

double Instance::total_utility() const {
    double total = 0.0;
    for (const auto& a : agents_) total += a.utility;
    return total;
}

Instance Instance::with_budget(int budget) const {
    return Instance(agents_, budget, pool_cap_, meta_);
}

Instance Instance::with_pool_cap(int pool_cap) const {
    return Instance(agents_, budget_, pool_cap, meta_);
}

bool operator==(const Instance& a, const Instance& b) {
    return a.agents_ == b.agents_ && a.budget_ == b.budget_ && a.pool_cap_ == b.pool_cap_ &&
           a.meta_ == b.meta_;
}

Pool::Pool(std::vector<AgentId> members) : members_(std::move(members)) {
    if (members_.empty()) {
        throw StructuralError("pool must be nonempty");
    }
    std::sort(members_.begin(), members_.end());
    if (std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
        throw StructuralError("pool contains duplicate agent ids");
    }
    if (members_.front() < 0) {
        throw StructuralError("pool contains a negative agent id");
    }
}

bool Pool::contains(AgentId id) const {
    return std::binary_search(members_.begin(), members_.end(), id);
}

void Pool::check(const Instance& instance) const {
    if (members_.empty()) {
        throw StructuralError("pool must be nonempty");
    }
    if (members_.back() >= instance.size()) {
        throw StructuralError("pool references agent " + std::to_string(members_.back()) +
                              " outside the instance");
    }
    if (size() > instance.pool_cap()) {
        throw StructuralError("pool of size " + std::to_string(size()) + " exceeds pool cap " +
                              std::to_string(instance.pool_cap()));
    }
}

const char* to_string(Outcome outcome) {
    return outcome == Outcome::Negative ? "neg" : "pos";
}

HealthVector HealthVector::from_bits(std::uint64_t healthy_bits, int n) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = (healthy_bits >> i) & 1U;
    return HealthVector(std::move(v));
}

HealthVector HealthVector::all(int n, bool healthy) {
    return HealthVector(std::vector<std::uint8_t>(static_cast<std::size_t>(n), healthy ? 1 : 0));
}

Outcome HealthVector::test(const Pool& pool) const {
    for (AgentId id : pool) {
        if (!healthy(id)) return Outcome::Positive;
    }
    return Outcome::Negative;
}

PlanNodePtr make_node(Pool pool, PlanNodePtr on_negative, PlanNodePtr on_positive) {
    return std::make_shared<const PlanNode>(
        PlanNode{std::move(pool), std::move(on_negative), std::move(on_positive)});
}

DynamicPlan DynamicPlan::from_static(std::span<const Pool> pools) {
    PlanNodePtr next;
    for (auto it = pools.rbegin(); it != pools.rend(); ++it) {
        next = make_node(*it, next, next);
    }
    return DynamicPlan(std::move(next));
}

namespace {

int depth_of(const PlanNode* node) {
    if (node == nullptr) return 0;
    return 1 + std::max(depth_of(node->on_negative.get()), depth_of(node->on_positive.get()));
}

std::size_t count_of(const PlanNode* node) {
    if (node == nullptr) return 0;
    return 1 + count_of(node->on_negative.get()) + count_of(node->on_positive.get());
}

bool same_tree(const PlanNode* a, const PlanNode* b) {
    if (a == b) return true;
    if (a == nullptr || b == nullptr) return false;
    return a->pool == b->pool && same_tree(a->on_negative.get(), b->on_negative.get()) &&
           same_tree(a->on_positive.get(), b->on_positive.get());
}

void check_node(const PlanNode* node, const Instance& instance) {
    if (node == nullptr) return;
    node->pool.check(instance);
    check_node(node->on_negative.get(), instance);
    check_node(node->on_positive.get(), instance);
}

}  // namespace

int DynamicPlan::depth() const { return depth_of(root_.get()); }

std::size_t DynamicPlan::node_count() const { return count_of(root_.get()); }

std::optional<std::vector<Pool>> DynamicPlan::as_static() const {
    std::vector<Pool> pools;
    const PlanNode* node = root_.get();
    while (node != nullptr) {
        if (!same_tree(node->on_negative.get(), node->on_positive.get())) return std::nullopt;
        pools.push_back(node->pool);
        node = node->on_negative.get();
    }
    return pools;
}

std::optional<Pool> DynamicPlan::next_pool(const History& history) const {
    const PlanNode* node = root_.get();
    for (const auto& step : history) {
        if (node == nullptr) return std::nullopt;
        if (node->pool != step.pool) {
            throw StructuralError("history does not follow the plan");
        }
        node = step.outcome == Outcome::Negative ? node->on_negative.get()
                                                 : node->on_positive.get();
    }
    if (node == nullptr) return std::nullopt;
    return node->pool;
}

void DynamicPlan::check(const Instance& instance) const {
    check_node(root_.get(), instance);
    if (depth() > instance.budget()) {
        throw StructuralError("plan depth " + std::to_string(depth()) + " exceeds budget " +
                              std::to_string(instance.budget()));
    }
}

bool operator==(const DynamicPlan& a, const DynamicPlan& b) {
    return same_tree(a.root_.get(), b.root_.get());
}

Instance generate_instance(int n, int budget, int pool_cap, const UtilitySpec& utility,
                           std::uint64_t seed) {
    if (n < 1 || budget < 1 || pool_cap < 1) {
        throw ParameterError("generate_instance: n, budget and pool_cap must all be >= 1");
    }
    if (utility.model == UtilityModel::DiscreteSet && utility.values.empty()) {
        throw ParameterError("generate_instance: discrete utility set is empty");
    }
    Rng rng(seed);
    std::vector<Agent> agents;
    agents.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Agent a;
        a.id = i;
        if (utility.model == UtilityModel::UniformReal01) {
            a.utility = rng.uniform();
        } else {
            a.utility = utility.values[rng.below(utility.values.size())];
        }
        a.prior = rng.uniform();
        agents.push_back(a);
    }
    return Instance(std::move(agents), budget, pool_cap);
}

double realization_probability(const Instance& instance, const HealthVector& health) {
    if (health.size() != instance.size()) {
        throw ParameterError("health vector length " + std::to_string(health.size()) +
                             " does not match instance size " + std::to_string(instance.size()));
    }
    double mass = 1.0;
    for (const auto& a : instance.agents()) {
        mass *= health.healthy(a.id) ? a.prior : 1.0 - a.prior;
    }
    return mass;
}

std::vector<std::uint8_t> realized_confirmations(const Instance& instance,
                                                 const DynamicPlan& plan,
                                                 const HealthVector& health) {
    if (health.size() != instance.size()) {
        throw ParameterError("health vector length does not match instance size");
    }
    std::vector<std::uint8_t> confirmed(static_cast<std::size_t>(instance.size()), 0);
    int steps = 0;
    for (const PlanNode* node = plan.root(); node != nullptr; ++steps) {
        if (steps >= instance.budget()) {
            throw StructuralError("plan depth exceeds budget");
        }
        node->pool.check(instance);
        if (health.test(node->pool) == Outcome::Negative) {
            for (AgentId id : node->pool) confirmed[static_cast<std::size_t>(id)] = 1;
            node = node->on_negative.get();
        } else {
            node = node->on_positive.get();
        }
    }
    return confirmed;
}

double realized_welfare(const Instance& instance, const DynamicPlan& plan,
                        const HealthVector& health) {
    const auto confirmed = realized_confirmations(instance, plan, health);
    double welfare = 0.0;
    for (const auto& a : instance.agents()) {
        if (confirmed[static_cast<std::size_t>(a.id)]) welfare += a.utility;
    }
    return welfare;
}

}  // namespace poolwise
