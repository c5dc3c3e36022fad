#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolwise/errors.hpp"

namespace poolwise {

using AgentId = int;

struct Agent {
    AgentId id = 0;
    double utility = 0.0;  // welfare gained if confirmed healthy
    double prior = 1.0;    // probability healthy
};

// A population with its testing constraints. Immutable after construction.
class Instance {
public:
    Instance(std::vector<Agent> agents, int budget, int pool_cap, std::string meta = {});

    int size() const { return static_cast<int>(agents_.size()); }
    int budget() const { return budget_; }
    int pool_cap() const { return pool_cap_; }
    const std::vector<Agent>& agents() const { return agents_; }
    const Agent& agent(AgentId id) const { return agents_.at(static_cast<std::size_t>(id)); }
    double utility(AgentId id) const { return agent(id).utility; }
    double prior(AgentId id) const { return agent(id).prior; }
    double total_utility() const;

    // Raw JSON text of the optional "meta" object; empty when absent.
    const std::string& meta() const { return meta_; }

    Instance with_budget(int budget) const;
    Instance with_pool_cap(int pool_cap) const;

    friend bool operator==(const Instance& a, const Instance& b);

private:
    std::vector<Agent> agents_;
    int budget_;
    int pool_cap_;
    std::string meta_;
};

inline bool operator==(const Agent& a, const Agent& b) {
    return a.id == b.id && a.utility == b.utility && a.prior == b.prior;
}

// Nonempty sorted set of agent ids.
class Pool {
public:
    Pool() = default;
    explicit Pool(std::vector<AgentId> members);
    Pool(std::initializer_list<AgentId> members) : Pool(std::vector<AgentId>(members)) {}

    const std::vector<AgentId>& members() const { return members_; }
    int size() const { return static_cast<int>(members_.size()); }
    bool empty() const { return members_.empty(); }
    bool contains(AgentId id) const;

    auto begin() const { return members_.begin(); }
    auto end() const { return members_.end(); }

    // Throws StructuralError if any member is out of range or the pool exceeds G.
    void check(const Instance& instance) const;

    friend bool operator==(const Pool&, const Pool&) = default;
    friend auto operator<=>(const Pool&, const Pool&) = default;

private:
    std::vector<AgentId> members_;
};

enum class Outcome : std::uint8_t { Negative, Positive };

const char* to_string(Outcome outcome);

struct TestRecord {
    Pool pool;
    Outcome outcome = Outcome::Negative;

    friend bool operator==(const TestRecord&, const TestRecord&) = default;
};

using History = std::vector<TestRecord>;

// 1 = healthy.
class HealthVector {
public:
    HealthVector() = default;
    explicit HealthVector(std::vector<std::uint8_t> healthy) : healthy_(std::move(healthy)) {}
    static HealthVector from_bits(std::uint64_t healthy_bits, int n);
    static HealthVector all(int n, bool healthy);

    int size() const { return static_cast<int>(healthy_.size()); }
    bool healthy(AgentId id) const { return healthy_[static_cast<std::size_t>(id)] != 0; }
    const std::vector<std::uint8_t>& bits() const { return healthy_; }

    // Deterministic test semantics: negative iff every member is healthy.
    Outcome test(const Pool& pool) const;

    friend bool operator==(const HealthVector&, const HealthVector&) = default;

private:
    std::vector<std::uint8_t> healthy_;
};

struct PlanNode;
using PlanNodePtr = std::shared_ptr<const PlanNode>;

struct PlanNode {
    Pool pool;
    PlanNodePtr on_negative;  // null = stop
    PlanNodePtr on_positive;
};

// Binary decision tree over pools. Subtrees are immutable and may be shared,
// which is how a static plan stays linear in size.
class DynamicPlan {
public:
    DynamicPlan() = default;
    explicit DynamicPlan(PlanNodePtr root) : root_(std::move(root)) {}

    static DynamicPlan from_static(std::span<const Pool> pools);

    const PlanNode* root() const { return root_.get(); }
    const PlanNodePtr& root_ptr() const { return root_; }
    bool empty() const { return root_ == nullptr; }
    int depth() const;
    // Nodes in the expanded tree (shared subtrees counted per path).
    std::size_t node_count() const;

    // Pool sequence if the plan ignores outcomes, nullopt otherwise.
    std::optional<std::vector<Pool>> as_static() const;

    // Pool to test after `history`, or nullopt when the plan stops there.
    // The history must follow the plan's own pools.
    std::optional<Pool> next_pool(const History& history) const;

    // Throws StructuralError on pool-cap/id violations or depth > budget.
    void check(const Instance& instance) const;

    friend bool operator==(const DynamicPlan& a, const DynamicPlan& b);

private:
    PlanNodePtr root_;
};

PlanNodePtr make_node(Pool pool, PlanNodePtr on_negative, PlanNodePtr on_positive);

enum class UtilityModel : std::uint8_t { UniformReal01, DiscreteSet };

struct UtilitySpec {
    UtilityModel model = UtilityModel::UniformReal01;
    std::vector<double> values;  // used by DiscreteSet
};

// Priors i.i.d. uniform on [0,1]; utilities per `utility`.
Instance generate_instance(int n, int budget, int pool_cap, const UtilitySpec& utility,
                           std::uint64_t seed);

double realization_probability(const Instance& instance, const HealthVector& health);

// Sum of utilities of agents appearing in at least one negative pool along the
// path the plan takes under `health`.
double realized_welfare(const Instance& instance, const DynamicPlan& plan,
                        const HealthVector& health);

// Agents confirmed healthy (in >= 1 negative pool) along the realized path.
std::vector<std::uint8_t> realized_confirmations(const Instance& instance,
                                                 const DynamicPlan& plan,
                                                 const HealthVector& health);

}  // namespace poolwise
