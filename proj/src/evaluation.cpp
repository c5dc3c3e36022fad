#include "poolwise/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <unordered_set>

#include "poolwise/rng.hpp"

namespace poolwise {

const char* to_string(EvalMethod method) {
    return method == EvalMethod::Exact ? "exact" : "mc";
}

void MonteCarloConfig::validate() const {
    if (!(mass_threshold > 0.0 && mass_threshold <= 1.0)) {
        throw ParameterError("monte carlo: mass_threshold must lie in (0,1]");
    }
    if (max_samples < 1) throw ParameterError("monte carlo: max_samples must be >= 1");
}

namespace {

void collect_agents(const PlanNode* node, std::vector<AgentId>& out) {
    if (node == nullptr) return;
    out.insert(out.end(), node->pool.begin(), node->pool.end());
    collect_agents(node->on_negative.get(), out);
    collect_agents(node->on_positive.get(), out);
}

}  // namespace

EvalReport evaluate_exact(const Instance& instance, const DynamicPlan& plan, int max_agents) {
    plan.check(instance);
    std::vector<AgentId> touched;
    collect_agents(plan.root(), touched);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    if (static_cast<int>(touched.size()) > max_agents || touched.size() > 30) {
        throw CapacityError("evaluate_exact: plan touches " + std::to_string(touched.size()) +
                            " agents, above the enumeration cap of " +
                            std::to_string(std::min(max_agents, 30)));
    }

    const auto n = static_cast<std::size_t>(instance.size());
    EvalReport report;
    report.method = EvalMethod::Exact;
    report.per_agent_confirmation.assign(n, 0.0);

    std::vector<std::uint8_t> bits(n, 1);
    const std::uint64_t states = std::uint64_t{1} << touched.size();
    for (std::uint64_t s = 0; s < states; ++s) {
        double mass = 1.0;
        for (std::size_t k = 0; k < touched.size(); ++k) {
            const bool healthy = (s >> k) & 1U;
            const double p = instance.prior(touched[k]);
            bits[static_cast<std::size_t>(touched[k])] = healthy ? 1 : 0;
            mass *= healthy ? p : 1.0 - p;
        }
        if (mass == 0.0) continue;
        ++report.n_realizations;
        const auto confirmed = realized_confirmations(instance, plan, HealthVector(bits));
        for (AgentId id : touched) {
            if (confirmed[static_cast<std::size_t>(id)]) {
                report.per_agent_confirmation[static_cast<std::size_t>(id)] += mass;
            }
        }
    }
    for (const auto& a : instance.agents()) {
        report.expected_welfare += a.utility * report.per_agent_confirmation[static_cast<std::size_t>(a.id)];
    }
    report.covered_mass = 1.0;
    return report;
}

namespace {

// Lazily expanded policy tree; each node is resolved by one policy call.
struct LazyNode {
    bool resolved = false;
    std::optional<Pool> pool;
    std::unique_ptr<LazyNode> children[2];
};

// Accumulates mass-weighted sums relative to a reference log-mass so that
// realizations far below double range (large N) still combine correctly.
class MassAccumulator {
public:
    explicit MassAccumulator(std::size_t n) : conf_(n, 0.0) {}

    void add(double log_mass, double welfare, const std::vector<std::uint8_t>& confirmed) {
        if (!started_ || log_mass > ref_ + 50.0) {
            const double scale = started_ ? std::exp(ref_ - log_mass) : 0.0;
            mass_ *= scale;
            welfare_ *= scale;
            for (auto& c : conf_) c *= scale;
            ref_ = log_mass;
            started_ = true;
        }
        const double w = std::exp(log_mass - ref_);
        mass_ += w;
        welfare_ += w * welfare;
        for (std::size_t i = 0; i < conf_.size(); ++i) {
            if (confirmed[i]) conf_[i] += w;
        }
    }

    double covered_mass() const { return started_ ? std::exp(ref_) * mass_ : 0.0; }
    double raw_welfare() const { return started_ ? std::exp(ref_) * welfare_ : 0.0; }
    double normalized_welfare() const { return mass_ > 0.0 ? welfare_ / mass_ : 0.0; }
    double confirmation(std::size_t i, bool normalize) const {
        if (!started_) return 0.0;
        return normalize ? conf_[i] / mass_ : std::exp(ref_) * conf_[i];
    }

private:
    bool started_ = false;
    double ref_ = 0.0;
    double mass_ = 0.0;
    double welfare_ = 0.0;
    std::vector<double> conf_;
};

template <typename Walk>
EvalReport monte_carlo(const Instance& instance, const MonteCarloConfig& config, Walk&& walk) {
    config.validate();
    const auto n = static_cast<std::size_t>(instance.size());
    std::vector<double> log_p(n), log_q(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = instance.agents()[i].prior;
        log_p[i] = p > 0.0 ? std::log(p) : 0.0;
        log_q[i] = p < 1.0 ? std::log1p(-p) : 0.0;
    }

    Rng rng(config.seed);
    std::unordered_set<std::string> seen;
    MassAccumulator acc(n);
    std::vector<std::uint8_t> bits(n);
    std::string key((n + 7) / 8, '\0');
    double sum = 0.0, sum_sq = 0.0;

    EvalReport report;
    report.method = EvalMethod::MonteCarlo;
    while (report.n_samples < config.max_samples) {
        std::fill(key.begin(), key.end(), '\0');
        double log_mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool healthy = rng.bernoulli(instance.agents()[i].prior);
            bits[i] = healthy ? 1 : 0;
            log_mass += healthy ? log_p[i] : log_q[i];
            if (healthy) key[i / 8] = static_cast<char>(key[i / 8] | (1 << (i % 8)));
        }
        ++report.n_samples;
        const HealthVector health(bits);
        const auto confirmed = walk(health);
        double welfare = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (confirmed[i]) welfare += instance.agents()[i].utility;
        }
        sum += welfare;
        sum_sq += welfare * welfare;

        if (seen.insert(key).second) {
            acc.add(log_mass, welfare, confirmed);
            if (acc.covered_mass() >= config.mass_threshold - 1e-12) break;
        }
    }

    const auto m = static_cast<double>(report.n_samples);
    report.n_realizations = seen.size();
    report.covered_mass = acc.covered_mass();
    report.raw_welfare = acc.raw_welfare();
    report.expected_welfare =
        config.normalize_by_covered_mass ? acc.normalized_welfare() : acc.raw_welfare();
    report.per_agent_confirmation.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        report.per_agent_confirmation[i] = acc.confirmation(i, config.normalize_by_covered_mass);
    }
    report.sample_mean = sum / m;
    if (report.n_samples > 1) {
        const double var = std::max(0.0, (sum_sq - sum * sum / m) / (m - 1.0));
        report.sample_std_error = std::sqrt(var / m);
    }
    return report;
}

}  // namespace

EvalReport evaluate_monte_carlo(const Instance& instance, const DynamicPlan& plan,
                                const MonteCarloConfig& config) {
    plan.check(instance);
    return monte_carlo(instance, config, [&](const HealthVector& health) {
        return realized_confirmations(instance, plan, health);
    });
}

EvalReport evaluate_monte_carlo(const Instance& instance, const PolicyFn& policy,
                                const MonteCarloConfig& config) {
    LazyNode root;
    std::vector<std::pair<const Pool*, Outcome>> path;
    const auto n = static_cast<std::size_t>(instance.size());
    return monte_carlo(instance, config, [&](const HealthVector& health) {
        std::vector<std::uint8_t> confirmed(n, 0);
        path.clear();
        LazyNode* node = &root;
        for (int step = 0; step < instance.budget(); ++step) {
            if (!node->resolved) {
                History history;
                for (const auto& [pool, outcome] : path) history.push_back(TestRecord{*pool, outcome});
                node->pool = policy(history);
                if (node->pool) node->pool->check(instance);
                node->resolved = true;
            }
            if (!node->pool) break;
            const Outcome outcome = health.test(*node->pool);
            if (outcome == Outcome::Negative) {
                for (AgentId id : *node->pool) confirmed[static_cast<std::size_t>(id)] = 1;
            }
            path.emplace_back(&*node->pool, outcome);
            auto& child = node->children[outcome == Outcome::Negative ? 0 : 1];
            if (!child) child = std::make_unique<LazyNode>();
            node = child.get();
        }
        return confirmed;
    });
}

}  // namespace poolwise
