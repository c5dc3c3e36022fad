#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "poolwise/planning.hpp"

namespace poolwise {

namespace {

constexpr std::array kPolicyNames = {
    std::pair{PolicyKind::NonPooled, "NonPooled"},
    std::pair{PolicyKind::GreedyNonOverlapping, "GreedyNonOverlapping"},
    std::pair{PolicyKind::ExactNonOverlapping, "ExactNonOverlapping"},
    std::pair{PolicyKind::ExactOverlappingStatic, "ExactOverlappingStatic"},
    std::pair{PolicyKind::StaticLocalSearch, "StaticLocalSearch"},
    std::pair{PolicyKind::GreedyDynamic, "GreedyDynamic"},
    std::pair{PolicyKind::OptimalDynamic, "OptimalDynamic"},
};

constexpr std::array kAllPolicies = {
    PolicyKind::NonPooled,          PolicyKind::GreedyNonOverlapping,
    PolicyKind::ExactNonOverlapping, PolicyKind::ExactOverlappingStatic,
    PolicyKind::StaticLocalSearch,  PolicyKind::GreedyDynamic,
    PolicyKind::OptimalDynamic,
};

}  // namespace

std::string to_string(PolicyKind kind) {
    for (const auto& [k, name] : kPolicyNames) {
        if (k == kind) return name;
    }
    return "Unknown";
}

PolicyKind policy_from_string(const std::string& name) {
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
            return c == '-' || c == '_' ? ' ' : static_cast<char>(std::tolower(c));
        });
        s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
        return s;
    };
    const auto wanted = lower(name);
    for (const auto& [k, n] : kPolicyNames) {
        if (lower(n) == wanted) return k;
    }
    throw ParameterError("unknown policy \"" + name + "\"");
}

std::span<const PolicyKind> all_policies() { return kAllPolicies; }

bool preferred(double value_a, const Pool& a, double value_b, const Pool& b) {
    const double tol = kTieTolerance * std::max({1.0, std::abs(value_a), std::abs(value_b)});
    if (value_a > value_b + tol) return true;
    if (value_b > value_a + tol) return false;
    if (a.size() != b.size()) return a.size() < b.size();
    return a.members() < b.members();
}

namespace {

class SingleTestSearch {
public:
    SingleTestSearch(std::span<const Candidate> candidates, int pool_cap)
        : items_(candidates.begin(), candidates.end()),
          cap_(std::min<int>(pool_cap, static_cast<int>(candidates.size()))) {
        // Highest marginal first: the next m items of any suffix then carry the
        // suffix's m largest marginals, which the bound relies on.
        std::sort(items_.begin(), items_.end(), [](const Candidate& a, const Candidate& b) {
            return a.marginal != b.marginal ? a.marginal > b.marginal : a.id < b.id;
        });
        const std::size_t n = items_.size();
        const auto k = static_cast<std::size_t>(cap_);
        suffix_top_u_.assign((n + 1) * k, 0.0);
        for (std::size_t s = n; s-- > 0;) {
            // top-k utilities of items_[s..n) from those of items_[s+1..n)
            const double* next = &suffix_top_u_[(s + 1) * k];
            double* cur = &suffix_top_u_[s * k];
            const double u = items_[s].utility;
            std::size_t from = 0;
            bool placed = false;
            for (std::size_t r = 0; r < k; ++r) {
                if (!placed && u >= next[from]) {
                    cur[r] = u;
                    placed = true;
                } else {
                    cur[r] = next[from++];
                }
            }
        }
    }

    SingleTest run() {
        members_.reserve(static_cast<std::size_t>(cap_));
        descend(0, 1.0, 0.0);
        return SingleTest{Pool(best_ids_), best_value_};
    }

private:
    double bound(std::size_t start, double prod, double sum, int room) const {
        const std::size_t k = static_cast<std::size_t>(cap_);
        double q = 1.0, u = sum, best = 0.0;
        for (int m = 0; m < room && start + static_cast<std::size_t>(m) < items_.size(); ++m) {
            q *= items_[start + static_cast<std::size_t>(m)].marginal;
            u += suffix_top_u_[start * k + static_cast<std::size_t>(m)];
            best = std::max(best, q * u);
        }
        return prod * best;
    }

    void consider(double value) {
        std::vector<AgentId> ids;
        ids.reserve(members_.size());
        for (auto idx : members_) ids.push_back(items_[idx].id);
        std::sort(ids.begin(), ids.end());
        if (!have_best_ || better(value, ids)) {
            best_value_ = value;
            best_ids_ = std::move(ids);
            have_best_ = true;
        }
    }

    bool better(double value, const std::vector<AgentId>& ids) const {
        const double tol = kTieTolerance * std::max({1.0, std::abs(value), std::abs(best_value_)});
        if (value > best_value_ + tol) return true;
        if (best_value_ > value + tol) return false;
        if (ids.size() != best_ids_.size()) return ids.size() < best_ids_.size();
        return ids < best_ids_;
    }

    void descend(std::size_t start, double prod, double sum) {
        const int room = cap_ - static_cast<int>(members_.size());
        if (room == 0) return;
        for (std::size_t i = start; i < items_.size(); ++i) {
            if (have_best_) {
                const double tol = kTieTolerance * std::max(1.0, std::abs(best_value_));
                if (bound(i, prod, sum, room) < best_value_ - tol) return;
            }
            const double p = prod * items_[i].marginal;
            const double s = sum + items_[i].utility;
            members_.push_back(i);
            consider(p * s);
            descend(i + 1, p, s);
            members_.pop_back();
        }
    }

    std::vector<Candidate> items_;
    int cap_;
    std::vector<double> suffix_top_u_;
    std::vector<std::size_t> members_;
    bool have_best_ = false;
    double best_value_ = 0.0;
    std::vector<AgentId> best_ids_;
};

}  // namespace

SingleTest best_single_test(std::span<const Candidate> candidates, int pool_cap) {
    if (candidates.empty()) throw ParameterError("best_single_test: no candidates");
    if (pool_cap < 1) throw ParameterError("best_single_test: pool cap must be >= 1");
    for (const auto& c : candidates) {
        if (!(c.marginal >= 0.0 && c.marginal <= 1.0) || !(c.utility >= 0.0)) {
            throw ParameterError("best_single_test: candidate " + std::to_string(c.id) +
                                 " has an invalid utility or marginal");
        }
    }
    return SingleTestSearch(candidates, pool_cap).run();
}

}  // namespace poolwise
