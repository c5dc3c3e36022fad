#include <doctest.h>

#include "oracles.hpp"
#include "poolwise/evaluation.hpp"
#include "poolwise/planning.hpp"

using namespace poolwise;

namespace {

DynamicPlan example1_dynamic() {
    return DynamicPlan(make_node(Pool{0, 1}, make_node(Pool{2}, nullptr, nullptr),
                                 make_node(Pool{1}, nullptr, nullptr)));
}

std::vector<Pool> random_pools(const Instance& inst, Rng& rng, int count) {
    std::vector<Pool> pools;
    for (int b = 0; b < count; ++b) {
        std::vector<AgentId> ids(static_cast<std::size_t>(inst.size()));
        for (int i = 0; i < inst.size(); ++i) ids[static_cast<std::size_t>(i)] = i;
        rng.shuffle(std::span<AgentId>(ids));
        ids.resize(1 + rng.below(static_cast<std::uint64_t>(std::min(inst.size(), inst.pool_cap()))));
        pools.emplace_back(ids);
    }
    return pools;
}

}  // namespace

TEST_CASE("evaluate_exact golden values") {
    const auto ex1 = oracle::example1();
    const auto stat = evaluate_exact(ex1, DynamicPlan::from_static(std::vector<Pool>{Pool{0, 1}, Pool{1, 2}}));
    CHECK(std::abs(stat.expected_welfare - 0.2466) <= 1e-4);
    const auto dyn = evaluate_exact(ex1, example1_dynamic());
    CHECK(std::abs(dyn.expected_welfare - 0.2846) <= 1e-4);
    CHECK(dyn.expected_welfare / stat.expected_welfare - 1.0 == doctest::Approx(0.154).epsilon(0.01));
    CHECK(dyn.covered_mass == doctest::Approx(1.0));

    const auto ex2 = oracle::example2();
    const auto e2 = evaluate_exact(ex2, DynamicPlan::from_static(std::vector<Pool>{Pool{2}, Pool{0}}));
    CHECK(e2.expected_welfare == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(e2.per_agent_confirmation == std::vector<double>{0.5, 0.0, 1.0});

    const auto none = evaluate_exact(ex2, DynamicPlan{});
    CHECK(none.expected_welfare == 0.0);
    CHECK(none.per_agent_confirmation == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("evaluate_exact matches full enumeration") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 8;
        const auto inst = generate_instance(n, 1 + trial % 4, 1 + trial % 4, {}, 900 + static_cast<std::uint64_t>(trial));
        const auto pools = random_pools(inst, rng, inst.budget());
        const auto plan = DynamicPlan::from_static(pools);
        const auto rep = evaluate_exact(inst, plan);
        CHECK(rep.expected_welfare == doctest::Approx(oracle::plan_welfare(inst, plan)).epsilon(1e-12));
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += inst.utility(i) * rep.per_agent_confirmation[static_cast<std::size_t>(i)];
        CHECK(total == doctest::Approx(rep.expected_welfare).epsilon(1e-12));
        CHECK(rep.expected_welfare <= inst.total_utility() + 1e-12);
    }
    // dynamic trees from the planners
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = generate_instance(5, 3, 3, {}, 70 + static_cast<std::uint64_t>(trial));
        InferenceSettings s;
        s.mode = InferenceMode::Exact;
        const auto plan = greedy_dynamic_plan(inst, s);
        CHECK(evaluate_exact(inst, plan).expected_welfare ==
              doctest::Approx(oracle::plan_welfare(inst, plan)).epsilon(1e-12));
    }
}

TEST_CASE("disjoint closed form agrees with exact evaluation") {
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = generate_instance(8, 3, 3, {}, 40 + static_cast<std::uint64_t>(trial));
        const auto plan = greedy_non_overlapping_plan(inst);
        CHECK(disjoint_static_welfare(inst, plan.pools) ==
              doctest::Approx(evaluate_exact(inst, plan.to_plan()).expected_welfare).epsilon(1e-12));
    }
}

TEST_CASE("static welfare does not depend on pool order") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = generate_instance(6, 3, 3, {}, 140 + static_cast<std::uint64_t>(trial));
        auto pools = random_pools(inst, rng, 3);
        const double a = evaluate_exact(inst, DynamicPlan::from_static(pools)).expected_welfare;
        std::reverse(pools.begin(), pools.end());
        const double b = evaluate_exact(inst, DynamicPlan::from_static(pools)).expected_welfare;
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("evaluate_exact capacity") {
    const auto inst = generate_instance(24, 8, 3, {}, 1);
    std::vector<Pool> pools;
    for (int b = 0; b < 8; ++b) pools.push_back(Pool{3 * b, 3 * b + 1, 3 * b + 2});
    CHECK_THROWS_AS(evaluate_exact(inst, DynamicPlan::from_static(pools)), CapacityError);
    CHECK_NOTHROW(evaluate_exact(inst, DynamicPlan::from_static(pools), 24));
}

TEST_CASE("monte carlo equals exact with full coverage") {
    const auto ex1 = oracle::example1();
    MonteCarloConfig cfg;
    cfg.mass_threshold = 1.0;
    cfg.seed = 11;
    const auto mc = evaluate_monte_carlo(ex1, example1_dynamic(), cfg);
    CHECK(mc.covered_mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mc.expected_welfare == doctest::Approx(evaluate_exact(ex1, example1_dynamic()).expected_welfare).epsilon(1e-12));
    CHECK(mc.n_realizations == 4);  // B is always healthy
    CHECK(mc.method == EvalMethod::MonteCarlo);
}

TEST_CASE("monte carlo with degenerate priors sees one realization") {
    const Instance inst({{0, 1.0, 1.0}, {1, 2.0, 0.0}, {2, 3.0, 1.0}}, 2, 2);
    MonteCarloConfig cfg;
    cfg.seed = 4;
    const auto plan = DynamicPlan::from_static(std::vector<Pool>{Pool{0, 2}, Pool{1}});
    const auto mc = evaluate_monte_carlo(inst, plan, cfg);
    CHECK(mc.n_realizations == 1);
    CHECK(mc.n_samples == 1);
    CHECK(mc.expected_welfare == 4.0);
    CHECK(mc.raw_welfare == 4.0);
}

TEST_CASE("monte carlo tracks exact values") {
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = generate_instance(8, 3, 3, {}, 2000 + static_cast<std::uint64_t>(trial));
        InferenceSettings s;
        s.mode = InferenceMode::Exact;
        const auto plan = greedy_dynamic_plan(inst, s);
        const double exact = evaluate_exact(inst, plan).expected_welfare;
        MonteCarloConfig cfg;
        cfg.mass_threshold = 0.999;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const auto mc = evaluate_monte_carlo(inst, plan, cfg);
        CHECK(std::abs(mc.expected_welfare - exact) <= 0.01 * std::max(1.0, exact));
        const auto online = evaluate_monte_carlo(inst, greedy_online_policy(inst, s), cfg);
        CHECK(online.expected_welfare == doctest::Approx(mc.expected_welfare).epsilon(1e-12));
        CHECK(online.n_samples == mc.n_samples);
    }
}

TEST_CASE("monte carlo is reproducible and validates config") {
    const auto inst = generate_instance(20, 4, 4, {}, 6);
    const auto plan = greedy_non_overlapping_plan(inst).to_plan();
    MonteCarloConfig cfg;
    cfg.seed = 9;
    cfg.max_samples = 500;
    const auto a = evaluate_monte_carlo(inst, plan, cfg);
    const auto b = evaluate_monte_carlo(inst, plan, cfg);
    CHECK(a.expected_welfare == b.expected_welfare);
    CHECK(a.sample_mean == b.sample_mean);
    CHECK(a.n_samples <= 500);
    CHECK(a.sample_std_error >= 0.0);

    cfg.mass_threshold = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg.mass_threshold = 0.9;
    cfg.max_samples = 0;
    CHECK_THROWS_AS(evaluate_monte_carlo(inst, plan, cfg), ParameterError);
}
