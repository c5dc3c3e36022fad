import pytest

import poolwise

EXAMPLE1 = {
    "agents": [
        {"id": 0, "u": 0.129, "p": 0.5562},
        {"id": 1, "u": 0.17483, "p": 1.0},
        {"id": 2, "u": 0.569, "p": 0.12},
    ],
    "B": 2,
    "G": 3,
}

EXAMPLE2 = {
    "agents": [{"id": 0, "u": 1, "p": 0.5}, {"id": 1, "u": 1, "p": 0.5}, {"id": 2, "u": 1, "p": 1.0}],
    "B": 2,
    "G": 3,
}


def test_policies_listed():
    assert "GreedyDynamic" in poolwise.policies()
    assert len(poolwise.policies()) == 7


def test_generate_is_deterministic():
    a = poolwise.generate_instance(6, 3, 3, seed=11)
    assert a == poolwise.generate_instance(6, 3, 3, seed=11)
    assert len(a["agents"]) == 6
    d = poolwise.generate_instance(20, 3, 3, values=[1, 2, 3], seed=2)
    assert {x["u"] for x in d["agents"]} <= {1, 2, 3}


def test_example1_goldens():
    static = {"pool": [0, 1], "neg": {"pool": [1, 2], "neg": None, "pos": None},
              "pos": {"pool": [1, 2], "neg": None, "pos": None}}
    assert poolwise.evaluate(EXAMPLE1, static)["expected_welfare"] == pytest.approx(0.2466, abs=1e-4)
    opt = poolwise.plan("OptimalDynamic", EXAMPLE1)
    assert opt["pool"] == [0, 1]
    assert opt["pos"]["pool"] == [1]
    assert opt["neg"]["pool"] == [2]
    assert poolwise.evaluate(EXAMPLE1, opt)["expected_welfare"] == pytest.approx(0.2846, abs=1e-4)


def test_example2_greedy_gap():
    greedy = poolwise.plan("greedy_dynamic", EXAMPLE2, inference="exact")
    assert poolwise.evaluate(EXAMPLE2, greedy)["expected_welfare"] == pytest.approx(1.5, abs=1e-12)
    opt = poolwise.plan("optimal-dynamic", EXAMPLE2)
    assert poolwise.evaluate(EXAMPLE2, opt)["expected_welfare"] == pytest.approx(1.75, abs=1e-12)
    mc = poolwise.evaluate(EXAMPLE2, opt, method="mc", mass_threshold=0.95, seed=5)
    assert abs(mc["expected_welfare"] - 1.75) <= 0.05


def test_posterior_and_greedy_step():
    hist = [{"pool": [0, 1], "result": "pos"}]
    b = poolwise.posterior(EXAMPLE1, hist)
    assert b["confirmed_infected"] == [0]
    assert b["marginals"][1] == 1.0
    step = poolwise.greedy_step(EXAMPLE1, hist)
    assert 1 in step["pool"]
    g = poolwise.posterior(EXAMPLE2, [{"pool": [0, 1], "result": "pos"}], inference="gibbs",
                           gibbs={"seed": 3})
    assert g["method"] == "gibbs"
    assert g["marginals"][0] == pytest.approx(1 / 3, abs=0.02)


def test_best_single_test():
    pool, value = poolwise.best_single_test([1, 1, 1], [0.5, 0.5, 1.0], 3)
    assert pool == [2]
    assert value == 1.0


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        poolwise.plan("milp", EXAMPLE1)
    with pytest.raises(poolwise.InconsistencyError):
        poolwise.posterior(EXAMPLE1, [{"pool": [1], "result": "pos"}])
    with pytest.raises(poolwise.CapacityError):
        poolwise.plan("OptimalDynamic", poolwise.generate_instance(9, 2, 3))


def test_run_experiment():
    spec = {"name": "smoke", "N": 3, "B": 2, "G": 3, "n_instances": 10, "policies": "all", "base_seed": 4}
    records, csv, warnings = poolwise.run_experiment(spec)
    assert not warnings
    assert len(records) == 70
    assert csv.startswith("policy,mean_welfare")
    again, csv2, _ = poolwise.run_experiment(spec, jobs=2)
    assert again == records and csv2 == csv
    sweep = poolwise.budget_sweep(spec, [1, 2])
    assert sweep.count("\n") == 15
