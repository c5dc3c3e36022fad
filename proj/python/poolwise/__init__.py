"""Pooled testing planners, posterior inference and welfare evaluation.

Instances, plans, histories and reports are plain dicts/lists in the same
JSON layout the CLI reads and writes.
"""

import json

from . import _poolwise
from ._poolwise import (
    CapacityError,
    InconsistencyError,
    ParameterError,
    StateError,
    StructuralError,
)

__all__ = [
    "CapacityError",
    "InconsistencyError",
    "ParameterError",
    "StateError",
    "StructuralError",
    "best_single_test",
    "budget_sweep",
    "evaluate",
    "generate_instance",
    "greedy_step",
    "plan",
    "policies",
    "posterior",
    "run_experiment",
]


def _dump(value):
    return value if isinstance(value, str) else json.dumps(value)


def generate_instance(n, budget, pool_cap, values=None, seed=0):
    """Random instance; utilities from `values` when given, else uniform on [0, 1)."""
    return json.loads(_poolwise.generate_instance(n, budget, pool_cap, list(values or []), seed))


def plan(policy, instance, restarts=8, seed=0, inference="auto"):
    return json.loads(_poolwise.plan(policy, _dump(instance), restarts, seed, inference))


def evaluate(instance, plan, method="exact", mass_threshold=0.95, max_samples=100000, seed=0):
    return json.loads(
        _poolwise.evaluate(_dump(instance), _dump(plan), method, mass_threshold, max_samples, seed)
    )


def posterior(instance, history=(), inference="auto", gibbs=None):
    return json.loads(
        _poolwise.posterior(_dump(instance), _dump(list(history)), inference, _dump(gibbs) if gibbs else "")
    )


def greedy_step(instance, history=(), inference="auto"):
    return json.loads(_poolwise.greedy_step(_dump(instance), _dump(list(history)), inference))


def best_single_test(utilities, marginals, pool_cap):
    """Returns (pool as index list, value)."""
    return _poolwise.best_single_test(list(utilities), list(marginals), pool_cap)


def run_experiment(spec, jobs=1):
    """Returns (records, summary_csv, warnings)."""
    jsonl, csv, warnings = _poolwise.run_experiment(_dump(spec), jobs)
    records = [json.loads(line) for line in jsonl.splitlines() if line]
    return records, csv, list(warnings)


def budget_sweep(spec, budgets, jobs=1):
    return _poolwise.budget_sweep(_dump(spec), list(budgets), jobs)


def policies():
    return list(_poolwise.policies())
