"""Shared test helpers: independent brute-force oracles and battery generators.

The oracles here deliberately avoid the library's solver machinery (no
canonical tie order, no zero-cost pass) so they can serve as independent
ground truth for derived expected values.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from budgetmech.domain import Instance, SetValuation
from budgetmech.packing import FeasibilityFamily
from budgetmech.valuation import random_subadditive


def brute_best_value(
    valuation: SetValuation,
    costs: tuple[int, ...],
    budget: int,
    family: FeasibilityFamily | None = None,
    include: int | None = None,
    exclude: int | None = None,
) -> Fraction:
    """Plain enumeration of the best feasible set's value."""
    n = len(costs)
    best = Fraction(0)
    for r in range(n + 1):
        for combo in itertools.combinations(range(n), r):
            s = frozenset(combo)
            if family is not None and s not in family.subsets:
                continue
            if include is not None and include not in s:
                continue
            if exclude is not None and exclude in s:
                continue
            if sum(costs[i] for i in s) > budget:
                continue
            value = valuation.value(s)
            if value > best:
                best = value
    return best


def random_instances(n: int, k: int, count: int, seed: int):
    """Random subadditive-table instances with uniform grid costs."""
    rng = random.Random(seed)
    for _ in range(count):
        v = random_subadditive(n, rng)
        costs = tuple(rng.randrange(k + 1) for _ in range(n))
        yield Instance(n, v, k, costs)
