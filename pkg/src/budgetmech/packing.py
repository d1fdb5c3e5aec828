"""Budget-feasible packing: exact enumeration, knapsack DP, budgeted greedy, forcing gaps.

Every solver resolves value ties with one canonical strict total order --
higher cardinality first, then lexicographically smallest sorted member
tuple -- and always folds zero-cost agents into its output when that keeps
the solution feasible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .domain import GuardExceeded, Instance, OracleClassError, SetValuation
from .valuation import AdditiveValuation, check_class

EXACT_AGENT_CAP = 20
GAP_AGENT_CAP = 12


@dataclass(frozen=True)
class PackingSolution:
    chosen: frozenset[int]
    value: Fraction


@dataclass(frozen=True)
class FeasibilityFamily:
    """An explicit set of feasible subsets of ``range(n)``.

    The empty set must be a member so the packing problem is always feasible;
    downward closure is not assumed.
    """

    n: int
    subsets: frozenset[frozenset[int]]

    def __post_init__(self) -> None:
        if frozenset() not in self.subsets:
            raise ValueError("feasibility family must contain the empty set")
        for s in self.subsets:
            if any(not 0 <= i < self.n for i in s):
                raise ValueError(f"family member {set(s)} out of range for n={self.n}")

    @classmethod
    def from_iterable(cls, n: int, sets: Iterable[Iterable[int]]) -> "FeasibilityFamily":
        return cls(n, frozenset(frozenset(s) for s in sets))

    @classmethod
    def free(cls, n: int) -> "FeasibilityFamily":
        """The unrestricted family of all subsets (materialized; small n only)."""
        members = frozenset(
            frozenset(c)
            for r in range(n + 1)
            for c in itertools.combinations(range(n), r)
        )
        return cls(n, members)

    def contains(self, subset: frozenset[int]) -> bool:
        return subset in self.subsets


def canonical_prefers(a: frozenset[int], b: frozenset[int]) -> bool:
    """True if ``a`` precedes ``b`` in the canonical tie order."""
    if len(a) != len(b):
        return len(a) > len(b)
    return tuple(sorted(a)) < tuple(sorted(b))


def _improves(value: Fraction, chosen: frozenset[int], best: PackingSolution | None) -> bool:
    if best is None:
        return True
    if value != best.value:
        return value > best.value
    return canonical_prefers(chosen, best.chosen)


def _candidate_sets(
    n: int,
    family: FeasibilityFamily | None,
    universe: frozenset[int],
) -> Iterator[frozenset[int]]:
    if family is not None:
        for s in family.subsets:
            if s <= universe:
                yield s
    else:
        members = sorted(universe)
        for r in range(len(members) + 1):
            for combo in itertools.combinations(members, r):
                yield frozenset(combo)


def _zero_cost_pass(
    chosen: frozenset[int],
    instance: Instance,
    family: FeasibilityFamily | None,
    universe: frozenset[int],
    banned: frozenset[int] = frozenset(),
) -> frozenset[int]:
    """Fold in zero-cost agents one at a time while feasibility is preserved."""
    out = chosen
    for i in sorted(universe - banned):
        if instance.costs[i] != 0 or i in out:
            continue
        grown = out | {i}
        if family is None or family.contains(grown):
            out = grown
    return out


def _best_subset(
    instance: Instance,
    family: FeasibilityFamily | None,
    universe: frozenset[int],
    include: int | None = None,
    exclude: int | None = None,
) -> PackingSolution | None:
    v = instance.valuation
    best: PackingSolution | None = None
    for s in _candidate_sets(instance.n, family, universe):
        if include is not None and include not in s:
            continue
        if exclude is not None and exclude in s:
            continue
        if sum(instance.costs[i] for i in s) > instance.budget:
            continue
        val = v.value(s)
        if _improves(val, s, best):
            best = PackingSolution(s, val)
    if best is None:
        return None
    banned = frozenset() if exclude is None else frozenset((exclude,))
    chosen = _zero_cost_pass(best.chosen, instance, family, universe, banned)
    if chosen != best.chosen:
        best = PackingSolution(chosen, v.value(chosen))
    return best


def solve_exact(instance: Instance, family: FeasibilityFamily | None = None) -> PackingSolution:
    """Value-maximal budget- and family-feasible subset by full enumeration."""
    if instance.n > EXACT_AGENT_CAP:
        raise GuardExceeded(f"exact enumeration capped at {EXACT_AGENT_CAP} agents, got {instance.n}")
    if family is not None and family.n != instance.n:
        raise ValueError("family agent count does not match the instance")
    best = _best_subset(instance, family, frozenset(range(instance.n)))
    assert best is not None  # the empty set is always a candidate
    return best


def solve_additive_dp(instance: Instance) -> PackingSolution:
    """Exact knapsack by dynamic programming over budget ticks (additive oracles only).

    Matches ``solve_exact`` on both value and chosen set: the DP maximizes
    (value, cardinality) lexicographically per capacity, then reconstructs the
    member tuple greedily from the lowest agent index up.
    """
    v = instance.valuation
    if isinstance(v, AdditiveValuation):
        values = list(v.values)
    else:
        ok, _ = check_class(v, "additive")
        if not ok:
            raise OracleClassError("solve_additive_dp requires an additive valuation")
        values = [v.value((i,)) for i in range(instance.n)]

    n, budget, costs = instance.n, instance.budget, instance.costs
    zero = (Fraction(0), 0)
    suffix = [[zero] * (budget + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, nxt = suffix[i], suffix[i + 1]
        for w in range(budget + 1):
            best = nxt[w]
            if costs[i] <= w:
                rest = nxt[w - costs[i]]
                took = (values[i] + rest[0], 1 + rest[1])
                if took > best:
                    best = took
            row[w] = best

    chosen: set[int] = set()
    target, w = suffix[0][budget], budget
    for i in range(n):
        if costs[i] <= w:
            rest = suffix[i + 1][w - costs[i]]
            if (values[i] + rest[0], 1 + rest[1]) == target:
                chosen.add(i)
                target = rest
                w -= costs[i]
                continue
        target = suffix[i + 1][w]
    final = _zero_cost_pass(frozenset(chosen), instance, None, frozenset(range(n)))
    return PackingSolution(final, v.value(final))


def _greedy_extend(
    seed: frozenset[int],
    seed_cost: int,
    instance: Instance,
) -> frozenset[int]:
    """Extend a seed by marginal value per cost; zero-cost agents come free."""
    v = instance.valuation
    chosen = set(seed)
    spent = seed_cost
    for i in range(instance.n):
        if instance.costs[i] == 0 and i not in chosen:
            chosen.add(i)
    current = v.value(chosen)
    remaining = [i for i in range(instance.n) if i not in chosen]
    while True:
        best_i, best_ratio, best_gain = None, None, None
        for i in remaining:
            c = instance.costs[i]
            if spent + c > instance.budget:
                continue
            gain = v.value(chosen | {i}) - current
            if gain <= 0:
                continue
            ratio = Fraction(gain, c)
            if best_ratio is None or ratio > best_ratio:
                best_i, best_ratio, best_gain = i, ratio, gain
        if best_i is None:
            return frozenset(chosen)
        chosen.add(best_i)
        spent += instance.costs[best_i]
        current += best_gain
        remaining.remove(best_i)


def solve_greedy_submodular(instance: Instance) -> PackingSolution:
    """Budgeted submodular maximization: partial enumeration plus density greedy.

    Takes the better of (a) every feasible set of at most two agents and
    (b) the density-greedy completion of every feasible three-agent seed.
    Guarantees at least a 1 - 1/e fraction of the optimum for monotone
    submodular oracles.
    """
    v = instance.valuation
    ok, witness = check_class(v, "submodular")
    if not ok:
        raise OracleClassError(f"solve_greedy_submodular requires a submodular valuation; violated at {witness}")

    agents = range(instance.n)
    best: PackingSolution | None = None

    def consider(s: frozenset[int]) -> None:
        nonlocal best
        val = v.value(s)
        if _improves(val, s, best):
            best = PackingSolution(s, val)

    for r in (0, 1, 2):
        for combo in itertools.combinations(agents, r):
            s = frozenset(combo)
            cost = sum(instance.costs[i] for i in s)
            if cost <= instance.budget:
                consider(s)
    for combo in itertools.combinations(agents, 3):
        s = frozenset(combo)
        cost = sum(instance.costs[i] for i in s)
        if cost <= instance.budget:
            consider(_greedy_extend(s, cost, instance))

    assert best is not None
    final = _zero_cost_pass(best.chosen, instance, None, frozenset(agents))
    if final != best.chosen:
        best = PackingSolution(final, v.value(final))
    return best


@dataclass(frozen=True)
class Solver:
    """A packing subroutine with its declared approximation guarantee."""

    method: str
    gamma: Fraction

    def __post_init__(self) -> None:
        expected = {
            "exact_bruteforce": Fraction(1),
            "additive_dp": Fraction(1),
            "greedy_submodular": Fraction(159, 100),
        }
        if self.method not in expected:
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.gamma != expected[self.method]:
            raise ValueError(f"{self.method} must declare gamma={expected[self.method]}")

    def solve(self, instance: Instance, family: FeasibilityFamily | None = None) -> PackingSolution:
        if self.method == "exact_bruteforce":
            return solve_exact(instance, family)
        if family is not None:
            raise ValueError(f"{self.method} does not support feasibility families")
        if self.method == "additive_dp":
            return solve_additive_dp(instance)
        return solve_greedy_submodular(instance)


EXACT_SOLVER = Solver("exact_bruteforce", Fraction(1))
DP_SOLVER = Solver("additive_dp", Fraction(1))
GREEDY_SOLVER = Solver("greedy_submodular", Fraction(159, 100))


def opt_force(
    instance: Instance,
    family: FeasibilityFamily | None,
    agent: int,
    mode: str,
    universe: Iterable[int] | None = None,
) -> PackingSolution | None:
    """Best feasible subset of ``universe`` forced to include or exclude ``agent``.

    Returns ``None`` when no feasible subset satisfies the constraint (which
    can only happen in include mode).
    """
    if mode not in ("include", "exclude"):
        raise ValueError(f"mode must be 'include' or 'exclude', got {mode!r}")
    uni = frozenset(range(instance.n)) if universe is None else frozenset(universe)
    if not 0 <= agent < instance.n:
        raise IndexError(f"agent {agent} out of range")
    include = agent if mode == "include" else None
    exclude = agent if mode == "exclude" else None
    return _best_subset(instance, family, uni, include=include, exclude=exclude)


def _structural_instance(valuation: SetValuation, n: int) -> Instance:
    # All-zero costs with a zero budget: feasibility is purely the family's.
    return Instance(n, valuation, 0, (0,) * n)


def agent_forcing_gap(
    valuation: SetValuation,
    family: FeasibilityFamily | None,
    n: int,
) -> Fraction | float:
    """Worst multiplicative loss from forcing one agent into the family optimum.

    Computed cost-free over every subset universe S and every agent in S;
    returns ``math.inf`` when forcing some agent makes a positive optimum
    entirely infeasible (or worthless).
    """
    if n > GAP_AGENT_CAP:
        raise GuardExceeded(f"forcing-gap enumeration capped at {GAP_AGENT_CAP} agents, got {n}")
    if family is None:
        return Fraction(1)  # monotone oracles lose nothing when the family is unrestricted
    inst = _structural_instance(valuation, n)
    gap = Fraction(1)
    for mask in range(1, 2**n):
        universe = frozenset(i for i in range(n) if mask >> i & 1)
        base = _best_subset(inst, family, universe)
        if base is None or base.value == 0:
            continue
        for i in sorted(universe):
            forced = _best_subset(inst, family, universe, include=i)
            if forced is None or forced.value == 0:
                return math.inf
            ratio = base.value / forced.value
            if ratio > gap:
                gap = ratio
    return gap
