"""Exhaustive grid checkers for incentive properties, thresholds, and ratios.

Every sup/inf in the property definitions is an attained max/min on the finite
cost grid, so all checks are exact equality tests.  Failed checks carry a
witness that re-verifies with direct mechanism calls; mutant mechanisms give
each checker a negative control.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .domain import (
    CostGrid,
    GuardExceeded,
    Instance,
    Outcome,
    SetValuation,
    Ticks,
    enumerate_profiles,
    utility,
)
from .mechanisms import Mechanism, TicketSpec, _willy_wonka_core, randomized_mr
from .packing import EXACT_SOLVER, FeasibilityFamily, solve_exact

TABLE_PROFILE_CAP = 200_000

MUTATIONS = (
    "no_golden_ticket",
    "no_wooden_spoon",
    "underpay",
    "consolation",
    "capped_gt",
    "double_B",
    "always_select_all",
)

MechanismFn = Callable[[Instance], Outcome]


@dataclass(frozen=True)
class Witness:
    """A counterexample point: who, with which true cost, declared what, against whom."""

    agent: int | None
    true_cost: Ticks | None
    declared: Ticks | None
    profile: tuple[Ticks, ...]


@dataclass(frozen=True)
class PropertyReport:
    prop: str
    holds: bool
    witness: Witness | None
    profiles_scanned: int


@dataclass(frozen=True)
class ThresholdCertificate:
    """Per-agent threshold and which boundary disjunct held at it."""

    thresholds: tuple[Ticks, ...]
    boundary: tuple[str, ...]


@dataclass(frozen=True)
class EquivalenceLine:
    name: str
    direct: bool
    structural: bool

    @property
    def agree(self) -> bool:
        return self.direct == self.structural


@dataclass(frozen=True)
class CrosscheckReport:
    lines: tuple[EquivalenceLine, ...]
    skipped: tuple[str, ...]

    @property
    def all_agree(self) -> bool:
        return all(line.agree for line in self.lines)


class PreconditionFailed(Exception):
    """A crosscheck precondition property does not hold for this mechanism."""

    def __init__(self, prop: str):
        super().__init__(f"precondition property {prop!r} fails; refusing the crosscheck")
        self.prop = prop


def outcome_table(
    mech: MechanismFn,
    valuation: SetValuation,
    grid: CostGrid,
    n: int,
    jobs: int = 1,
) -> dict[tuple[Ticks, ...], Outcome]:
    """Evaluate the mechanism on every grid profile once, in scan order."""
    count = grid.profile_count(n)
    if count > TABLE_PROFILE_CAP:
        raise GuardExceeded(f"grid scan needs {count} profiles, cap is {TABLE_PROFILE_CAP}")
    profiles = list(enumerate_profiles(grid, n))
    budget = grid.budget
    if jobs <= 1:
        return {c: mech(Instance(n, valuation, budget, c)) for c in profiles}
    size = (len(profiles) + jobs - 1) // jobs
    chunks = [profiles[i : i + size] for i in range(0, len(profiles), size)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = pool.map(
            lambda chunk: [mech(Instance(n, valuation, budget, c)) for c in chunk], chunks
        )
    table: dict[tuple[Ticks, ...], Outcome] = {}
    for chunk, outs in zip(chunks, results):
        table.update(zip(chunk, outs))
    return table


@dataclass
class _PaymentStats:
    """Payment extremes per (agent, declared cost), split by selection status.

    ``None`` marks an empty branch (for example, never selected at that
    declaration).  Arg profiles keep the first attaining profile in scan order.
    """

    sel_max: list[list[Ticks | None]]
    sel_min: list[list[Ticks | None]]
    rej_max: list[list[Ticks | None]]
    rej_min: list[list[Ticks | None]]
    sel_max_arg: list[list[tuple[Ticks, ...] | None]]
    sel_min_arg: list[list[tuple[Ticks, ...] | None]]
    rej_max_arg: list[list[tuple[Ticks, ...] | None]]
    rej_min_arg: list[list[tuple[Ticks, ...] | None]]

    def max_any(self, i: int, d: Ticks) -> Ticks:
        vals = [v for v in (self.sel_max[i][d], self.rej_max[i][d]) if v is not None]
        return max(vals)

    def min_any(self, i: int, d: Ticks) -> Ticks:
        vals = [v for v in (self.sel_min[i][d], self.rej_min[i][d]) if v is not None]
        return min(vals)


def _payment_stats(table: Mapping[tuple[Ticks, ...], Outcome], n: int, k: int) -> _PaymentStats:
    def grid_none() -> list[list[Ticks | None]]:
        return [[None] * (k + 1) for _ in range(n)]

    stats = _PaymentStats(
        grid_none(), grid_none(), grid_none(), grid_none(),
        grid_none(), grid_none(), grid_none(), grid_none(),
    )
    for profile, out in table.items():
        for i in range(n):
            d = profile[i]
            p = out.payments[i]
            if out.allocation[i]:
                if stats.sel_max[i][d] is None or p > stats.sel_max[i][d]:
                    stats.sel_max[i][d] = p
                    stats.sel_max_arg[i][d] = profile
                if stats.sel_min[i][d] is None or p < stats.sel_min[i][d]:
                    stats.sel_min[i][d] = p
                    stats.sel_min_arg[i][d] = profile
            else:
                if stats.rej_max[i][d] is None or p > stats.rej_max[i][d]:
                    stats.rej_max[i][d] = p
                    stats.rej_max_arg[i][d] = profile
                if stats.rej_min[i][d] is None or p < stats.rej_min[i][d]:
                    stats.rej_min[i][d] = p
                    stats.rej_min_arg[i][d] = profile
    return stats


def _ensure_table(mech, valuation, grid, n, table, jobs=1):
    if table is None:
        return outcome_table(mech, valuation, grid, n, jobs=jobs)
    return table


def check_ir(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> PropertyReport:
    """Selected agents are paid at least their declared cost, on every profile."""
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    for profile, out in table.items():
        for i in range(n):
            if out.payments[i] < profile[i] * out.allocation[i]:
                return PropertyReport("ir", False, Witness(i, None, profile[i], profile), len(table))
    return PropertyReport("ir", True, None, len(table))


def check_np(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> PropertyReport:
    """Unselected agents are paid nothing, on every profile."""
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    for profile, out in table.items():
        for i in range(n):
            if not out.allocation[i] and out.payments[i] != 0:
                return PropertyReport("np", False, Witness(i, None, profile[i], profile), len(table))
    return PropertyReport("np", True, None, len(table))


def check_bf(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> PropertyReport:
    """Total payments never exceed the budget."""
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    for profile, out in table.items():
        if out.total_payment() > grid.budget:
            return PropertyReport("bf", False, Witness(None, None, None, profile), len(table))
    return PropertyReport("bf", True, None, len(table))


def _sup_utility(stats: _PaymentStats, i: int, d: Ticks, t: Ticks):
    """Best-case utility of agent i with true cost t when declaring d, plus arg profile."""
    best = None
    arg = None
    if stats.rej_max[i][d] is not None:
        best = Fraction(stats.rej_max[i][d])
        arg = stats.rej_max_arg[i][d]
    if stats.sel_max[i][d] is not None:
        cand = Fraction(stats.sel_max[i][d] - t)
        if best is None or cand > best:
            best, arg = cand, stats.sel_max_arg[i][d]
    return best, arg


def _inf_utility(stats: _PaymentStats, i: int, d: Ticks, t: Ticks):
    """Worst-case utility of agent i with true cost t when declaring d, plus arg profile."""
    worst = None
    arg = None
    if stats.rej_min[i][d] is not None:
        worst = Fraction(stats.rej_min[i][d])
        arg = stats.rej_min_arg[i][d]
    if stats.sel_min[i][d] is not None:
        cand = Fraction(stats.sel_min[i][d] - t)
        if worst is None or cand < worst:
            worst, arg = cand, stats.sel_min_arg[i][d]
    return worst, arg


def check_bnom_direct(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> PropertyReport:
    """Truth-telling maximizes the best-case utility, for every true cost and misreport.

    The witness profile is the opponents' profile where the misreport attains
    its best case; re-verification compares one call there against a rescan of
    the truthful best case.
    """
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    stats = _payment_stats(table, n, grid.k)
    for i in range(n):
        for t in grid.points():
            truth_sup, _ = _sup_utility(stats, i, t, t)
            for d in grid.points():
                if d == t:
                    continue
                lie_sup, lie_arg = _sup_utility(stats, i, d, t)
                if lie_sup is not None and (truth_sup is None or truth_sup < lie_sup):
                    return PropertyReport(
                        "bnom", False, Witness(i, t, d, lie_arg), len(table)
                    )
    return PropertyReport("bnom", True, None, len(table))


def check_wnom_direct(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> PropertyReport:
    """Truth-telling maximizes the worst-case utility, for every true cost and misreport.

    The witness profile is the opponents' profile where truth-telling attains
    its worst case; re-verification compares one call there against a rescan of
    the misreport's worst case.
    """
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    stats = _payment_stats(table, n, grid.k)
    for i in range(n):
        for t in grid.points():
            truth_inf, truth_arg = _inf_utility(stats, i, t, t)
            for d in grid.points():
                if d == t:
                    continue
                lie_inf, _ = _inf_utility(stats, i, d, t)
                if truth_inf < lie_inf:
                    return PropertyReport(
                        "wnom", False, Witness(i, t, d, truth_arg), len(table)
                    )
    return PropertyReport("wnom", True, None, len(table))


def check_threshold_gt(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> tuple[PropertyReport, ThresholdCertificate | None]:
    """Search per agent for a golden-ticket threshold: never selected above it,
    maximum payment exactly the threshold below it, and one of the two at it."""
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    stats = _payment_stats(table, n, grid.k)
    k = grid.k
    thresholds: list[Ticks] = []
    boundary: list[str] = []
    for i in range(n):
        found = None
        for b in range(k + 1):
            never_above = all(stats.sel_max[i][d] is None for d in range(b + 1, k + 1))
            pays_below = all(stats.max_any(i, d) == b for d in range(b))
            at_pay = stats.max_any(i, b) == b
            at_never = stats.sel_max[i][b] is None
            if never_above and pays_below and (at_pay or at_never):
                found = (b, "max-payment" if at_pay else "never-selected")
                break
        if found is None:
            report = PropertyReport("threshold_gt", False, Witness(i, None, None, ()), len(table))
            return report, None
        thresholds.append(found[0])
        boundary.append(found[1])
    cert = ThresholdCertificate(tuple(thresholds), tuple(boundary))
    return PropertyReport("threshold_gt", True, None, len(table)), cert


def check_restricted_gt_payments(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> PropertyReport:
    """Every declaration either never wins (and the global best payment is at most
    the declaration) or can win the global best payment outright."""
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    stats = _payment_stats(table, n, grid.k)
    for i in range(n):
        global_max = max(stats.max_any(i, d) for d in grid.points())
        arg = None
        for d in grid.points():
            if stats.max_any(i, d) == global_max:
                arg = stats.sel_max_arg[i][d] if stats.sel_max[i][d] == global_max else stats.rej_max_arg[i][d]
                break
        for d in grid.points():
            never_selected = stats.sel_max[i][d] is None
            if never_selected and global_max <= d:
                continue
            if not never_selected and stats.sel_max[i][d] == global_max:
                continue
            return PropertyReport(
                "restricted_gt", False, Witness(i, None, d, arg or ()), len(table)
            )
    return PropertyReport("restricted_gt", True, None, len(table))


def check_threshold_ws(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> tuple[PropertyReport, ThresholdCertificate | None]:
    """Search per agent for a wooden-spoon threshold: rejectable above it, always
    selected at minimum payment exactly the threshold below it, one of the two at it."""
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    stats = _payment_stats(table, n, grid.k)
    k = grid.k
    thresholds: list[Ticks] = []
    boundary: list[str] = []
    for i in range(n):
        found = None
        for w in range(k + 1):
            rejectable_above = all(stats.rej_min[i][d] is not None for d in range(w + 1, k + 1))
            pinned_below = all(
                stats.rej_min[i][d] is None and stats.sel_min[i][d] == w for d in range(w)
            )
            at_pay = stats.min_any(i, w) == w
            at_reject = stats.rej_min[i][w] is not None
            if rejectable_above and pinned_below and (at_pay or at_reject):
                found = (w, "min-payment" if at_pay else "sometimes-rejected")
                break
        if found is None:
            report = PropertyReport("threshold_ws", False, Witness(i, None, None, ()), len(table))
            return report, None
        thresholds.append(found[0])
        boundary.append(found[1])
    cert = ThresholdCertificate(tuple(thresholds), tuple(boundary))
    return PropertyReport("threshold_ws", True, None, len(table)), cert


def characterization_crosscheck(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    table=None, jobs: int = 1,
) -> CrosscheckReport:
    """Assert the grid equivalences between the direct incentive definitions and
    their threshold characterizations.

    Requires normalized payments throughout; the threshold equivalences
    additionally require individual rationality and are skipped without it.
    Any disagreement indicates a bug in this artifact, not in the mechanism.
    """
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    if not check_np(mech, valuation, grid, n, table).holds:
        raise PreconditionFailed("np")
    ir_ok = check_ir(mech, valuation, grid, n, table).holds

    bnom = check_bnom_direct(mech, valuation, grid, n, table)
    wnom = check_wnom_direct(mech, valuation, grid, n, table)
    rgt = check_restricted_gt_payments(mech, valuation, grid, n, table)

    lines = [EquivalenceLine("bnom<->restricted_gt_payments", bnom.holds, rgt.holds)]
    skipped: tuple[str, ...] = ()
    if ir_ok:
        tgt, _ = check_threshold_gt(mech, valuation, grid, n, table)
        tws, _ = check_threshold_ws(mech, valuation, grid, n, table)
        lines.append(EquivalenceLine("bnom<->threshold_gt", bnom.holds, tgt.holds))
        lines.append(EquivalenceLine("wnom<->threshold_ws", wnom.holds, tws.holds))
    else:
        skipped = ("bnom<->threshold_gt (needs ir)", "wnom<->threshold_ws (needs ir)")
    return CrosscheckReport(tuple(lines), skipped)


def approx_ratio(
    mech: MechanismFn, instance: Instance, family: FeasibilityFamily | None = None
) -> Fraction | float:
    """Optimal value over achieved value; +inf when the mechanism scores zero
    against a positive optimum, 1 when both are zero."""
    out = mech(instance)
    achieved = instance.valuation.value(out.selected())
    best = solve_exact(instance, family).value
    if achieved == 0:
        return Fraction(1) if best == 0 else math.inf
    return best / achieved


def worst_case_ratio(
    mech: MechanismFn, valuation: SetValuation, grid: CostGrid, n: int,
    family: FeasibilityFamily | None = None, table=None, jobs: int = 1,
) -> tuple[Fraction | float, tuple[Ticks, ...]]:
    """Maximum of the approximation ratio over every grid profile, with arg-max."""
    table = _ensure_table(mech, valuation, grid, n, table, jobs)
    worst: Fraction | float = Fraction(0)
    arg: tuple[Ticks, ...] = ()
    for profile, out in table.items():
        achieved = valuation.value(out.selected())
        best = solve_exact(Instance(n, valuation, grid.budget, profile), family).value
        if achieved == 0:
            ratio: Fraction | float = Fraction(1) if best == 0 else math.inf
        else:
            ratio = best / achieved
        if ratio > worst:
            worst, arg = ratio, profile
    return worst, arg


def expected_ratio_over_specs(
    specs: Iterable[TicketSpec],
    valuation: SetValuation,
    profile: tuple[Ticks, ...],
    solver=None,
) -> Fraction | float:
    """Optimal value over the mean achieved value across one profile's spec draws."""
    solver = solver or EXACT_SOLVER
    specs = list(specs)
    n = specs[0].n
    budget = specs[0].k
    inst = Instance(n, valuation, budget, profile)
    best = solve_exact(inst).value
    total = Fraction(0)
    for spec in specs:
        out = randomized_mr(inst, spec, solver)
        total += valuation.value(out.selected())
    mean = total / len(specs)
    if mean == 0:
        return Fraction(1) if best == 0 else math.inf
    return best / mean


def make_mutant(base: Mechanism, mutation: str) -> Mechanism:
    """Wrap or rebuild a mechanism with one named defect, as a negative control."""
    if mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}")
    name = f"{base.name}+{mutation}"

    if mutation in ("no_golden_ticket", "no_wooden_spoon", "capped_gt"):
        if base.kind != "willy_wonka":
            raise ValueError(f"{mutation} is a structural edit of willy_wonka only")
        solver = base.solver
        assert solver is not None
        opts = {
            "no_golden_ticket": dict(use_gt=False),
            "no_wooden_spoon": dict(use_ws=False),
            "capped_gt": dict(gt_cap=1),
        }[mutation]
        fn = lambda inst: _willy_wonka_core(inst, solver, **opts)
        return Mechanism(name, base.valuation_class, fn, kind="mutant", solver=solver)

    if mutation == "underpay":
        def fn(inst: Instance) -> Outcome:
            out = base(inst)
            p = tuple(
                max(0, inst.costs[i] - 1) if out.allocation[i] else out.payments[i]
                for i in range(inst.n)
            )
            return Outcome(out.allocation, p)
    elif mutation == "consolation":
        def fn(inst: Instance) -> Outcome:
            out = base(inst)
            if not out.allocation[0]:
                return Outcome(out.allocation, (1,) + out.payments[1:])
            return out
    elif mutation == "double_B":
        def fn(inst: Instance) -> Outcome:
            if inst.n < 2:
                raise ValueError("double_B needs at least two agents")
            out = base(inst)
            if all(c == 0 for c in inst.costs):
                x = (1, 1) + out.allocation[2:]
                p = (inst.budget, inst.budget) + out.payments[2:]
                return Outcome(x, p)
            return out
    else:  # always_select_all
        def fn(inst: Instance) -> Outcome:
            return Outcome((1,) * inst.n, inst.costs)

    return Mechanism(name, base.valuation_class, fn, kind="mutant", solver=base.solver)


def reverify_witness(
    report: PropertyReport,
    mech: MechanismFn,
    valuation: SetValuation,
    grid: CostGrid,
    n: int,
) -> bool:
    """Confirm a failure witness with fresh mechanism calls, one per quantifier point."""
    if report.holds or report.witness is None:
        return False
    w = report.witness
    budget = grid.budget

    def call(profile: tuple[Ticks, ...]) -> Outcome:
        return mech(Instance(n, valuation, budget, profile))

    if report.prop == "ir":
        out = call(w.profile)
        return out.payments[w.agent] < w.profile[w.agent] * out.allocation[w.agent]
    if report.prop == "np":
        out = call(w.profile)
        return not out.allocation[w.agent] and out.payments[w.agent] > 0
    if report.prop == "bf":
        return call(w.profile).total_payment() > budget
    if report.prop == "bnom":
        lie_u = utility(w.true_cost, call(w.profile), w.agent)
        truth_sup = max(
            utility(w.true_cost, call(_insert(rest, w.agent, w.true_cost)), w.agent)
            for rest in enumerate_profiles(grid, n - 1)
        ) if n > 1 else utility(w.true_cost, call((w.true_cost,)), w.agent)
        return lie_u > truth_sup
    if report.prop == "wnom":
        truth_u = utility(w.true_cost, call(w.profile), w.agent)
        lie_inf = min(
            utility(w.true_cost, call(_insert(rest, w.agent, w.declared)), w.agent)
            for rest in enumerate_profiles(grid, n - 1)
        ) if n > 1 else utility(w.true_cost, call((w.declared,)), w.agent)
        return lie_inf > truth_u
    raise ValueError(f"no re-verification rule for property {report.prop!r}")


def _insert(rest: tuple[Ticks, ...], i: int, value: Ticks) -> tuple[Ticks, ...]:
    return rest[:i] + (value,) + rest[i:]
