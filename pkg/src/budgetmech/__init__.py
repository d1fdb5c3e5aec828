"""Budget-feasible procurement mechanisms with exact grid verification."""

from .domain import (
    CostGrid,
    GuardExceeded,
    Instance,
    OracleClassError,
    Ordering,
    Outcome,
    compare_ratio_to_phi,
    enumerate_profiles,
    ratio_below_phi,
    utility,
)
from .mechanisms import (
    Mechanism,
    TicketSpec,
    canonical_gt,
    canonical_ws,
    compute_w1,
    golden_mechanism,
    make_ticket_family,
    make_ticket_spec,
    max_or_willy_wonka,
    max_or_willy_wonka_constrained,
    mech_constant_reject,
    mech_golden,
    mech_moww,
    mech_moww_constrained,
    mech_mr,
    mech_posted_price,
    mech_willy_wonka,
    randomized_mr,
    willy_wonka,
    x1_select,
)
from .packing import (
    DP_SOLVER,
    EXACT_SOLVER,
    GREEDY_SOLVER,
    FeasibilityFamily,
    PackingSolution,
    Solver,
    agent_forcing_gap,
    opt_force,
    solve_additive_dp,
    solve_exact,
    solve_greedy_submodular,
)
from .valuation import (
    AdditiveValuation,
    TableValuation,
    check_class,
    make_additive,
    make_table,
    singleton_order,
)
from .verify import (
    CrosscheckReport,
    PreconditionFailed,
    PropertyReport,
    ThresholdCertificate,
    Witness,
    approx_ratio,
    characterization_crosscheck,
    check_bf,
    check_bnom_direct,
    check_ir,
    check_np,
    check_restricted_gt_payments,
    check_threshold_gt,
    check_threshold_ws,
    check_wnom_direct,
    expected_ratio_over_specs,
    make_mutant,
    outcome_table,
    reverify_witness,
    worst_case_ratio,
)

__all__ = [name for name in dir() if not name.startswith("_")]
