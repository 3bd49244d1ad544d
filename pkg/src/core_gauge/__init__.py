"""core_gauge: measure the core of random transferable-utility assignment markets.

Pipeline: sample a typed market, compute the maximum-weight matching, build
the price constraint system characterizing stable payoff splits, bound each
type-pair price interval, and average the interval widths into the core-size
metric. Monte Carlo harnesses reproduce the scaling behaviour of that metric
at desk scale.
"""

from .errors import (
    CapabilityError,
    ConfigurationError,
    CoreGaugeError,
    InternalInconsistencyError,
    UsageError,
)
from .market import (
    MarketConfig,
    MarketRealization,
    TruncatedBeta,
    Uniform01,
    check_assumption_linear_growth,
    check_assumption_no_balanced_submarket,
    match_value,
    phi_matrix,
    sample_market,
)
from .matching import Matching, degeneracy_scan, max_weight_matching
from .corepoly import (
    ConstraintGraph,
    CoreBounds,
    audit_upper_bound_lemmas,
    build_constraint_graph,
    core_bounds,
    core_size,
    feasible_midpoint,
    solve_market,
    type_adjacency_graph,
)
from .geometry import (
    EventIndicators,
    PointCloud,
    RegionStats,
    event_indicators,
    max_gap_bound,
    region_statistics,
    slab_gap_bound,
)
from .oracle import brute_force_matching, closure_bounds, verify_stability
from .experiments import (
    ExperimentReport,
    fit_power_law,
    lemma_audit_experiment,
    lower_bound_experiment,
    make_lower_bound_market,
    run_trials,
    scaling_experiment,
    theorem2_experiment,
)

__version__ = "0.1.0"
