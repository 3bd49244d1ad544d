"""Independent small-scale ground truth.

Three checks that deliberately share no algorithmic code with the main
pipeline: exhaustive matching enumeration, the direct pairwise definition of
a stable payoff split, and an all-pairs closure of the price constraint
system. They exist to catch bugs in the fast paths, so they stay simple and
small-n only.
"""

from __future__ import annotations

import numpy as np

from . import market as mkt
from .corepoly import ConstraintGraph, CoreBounds, _weighted_width
from .errors import CapabilityError, InternalInconsistencyError, UsageError
from .matching import Matching, build_matching

STAB_TOL = 1e-9

__all__ = ["brute_force_matching", "verify_stability", "closure_bounds"]


def brute_force_matching(real: mkt.MarketRealization) -> Matching:
    """Exhaustive search over all partial matchings (at most 8 per side)."""

    n_w, n_e = real.n_workers, real.n_employers
    if n_w > 8 or n_e > 8:
        raise CapabilityError(
            f"brute force admits at most 8 agents per side, got {n_w} x {n_e}"
        )
    values = [[mkt.match_value(real, i, j) for j in range(n_e)] for i in range(n_w)]

    best_weight = 0.0
    best_pairs: list[tuple[int, int]] = []

    def extend(i: int, used: int, pairs: list[tuple[int, int]], weight: float) -> None:
        nonlocal best_weight, best_pairs
        if i == n_w:
            if weight > best_weight:
                best_weight = weight
                best_pairs = list(pairs)
            return
        extend(i + 1, used, pairs, weight)  # leave worker i unmatched
        for j in range(n_e):
            if used >> j & 1 or values[i][j] <= 0.0:
                continue
            pairs.append((i, j))
            extend(i + 1, used | 1 << j, pairs, weight + values[i][j])
            pairs.pop()

    extend(0, 0, [], 0.0)
    return build_matching(best_pairs, real)


def verify_stability(
    real: mkt.MarketRealization,
    matching: Matching,
    alpha: dict[tuple[int, int], float],
    tol: float = STAB_TOL,
):
    """Check the definition of stability directly for the payoff split
    induced by per-type-pair prices ``alpha``.

    The split gives a matched worker its adjusted productivity minus the
    node price, a matched employer its productivity plus the node price, and
    unmatched agents zero. Returns (stable, violations).
    """

    needed = {
        (k, q)
        for k in range(real.config.num_worker_types)
        for q in range(real.config.num_employer_types)
        if matching.pair_counts[k, q] > 0
    }
    missing = needed - set(alpha)
    if missing:
        raise UsageError(f"alpha missing matched type pairs: {sorted(missing)}")

    u = real.config.u
    gamma_w = np.zeros(real.n_workers)
    gamma_e = np.zeros(real.n_employers)
    violations: list[str] = []
    for i, j in matching.pairs:
        k, q = int(real.worker_type[i]), int(real.employer_type[j])
        price = alpha[(k, q)]
        gamma_w[i] = u[k, q] + real.eta[i, q] - price
        gamma_e[j] = real.epsilon[j, k] + price
        phi = u[k, q] + real.epsilon[j, k] + real.eta[i, q]
        if abs(gamma_w[i] + gamma_e[j] - phi) > tol:
            violations.append(f"pair ({i}, {j}) does not split its value exactly")

    for name, gamma in (("worker", gamma_w), ("employer", gamma_e)):
        for a in np.flatnonzero(gamma < -tol):
            violations.append(f"{name} {a} has negative payoff {gamma[a]}")

    wt, et = real.worker_type, real.employer_type
    phi_all = u[np.ix_(wt, et)] + real.epsilon[:, wt].T + real.eta[:, et]
    slack = gamma_w[:, None] + gamma_e[None, :] - phi_all
    for i, j in np.argwhere(slack < -tol)[:32]:
        violations.append(
            f"blocking pair ({i}, {j}): payoffs fall short of the pair value "
            f"by {-slack[i, j]}"
        )
    return len(violations) == 0, violations


def closure_bounds(graph: ConstraintGraph) -> CoreBounds:
    """Per-node price extremes by all-pairs transitive tightening.

    Same contract as the shortest-path version, computed with a different
    algorithm (dense all-pairs closure over nodes plus a virtual source).
    """

    m = graph.size
    if m > 12:
        raise CapabilityError(f"closure oracle admits at most 12 nodes, got {m}")
    n = m + 1
    w = np.full((n, n), np.inf)
    w[:m, :m] = graph.diff_bound
    w[m, :m] = graph.upper_box
    w[:m, m] = -graph.lower_box
    np.fill_diagonal(w, 0.0)

    for k in range(n):
        w = np.minimum(w, w[:, k, None] + w[None, k, :])
    if np.any(np.diag(w) < -STAB_TOL):
        raise InternalInconsistencyError("negative cycle in the price constraint graph")

    alpha_max = w[m, :m].copy()
    alpha_min = -w[:m, m].copy()
    return CoreBounds(
        nodes=list(graph.nodes),
        node_counts=graph.node_counts.copy(),
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        witness_min=alpha_min.copy(),
        witness_max=alpha_max.copy(),
        core_size=_weighted_width(alpha_min, alpha_max, graph.node_counts),
    )
