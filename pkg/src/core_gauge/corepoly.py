"""Core price polytope over matched type pairs.

Every core outcome on the canonical matching is described by one price per
matched type pair (k, q); a payoff split is stable exactly when the price
vector satisfies a system of pairwise difference constraints plus per-node
box constraints. This module builds that system, computes per-coordinate
extremes and attaining witnesses by shortest paths from a virtual source,
derives the core-size metric, and provides the structural diagnostics used
by the Monte Carlo audits.

Constraint system emitted by :func:`build_constraint_graph` (eta_adj is the
u-adjusted worker productivity; M(t) the agents matched to type t; U the
unmatched agents):

* difference edges, ordered node pairs x=(k,q), y=(k',q'):
      price[y] - price[x] <= min_{i in k' cap M(q')} (eta_adj[i,q'] - eta_adj[i,q])
                             + min_{j in q cap M(k)} (eps[j,k] - eps[j,k'])
* per-node boxes from matched agents' individual rationality and from
  blocking pairs against same-node unmatched agents:
      -min_{j in q cap M(k)} eps[j,k] <= price[(k,q)] <= min_{i in k cap M(q)} eta_adj[i,q]
      price[(k,q)] <= -max_{j in q cap U} eps[j,k]
      price[(k,q)] >= max_{i in k cap U} eta_adj[i,q]
* cross-type boxes from blocking pairs between an unmatched agent of one
  type and a matched agent of another (empty max -> -inf, omitted):
      price[(k',q)] >= max_{i in k0 cap U} eta_adj[i,q]
                       + max_{j in q cap M(k')} (eps[j,k0] - eps[j,k'])
      price[(k,q')] <= min_{i in k cap M(q')} (eta_adj[i,q'] - eta_adj[i,q0])
                       - max_{j in q0 cap U} eps[j,k]
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import market as mkt
from .errors import InternalInconsistencyError
from .geometry import PointCloud, event_indicators, max_gap_bound, region_statistics, slab_gap_bound
from .matching import Matching

FEAS_TOL = 1e-9

__all__ = [
    "ConstraintGraph",
    "CoreBounds",
    "TypeAdjacencyGraph",
    "TypeAuditRecord",
    "build_constraint_graph",
    "core_bounds",
    "core_size",
    "feasible_midpoint",
    "type_adjacency_graph",
    "audit_upper_bound_lemmas",
    "solve_market",
]


@dataclass
class ConstraintGraph:
    """Difference-and-box constraint system over matched type pairs."""

    nodes: list[tuple[int, int]]  # (worker type, employer type), block count > 0
    node_counts: np.ndarray  # matches per node
    diff_bound: np.ndarray  # [x, y] bounds price[y] - price[x]; +inf = absent
    lower_box: np.ndarray  # -inf allowed
    upper_box: np.ndarray  # +inf allowed

    @property
    def size(self) -> int:
        return len(self.nodes)

    def node_index(self) -> dict[tuple[int, int], int]:
        return {node: x for x, node in enumerate(self.nodes)}

    def check_vector(self, alpha: np.ndarray, tol: float = FEAS_TOL) -> list[str]:
        """Return human-readable descriptions of constraints violated by alpha."""
        bad = []
        for x, node in enumerate(self.nodes):
            if alpha[x] < self.lower_box[x] - tol:
                bad.append(f"lower box at {node}: {alpha[x]} < {self.lower_box[x]}")
            if alpha[x] > self.upper_box[x] + tol:
                bad.append(f"upper box at {node}: {alpha[x]} > {self.upper_box[x]}")
        for x in range(self.size):
            for y in range(self.size):
                if x == y or not np.isfinite(self.diff_bound[x, y]):
                    continue
                if alpha[y] - alpha[x] > self.diff_bound[x, y] + tol:
                    bad.append(
                        f"difference edge {self.nodes[x]} -> {self.nodes[y]}: "
                        f"{alpha[y] - alpha[x]} > {self.diff_bound[x, y]}"
                    )
        return bad


@dataclass
class CoreBounds:
    """Per-node price extremes, witnesses attaining them, and the core size."""

    nodes: list[tuple[int, int]]
    node_counts: np.ndarray
    alpha_min: np.ndarray
    alpha_max: np.ndarray
    witness_min: np.ndarray  # feasible vector attaining alpha_min at every node
    witness_max: np.ndarray  # feasible vector attaining alpha_max at every node
    core_size: float

    @property
    def widths(self) -> np.ndarray:
        return self.alpha_max - self.alpha_min

    def node_index(self) -> dict[tuple[int, int], int]:
        return {node: x for x, node in enumerate(self.nodes)}

    def to_json_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "k": int(k),
                    "q": int(q),
                    "n_matches": int(self.node_counts[x]),
                    "alpha_min": float(self.alpha_min[x]),
                    "alpha_max": float(self.alpha_max[x]),
                }
                for x, (k, q) in enumerate(self.nodes)
            ],
            "witness_min": self.witness_min.tolist(),
            "witness_max": self.witness_max.tolist(),
            "midpoint": ((self.witness_min + self.witness_max) / 2.0).tolist(),
            "core_size": self.core_size,
        }


def _matched_rows(real: mkt.MarketRealization, matching: Matching):
    """Worker and employer index lists per node (k, q) with matches."""
    workers: dict[tuple[int, int], list[int]] = {}
    employers: dict[tuple[int, int], list[int]] = {}
    for i, j in matching.pairs:
        key = (int(real.worker_type[i]), int(real.employer_type[j]))
        workers.setdefault(key, []).append(i)
        employers.setdefault(key, []).append(j)
    return workers, employers


def build_constraint_graph(
    real: mkt.MarketRealization, matching: Matching
) -> ConstraintGraph:
    """Assemble the stability constraint system for a solved market."""

    eta_adj = mkt.adjusted_eta(real)
    eps = real.epsilon
    workers_by_node, employers_by_node = _matched_rows(real, matching)
    nodes = sorted(workers_by_node)
    m = len(nodes)
    counts = np.array(
        [matching.pair_counts[k, q] for k, q in nodes], dtype=np.int64
    )

    # Per-node aggregate terms reused by every ordered pair:
    #   worker_term[y][q] = min over y's workers of eta_adj[., q_y] - eta_adj[., q]
    #   emp_term[x][k]    = min over x's employers of eps[., k_x] - eps[., k]
    worker_term = np.empty((m, real.config.num_employer_types))
    emp_term = np.empty((m, real.config.num_worker_types))
    for x, (k, q) in enumerate(nodes):
        wrows = eta_adj[workers_by_node[(k, q)], :]
        worker_term[x] = (wrows[:, q][:, None] - wrows).min(axis=0)
        erows = eps[employers_by_node[(k, q)], :]
        emp_term[x] = (erows[:, k][:, None] - erows).min(axis=0)

    diff_bound = np.full((m, m), np.inf)
    for x, (k, q) in enumerate(nodes):
        for y, (k2, q2) in enumerate(nodes):
            if x == y:
                continue
            diff_bound[x, y] = worker_term[y][q] + emp_term[x][k2]

    unmatched_w_by_type: dict[int, np.ndarray] = {}
    for k0 in range(real.config.num_worker_types):
        rows = matching.unmatched_workers[
            real.worker_type[matching.unmatched_workers] == k0
        ]
        if len(rows):
            unmatched_w_by_type[k0] = rows
    unmatched_e_by_type: dict[int, np.ndarray] = {}
    for q0 in range(real.config.num_employer_types):
        rows = matching.unmatched_employers[
            real.employer_type[matching.unmatched_employers] == q0
        ]
        if len(rows):
            unmatched_e_by_type[q0] = rows

    lower_box = np.full(m, -np.inf)
    upper_box = np.full(m, np.inf)
    for x, (k, q) in enumerate(nodes):
        erows = eps[employers_by_node[(k, q)], k]
        wrows = eta_adj[workers_by_node[(k, q)], q]
        lower_box[x] = -erows.min()
        upper_box[x] = wrows.min()
        if q in unmatched_e_by_type:
            upper_box[x] = min(upper_box[x], -eps[unmatched_e_by_type[q], k].max())
        if k in unmatched_w_by_type:
            lower_box[x] = max(lower_box[x], eta_adj[unmatched_w_by_type[k], q].max())

    # Cross-type boxes: unmatched agents of one type blocking with matched
    # agents of another type within the same opposite-side type.
    for k0, rows in unmatched_w_by_type.items():
        for y, (k2, q) in enumerate(nodes):
            ji = employers_by_node[(k2, q)]
            bound = eta_adj[rows, q].max() + (eps[ji, k0] - eps[ji, k2]).max()
            lower_box[y] = max(lower_box[y], bound)
    for q0, rows in unmatched_e_by_type.items():
        for y, (k, q2) in enumerate(nodes):
            ii = workers_by_node[(k, q2)]
            bound = (eta_adj[ii, q2] - eta_adj[ii, q0]).min() - eps[rows, k].max()
            upper_box[y] = min(upper_box[y], bound)

    for x, node in enumerate(nodes):
        if lower_box[x] > upper_box[x] + FEAS_TOL:
            raise InternalInconsistencyError(
                f"crossed box at node {node}: "
                f"lower {lower_box[x]} > upper {upper_box[x]} "
                "(stable outcomes always exist, so the matching is suspect)"
            )

    return ConstraintGraph(
        nodes=nodes,
        node_counts=counts,
        diff_bound=diff_bound,
        lower_box=lower_box,
        upper_box=upper_box,
    )


def _bellman_ford(weights: np.ndarray, source: int) -> np.ndarray:
    """Single-source shortest paths on a dense matrix with +inf for absent
    edges; raises on a negative cycle."""

    n = weights.shape[0]
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # inf + finite in relaxations
        for _ in range(n):
            relaxed = np.min(dist[:, None] + weights, axis=0)
            new = np.minimum(dist, relaxed)
            if np.array_equal(new, dist, equal_nan=True):
                break
            dist = new
        else:
            final = np.minimum(dist, np.min(dist[:, None] + weights, axis=0))
            if not np.array_equal(final, dist, equal_nan=True):
                raise InternalInconsistencyError(
                    "negative cycle in the price constraint graph"
                )
    return dist


def core_bounds(graph: ConstraintGraph) -> CoreBounds:
    """Per-node extremes via shortest paths from a virtual source node.

    The vector of upper extremes is itself feasible (shortest-path distances
    satisfy every relaxed constraint), and likewise the vector of lower
    extremes, so each serves as the witness for all of its coordinates.
    """

    m = graph.size
    weights = np.full((m + 1, m + 1), np.inf)
    weights[:m, :m] = graph.diff_bound
    np.fill_diagonal(weights, np.inf)
    weights[m, :m] = graph.upper_box
    weights[:m, m] = -graph.lower_box

    dist_from = _bellman_ford(weights, m)
    dist_to = _bellman_ford(weights.T, m)
    alpha_max = dist_from[:m]
    alpha_min = -dist_to[:m]

    if not np.all(np.isfinite(alpha_max)) or not np.all(np.isfinite(alpha_min)):
        raise InternalInconsistencyError("unbounded price coordinate; missing box bound")
    if np.any(alpha_min > alpha_max + FEAS_TOL):
        x = int(np.argmax(alpha_min - alpha_max))
        raise InternalInconsistencyError(
            f"empty price interval at node {graph.nodes[x]}: "
            f"[{alpha_min[x]}, {alpha_max[x]}]"
        )
    for name, vec in (("max-witness", alpha_max), ("min-witness", alpha_min)):
        bad = graph.check_vector(vec)
        if bad:
            raise InternalInconsistencyError(f"{name} infeasible: {bad[0]}")

    return CoreBounds(
        nodes=list(graph.nodes),
        node_counts=graph.node_counts.copy(),
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        witness_min=alpha_min.copy(),
        witness_max=alpha_max.copy(),
        core_size=_weighted_width(alpha_min, alpha_max, graph.node_counts),
    )


def _weighted_width(alpha_min, alpha_max, counts) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    return float(np.dot(counts, alpha_max - alpha_min) / total)


def core_size(bounds: CoreBounds, matching: Matching) -> float:
    """Match-count-weighted average width of the per-node price intervals."""

    if matching.num_matched == 0:
        warnings.warn("core size of an empty matching is defined as 0", stacklevel=2)
        return 0.0
    counts = np.array(
        [matching.pair_counts[k, q] for k, q in bounds.nodes], dtype=np.int64
    )
    return _weighted_width(bounds.alpha_min, bounds.alpha_max, counts)


def feasible_midpoint(bounds: CoreBounds) -> np.ndarray:
    """Coordinatewise midpoint of the two witness vectors; feasible as their
    convex combination."""

    return (bounds.witness_min + bounds.witness_max) / 2.0


@dataclass
class TypeAdjacencyGraph:
    """Bipartite graph on types with an edge where a block has matches.

    A type is marked when at least one of its agents is unmatched; distances
    are hops to the nearest marked type (inf when the component has none).
    """

    edges: np.ndarray  # K x Q bool
    worker_marks: np.ndarray
    employer_marks: np.ndarray
    worker_distance: np.ndarray
    employer_distance: np.ndarray
    components: list[tuple[frozenset[int], frozenset[int]]]
    unmarked_components: list[tuple[frozenset[int], frozenset[int]]]


def type_adjacency_graph(
    matching: Matching, config: mkt.MarketConfig
) -> TypeAdjacencyGraph:
    K = config.num_worker_types
    Q = config.num_employer_types
    edges = matching.pair_counts > 0

    matched_w = np.zeros(K, dtype=np.int64)
    matched_e = np.zeros(Q, dtype=np.int64)
    for k in range(K):
        matched_w[k] = matching.pair_counts[k, :].sum()
    for q in range(Q):
        matched_e[q] = matching.pair_counts[:, q].sum()
    worker_marks = matched_w < np.asarray(config.worker_counts)
    employer_marks = matched_e < np.asarray(config.employer_counts)

    # BFS from all marked vertices at once gives hop distances to a mark.
    INF = np.inf
    wd = np.full(K, INF)
    ed = np.full(Q, INF)
    frontier = [("w", k) for k in range(K) if worker_marks[k]] + [
        ("e", q) for q in range(Q) if employer_marks[q]
    ]
    for side, t in frontier:
        (wd if side == "w" else ed)[t] = 0.0
    while frontier:
        nxt = []
        for side, t in frontier:
            if side == "w":
                for q in np.flatnonzero(edges[t, :]):
                    if ed[q] > wd[t] + 1:
                        ed[q] = wd[t] + 1
                        nxt.append(("e", int(q)))
            else:
                for k in np.flatnonzero(edges[:, t]):
                    if wd[k] > ed[t] + 1:
                        wd[k] = ed[t] + 1
                        nxt.append(("w", int(k)))
        frontier = nxt

    # Connected components by BFS over the same edges.
    seen_w = np.zeros(K, dtype=bool)
    seen_e = np.zeros(Q, dtype=bool)
    components = []
    for start in range(K):
        if seen_w[start]:
            continue
        comp_w, comp_e = {start}, set()
        seen_w[start] = True
        stack = [("w", start)]
        while stack:
            side, t = stack.pop()
            if side == "w":
                for q in np.flatnonzero(edges[t, :]):
                    if not seen_e[q]:
                        seen_e[q] = True
                        comp_e.add(int(q))
                        stack.append(("e", int(q)))
            else:
                for k in np.flatnonzero(edges[:, t]):
                    if not seen_w[k]:
                        seen_w[k] = True
                        comp_w.add(int(k))
                        stack.append(("w", int(k)))
        components.append((frozenset(comp_w), frozenset(comp_e)))
    for q in range(Q):
        if not seen_e[q]:
            components.append((frozenset(), frozenset({q})))

    unmarked = [
        (cw, ce)
        for cw, ce in components
        if not (any(worker_marks[k] for k in cw) or any(employer_marks[q] for q in ce))
    ]
    return TypeAdjacencyGraph(
        edges=edges,
        worker_marks=worker_marks,
        employer_marks=employer_marks,
        worker_distance=wd,
        employer_distance=ed,
        components=components,
        unmarked_components=unmarked,
    )


@dataclass
class TypeAuditRecord:
    """Per-type outcome of the interval-width bound audit."""

    side: str  # "worker" or "employer"
    type_index: int
    skipped: bool
    n_agents: int = 0
    dim: int = 0
    n_matched: int = 0
    n_unmatched: int = 0
    b1: bool = False
    b2: bool = False
    b3: bool = False
    max_width: float = 0.0
    mixed_event: bool = False  # some matched and some unmatched agents
    all_matched_event: bool = False
    absolute_applicable: bool = False
    absolute_bound: float = np.inf
    absolute_violated: bool = False
    relative_applicable: bool = False
    relative_bound: float = np.inf
    relative_violated: bool = False
    margin_event_holds: bool = False  # all midpoint margins >= delta
    margins: tuple[float, ...] = ()


def audit_upper_bound_lemmas(
    real: mkt.MarketRealization,
    matching: Matching,
    bounds: CoreBounds,
    delta: float,
    tol: float = FEAS_TOL,
) -> list[TypeAuditRecord]:
    """Check, per type, the two width bounds behind the upper-bound argument.

    For a type with both matched and unmatched agents, when its gap events
    hold (b1 and b2), the largest price-interval width among its matched
    neighbor pairs must not exceed
    ``max(max_gap_bound + delta, slab_gap_bound / delta^(D-1))``.
    For a fully matched type, when b1 holds, that width must not exceed the
    smallest neighbor width plus ``2 * max_gap_bound + 2 * delta``.
    The per-type price margins (of the midpoint vector) are reported so that
    trials where the margin event fails can be inspected, but they gate
    nothing.
    """

    index = bounds.node_index()
    midpoint = feasible_midpoint(bounds)
    cfg = real.config
    records = []

    sides = [("worker", cfg.num_worker_types), ("employer", cfg.num_employer_types)]
    for side, n_types in sides:
        for t in range(n_types):
            if side == "worker":
                agents = real.workers_of_type(t)
                cloud_pts = real.eta[agents, :]
                node_of = lambda z, t=t: (t, z)
                neighbors = np.flatnonzero(matching.pair_counts[t, :] > 0)
                n_matched = int(matching.pair_counts[t, :].sum())
            else:
                agents = real.employers_of_type(t)
                cloud_pts = real.epsilon[agents, :]
                node_of = lambda z, t=t: (z, t)
                neighbors = np.flatnonzero(matching.pair_counts[:, t] > 0)
                n_matched = int(matching.pair_counts[:, t].sum())

            n_t = len(agents)
            if n_matched == 0:
                records.append(TypeAuditRecord(side=side, type_index=t, skipped=True))
                continue

            dim = cloud_pts.shape[1]
            if n_t < 2:  # events are defined for at least two draws
                records.append(
                    TypeAuditRecord(
                        side=side,
                        type_index=t,
                        skipped=False,
                        n_agents=n_t,
                        dim=dim,
                        n_matched=n_matched,
                        n_unmatched=n_t - n_matched,
                    )
                )
                continue
            stats = region_statistics(PointCloud(cloud_pts), delta)
            events = event_indicators(stats, n_t, dim, delta)
            widths = np.array([bounds.widths[index[node_of(int(z))]] for z in neighbors])
            max_width = float(widths.max())

            mixed = 0 < n_matched < n_t
            all_matched = n_matched == n_t
            f1_bound = max_gap_bound(n_t, dim)
            abs_bound = max(f1_bound + delta, slab_gap_bound(n_t) / delta ** (dim - 1))
            rel_bound = float(widths.min()) + 2.0 * f1_bound + 2.0 * delta

            if side == "worker":
                margins = tuple(
                    float(midpoint[index[(t, int(z))]] - cfg.u[t, int(z)])
                    for z in neighbors
                )
            else:
                margins = tuple(
                    float(-midpoint[index[(int(z), t)]]) for z in neighbors
                )

            rec = TypeAuditRecord(
                side=side,
                type_index=t,
                skipped=False,
                n_agents=n_t,
                dim=dim,
                n_matched=n_matched,
                n_unmatched=n_t - n_matched,
                b1=events.b1,
                b2=events.b2,
                b3=events.b3,
                max_width=max_width,
                mixed_event=mixed,
                all_matched_event=all_matched,
                absolute_applicable=mixed and events.b1 and events.b2,
                absolute_bound=abs_bound,
                relative_applicable=all_matched and events.b1 and len(neighbors) > 0,
                relative_bound=rel_bound,
                margin_event_holds=all(mg >= delta for mg in margins),
                margins=margins,
            )
            rec.absolute_violated = rec.absolute_applicable and max_width > abs_bound + tol
            rec.relative_violated = rec.relative_applicable and max_width > rel_bound + tol
            records.append(rec)
    return records


def solve_market(real: mkt.MarketRealization):
    """Match, build constraints, and bound the core in one call.

    Returns (matching, graph, bounds).
    """

    from .matching import max_weight_matching

    matching = max_weight_matching(real)
    if matching.num_matched == 0:
        empty = ConstraintGraph(
            nodes=[],
            node_counts=np.zeros(0, dtype=np.int64),
            diff_bound=np.zeros((0, 0)),
            lower_box=np.zeros(0),
            upper_box=np.zeros(0),
        )
        bounds = CoreBounds(
            nodes=[],
            node_counts=np.zeros(0, dtype=np.int64),
            alpha_min=np.zeros(0),
            alpha_max=np.zeros(0),
            witness_min=np.zeros(0),
            witness_max=np.zeros(0),
            core_size=0.0,
        )
        return matching, empty, bounds
    graph = build_constraint_graph(real, matching)
    bounds = core_bounds(graph)
    return matching, graph, bounds
