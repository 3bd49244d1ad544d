"""Order-statistic gap measurements for point clouds in the unit hypercube.

The productivity draws of one agent type form a cloud in [0, 1]^D. The core
constraints involve minima and maxima of coordinate projections over specific
subregions of the cube, so the quantities computed here are "largest gap
between consecutive projected values" statistics over those regions:

* dominant region of k:   points whose k-th coordinate is (weakly) largest;
* pair region (k1, k2):   k1-th coordinate weakly dominates all coordinates
                          except possibly k2, and is at least delta;
* slab region of k:       every coordinate other than k is at most delta;
* relaxed pair region:    like the dominant region of k1 but k2 may exceed
                          coordinate k1 by up to delta (only counted, not
                          projected).

Boundary points satisfy the defining inequalities weakly and are included.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from .errors import UsageError

__all__ = [
    "PointCloud",
    "RegionStats",
    "EventIndicators",
    "region_statistics",
    "event_indicators",
    "max_gap_bound",
    "slab_gap_bound",
]


@dataclass
class PointCloud:
    """Points in the unit hypercube; one row per agent."""

    points: np.ndarray  # n x dim

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise UsageError("point cloud must be a 2-d array (n points x dim)")
        if self.points.size and (self.points.min() < 0.0 or self.points.max() > 1.0):
            raise UsageError("point cloud coordinates must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass
class RegionStats:
    """Gap statistics of one cloud at a fixed delta.

    ``dominant_gap[k]`` and ``slab_gap[k]`` are per-dimension; the pair
    quantities are (dim x dim) with NaN / 0 on the diagonal.
    """

    delta: float
    dominant_gap: np.ndarray
    pair_diff_gap: np.ndarray
    slab_gap: np.ndarray
    relaxed_dominant_count: np.ndarray

    def csv_row(self) -> dict:
        d = self.pair_diff_gap.shape[0]
        row: dict[str, float] = {"delta": self.delta}
        for k in range(d):
            row[f"dominant_gap_{k}"] = float(self.dominant_gap[k])
            row[f"slab_gap_{k}"] = float(self.slab_gap[k])
        for k1 in range(d):
            for k2 in range(d):
                if k1 == k2:
                    continue
                row[f"pair_diff_gap_{k1}_{k2}"] = float(self.pair_diff_gap[k1, k2])
                row[f"relaxed_count_{k1}_{k2}"] = int(self.relaxed_dominant_count[k1, k2])
        return row


def max_consecutive_gap(values: np.ndarray, lo: float, hi: float) -> float:
    """Largest difference between consecutive values of ``values`` with the
    sentinels lo and hi appended; equals hi - lo for an empty set."""

    if len(values) == 0:
        return hi - lo
    v = np.sort(values)
    inner = np.diff(v).max() if len(v) > 1 else 0.0
    return float(max(inner, v[0] - lo, hi - v[-1]))


def region_statistics(cloud: PointCloud, delta: float) -> RegionStats:
    """Compute every gap statistic of ``cloud`` at slab width ``delta``.

    ``delta`` must lie in (0, 1]; the pair regions clamp it to at most 1/2,
    the widest slab their definition admits.
    """

    if not (0.0 < delta <= 1.0):
        raise UsageError(f"delta must lie in (0, 1], got {delta}")
    pts = cloud.points
    d = cloud.dim
    delta_pair = min(delta, 0.5)

    row_max = pts.max(axis=1) if cloud.size else np.zeros(0)

    dominant_gap = np.zeros(d)
    slab_gap = np.zeros(d)
    pair_diff_gap = np.full((d, d), np.nan)
    relaxed_count = np.zeros((d, d), dtype=np.int64)

    for k in range(d):
        in_dominant = pts[:, k] >= row_max
        dominant_gap[k] = max_consecutive_gap(pts[in_dominant, k], 0.0, 1.0)

        others = [k3 for k3 in range(d) if k3 != k]
        in_slab = (
            np.all(pts[:, others] <= delta, axis=1) if others else np.ones(cloud.size, bool)
        )
        slab_gap[k] = max_consecutive_gap(pts[in_slab, k], 0.0, 1.0)

    for k1 in range(d):
        for k2 in range(d):
            if k1 == k2:
                continue
            rest = [k3 for k3 in range(d) if k3 not in (k1, k2)]
            dominates_rest = (
                np.all(pts[:, k1][:, None] >= pts[:, rest], axis=1)
                if rest
                else np.ones(cloud.size, bool)
            )
            in_pair = dominates_rest & (pts[:, k1] >= delta_pair)
            pair_diff_gap[k1, k2] = max_consecutive_gap(
                pts[in_pair, k1] - pts[in_pair, k2], -1.0 + delta_pair, 1.0
            )
            in_relaxed = dominates_rest & (pts[:, k1] >= pts[:, k2] - delta)
            relaxed_count[k1, k2] = int(in_relaxed.sum())

    return RegionStats(
        delta=delta,
        dominant_gap=dominant_gap,
        pair_diff_gap=pair_diff_gap,
        slab_gap=slab_gap,
        relaxed_dominant_count=relaxed_count,
    )


def max_gap_bound(n: int, dim: int) -> float:
    """Deterministic bound that the dominant/pair gaps satisfy with high
    probability: 3 * (6 D (D-1) ln n / n)^(1/D) for D >= 2.

    The D = 1 case degenerates; there the plain order-statistic bound
    36 ln n / n is used (the smallest constant the same argument supports).
    """

    if dim >= 2:
        return 3.0 * (6.0 * dim * (dim - 1) * log(n) / n) ** (1.0 / dim)
    return 36.0 * log(n) / n


def slab_gap_bound(n: int) -> float:
    """High-probability bound 6 ln n / n on the slab gap at delta = 1."""

    return 6.0 * log(n) / n


@dataclass
class EventIndicators:
    """Truth values of the three high-probability order-statistic events.

    b1: every dominant gap and pair-difference gap is below max_gap_bound;
    b2: every slab gap is below slab_gap_bound(n) / delta^(D-1);
    b3: every relaxed pair region holds at least 1 + n/D points.
    """

    b1: bool
    b2: bool
    b3: bool
    b1_threshold: float
    b2_threshold: float
    b3_threshold: float


def event_indicators(
    stats: RegionStats, n_t: int, dim: int, delta: float
) -> EventIndicators:
    """Evaluate the three events for a cloud of ``n_t`` points in dimension
    ``dim`` at slab width ``delta``."""

    if n_t < 2:
        raise UsageError(f"event thresholds need at least 2 points, got {n_t}")
    b1_threshold = max_gap_bound(n_t, dim)
    b2_threshold = slab_gap_bound(n_t) / delta ** (dim - 1)
    b3_threshold = 1.0 + n_t / dim

    worst_gap = float(stats.dominant_gap.max())
    if dim >= 2:
        off_diag = ~np.eye(dim, dtype=bool)
        worst_gap = max(worst_gap, float(np.nanmax(stats.pair_diff_gap[off_diag])))
        b3 = bool(np.all(stats.relaxed_dominant_count[off_diag] >= b3_threshold))
    else:
        b3 = True  # no coordinate pairs to count

    return EventIndicators(
        b1=worst_gap <= b1_threshold,
        b2=float(stats.slab_gap.max()) <= b2_threshold,
        b3=b3,
        b1_threshold=b1_threshold,
        b2_threshold=b2_threshold,
        b3_threshold=b3_threshold,
    )
