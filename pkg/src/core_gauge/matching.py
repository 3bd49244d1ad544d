"""Maximum-weight matching with free (possibly unmatched) agents.

The solver runs rectangular assignment on the clipped value matrix
max(value, 0) and drops nonpositive pairs afterwards, which is equivalent to
optimizing over all partial matchings. Within each (worker type, employer
type) block the pairing is then canonicalized by ascending index; block
permutations do not change the total value, so the canonical matching is
itself optimal and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import market as mkt
from .errors import ConfigurationError

TIE_TOL = 1e-12

__all__ = ["Matching", "DegeneracyReport", "max_weight_matching", "degeneracy_scan"]


@dataclass
class Matching:
    """A matching plus the aggregates downstream consumers need."""

    pairs: list[tuple[int, int]]
    unmatched_workers: np.ndarray
    unmatched_employers: np.ndarray
    weight: float
    pair_counts: np.ndarray  # K x Q, entry [k, q] = matches between types k and q

    @property
    def num_matched(self) -> int:
        return len(self.pairs)

    def worker_partner(self, n_workers: int) -> np.ndarray:
        """Partner employer per worker, -1 where unmatched."""
        partner = np.full(n_workers, -1, dtype=np.int64)
        for i, j in self.pairs:
            partner[i] = j
        return partner

    def employer_partner(self, n_employers: int) -> np.ndarray:
        partner = np.full(n_employers, -1, dtype=np.int64)
        for i, j in self.pairs:
            partner[j] = i
        return partner

    def to_json_dict(self) -> dict:
        return {
            "pairs": [[int(i), int(j)] for i, j in self.pairs],
            "unmatched_workers": self.unmatched_workers.tolist(),
            "unmatched_employers": self.unmatched_employers.tolist(),
            "weight": self.weight,
            "pair_counts": self.pair_counts.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Matching":
        try:
            return cls(
                pairs=[(int(i), int(j)) for i, j in obj["pairs"]],
                unmatched_workers=np.asarray(obj["unmatched_workers"], dtype=np.int64),
                unmatched_employers=np.asarray(obj["unmatched_employers"], dtype=np.int64),
                weight=float(obj["weight"]),
                pair_counts=np.asarray(obj["pair_counts"], dtype=np.int64),
            )
        except KeyError as exc:
            raise ConfigurationError(f"matching missing field {exc}") from exc


def canonicalize_pairs(
    pairs: list[tuple[int, int]],
    worker_type: np.ndarray,
    employer_type: np.ndarray,
) -> list[tuple[int, int]]:
    """Re-pair agents within each type-pair block in ascending index order.

    Separability makes the total value invariant under within-block
    permutations, so this fixes agent-level arbitrariness without touching
    the optimum, the matched sets per type, or the block counts.
    """

    blocks: dict[tuple[int, int], tuple[list[int], list[int]]] = {}
    for i, j in pairs:
        key = (int(worker_type[i]), int(employer_type[j]))
        blocks.setdefault(key, ([], []))
        blocks[key][0].append(i)
        blocks[key][1].append(j)
    canonical: list[tuple[int, int]] = []
    for key in sorted(blocks):
        workers, employers = blocks[key]
        canonical.extend(zip(sorted(workers), sorted(employers)))
    return canonical


def build_matching(
    pairs: list[tuple[int, int]], real: mkt.MarketRealization
) -> Matching:
    """Assemble a canonical Matching (weight, unmatched sets, block counts)."""

    pairs = canonicalize_pairs(pairs, real.worker_type, real.employer_type)
    matched_w = np.zeros(real.n_workers, dtype=bool)
    matched_e = np.zeros(real.n_employers, dtype=bool)
    K = real.config.num_worker_types
    Q = real.config.num_employer_types
    counts = np.zeros((K, Q), dtype=np.int64)
    weight = 0.0
    for i, j in pairs:
        matched_w[i] = True
        matched_e[j] = True
        counts[real.worker_type[i], real.employer_type[j]] += 1
        weight += mkt.match_value(real, i, j)
    return Matching(
        pairs=pairs,
        unmatched_workers=np.flatnonzero(~matched_w),
        unmatched_employers=np.flatnonzero(~matched_e),
        weight=weight,
        pair_counts=counts,
    )


def max_weight_matching(real: mkt.MarketRealization) -> Matching:
    """Maximum-weight matching; agents stay unmatched rather than form
    nonpositive-value pairs."""

    phi = mkt.phi_matrix(real)
    clipped = np.maximum(phi, 0.0)
    rows, cols = linear_sum_assignment(clipped, maximize=True)
    kept = [(int(i), int(j)) for i, j in zip(rows, cols) if phi[i, j] > 0.0]
    return build_matching(kept, real)


@dataclass
class DegeneracyReport:
    """Outcome of the tie scan; a flagged trial should be resampled."""

    value_ties: list[tuple[tuple[int, int], tuple[int, int]]] = field(default_factory=list)
    zero_values: list[tuple[int, int]] = field(default_factory=list)
    tolerance: float = TIE_TOL

    @property
    def flagged(self) -> bool:
        return bool(self.value_ties or self.zero_values)


def degeneracy_scan(real: mkt.MarketRealization, tol: float = TIE_TOL) -> DegeneracyReport:
    """Flag near-degenerate realizations.

    Reported events, both at absolute tolerance ``tol``:

    * two pair values sharing an agent that coincide (these are the ties that
      can make the optimizer's choices ambiguous beyond the harmless
      within-block permutations), and
    * any pair value at 0, the match/unmatch boundary.

    Value ties between pairs with four distinct agents cannot flip any single
    assignment decision and occur by the birthday effect in large markets, so
    they are not scanned.
    """

    phi = mkt.phi_matrix(real)
    report = DegeneracyReport(tolerance=tol)

    zeros = np.argwhere(np.abs(phi) <= tol)
    report.zero_values = [(int(i), int(j)) for i, j in zeros[:64]]

    # Vectorized detection first; index recovery only for the (rare) hits.
    row_hits = np.flatnonzero((np.diff(np.sort(phi, axis=1), axis=1) <= tol).any(axis=1))
    for i in row_hits[:32]:
        order = np.argsort(phi[i], kind="stable")
        for h in np.flatnonzero(np.diff(phi[i][order]) <= tol)[:8]:
            report.value_ties.append(((int(i), int(order[h])), (int(i), int(order[h + 1]))))
    col_hits = np.flatnonzero((np.diff(np.sort(phi, axis=0), axis=0) <= tol).any(axis=0))
    for j in col_hits[:32]:
        order = np.argsort(phi[:, j], kind="stable")
        for h in np.flatnonzero(np.diff(phi[:, j][order]) <= tol)[:8]:
            report.value_ties.append(((int(order[h]), int(j)), (int(order[h + 1]), int(j))))
    return report
