"""Market configurations, validation of the structural assumptions, and sampling.

A market has two sides: workers (partitioned into K types) and employers
(partitioned into Q types). Matching worker i with employer j produces

    value(i, j) = u[type(i), type(j)] + epsilon[j, type(i)] + eta[i, type(j)]

where ``u`` is deterministic per type pair and the productivity draws
``epsilon`` / ``eta`` are i.i.d. from a bounded distribution on [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import CapabilityError, ConfigurationError, UsageError

__all__ = [
    "Uniform01",
    "TruncatedBeta",
    "MarketConfig",
    "MarketRealization",
    "sample_market",
    "match_value",
    "phi_matrix",
    "adjusted_eta",
    "check_assumption_no_balanced_submarket",
    "check_assumption_linear_growth",
]


@dataclass(frozen=True)
class Uniform01:
    """Uniform distribution on [0, 1]."""

    name: str = field(default="uniform01", init=False)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.random(size)

    def to_json(self):
        return "uniform01"


@dataclass(frozen=True)
class TruncatedBeta:
    """Beta(a, b) restricted to its natural [0, 1] support.

    Requires a, b >= 1 so the density is bounded and positive on (0, 1).
    """

    a: float
    b: float
    name: str = field(default="truncated_beta", init=False)

    def __post_init__(self):
        if not (self.a >= 1.0 and self.b >= 1.0):
            raise ConfigurationError(
                f"TruncatedBeta requires a, b >= 1 for a bounded positive density, "
                f"got a={self.a}, b={self.b}"
            )

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.beta(self.a, self.b, size)

    def to_json(self):
        return {"name": "truncated_beta", "a": self.a, "b": self.b}


def distribution_from_json(obj) -> Uniform01 | TruncatedBeta:
    if obj is None or obj == "uniform01" or obj == {"name": "uniform01"}:
        return Uniform01()
    if isinstance(obj, dict) and obj.get("name") == "truncated_beta":
        return TruncatedBeta(a=float(obj["a"]), b=float(obj["b"]))
    raise ConfigurationError(f"unknown distribution spec: {obj!r}")


@dataclass
class MarketConfig:
    """Immutable description of a market: type counts, utilities, noise law, seed."""

    worker_counts: tuple[int, ...]
    employer_counts: tuple[int, ...]
    u: np.ndarray  # K x Q deterministic type-pair utility
    distribution: Uniform01 | TruncatedBeta = field(default_factory=Uniform01)
    seed: int = 0

    def __post_init__(self):
        self.worker_counts = tuple(int(c) for c in self.worker_counts)
        self.employer_counts = tuple(int(c) for c in self.employer_counts)
        self.u = np.asarray(self.u, dtype=float)
        self.validate()

    # -- derived quantities -------------------------------------------------

    @property
    def num_worker_types(self) -> int:
        return len(self.worker_counts)

    @property
    def num_employer_types(self) -> int:
        return len(self.employer_counts)

    @property
    def n_workers(self) -> int:
        return sum(self.worker_counts)

    @property
    def n_employers(self) -> int:
        return sum(self.employer_counts)

    @property
    def n_agents(self) -> int:
        return self.n_workers + self.n_employers

    # -- contracts ----------------------------------------------------------

    def validate(self) -> None:
        if self.num_worker_types < 1 or self.num_employer_types < 1:
            raise ConfigurationError("need at least one type on each side")
        if any(c < 1 for c in self.worker_counts):
            raise ConfigurationError(f"worker counts must be >= 1: {self.worker_counts}")
        if any(c < 1 for c in self.employer_counts):
            raise ConfigurationError(f"employer counts must be >= 1: {self.employer_counts}")
        expected = (self.num_worker_types, self.num_employer_types)
        if self.u.shape != expected:
            raise ConfigurationError(
                f"u matrix has shape {self.u.shape}, expected {expected}"
            )
        if not np.all(np.isfinite(self.u)):
            raise ConfigurationError("u matrix contains non-finite entries")
        seed = int(self.seed)
        if not (0 <= seed < 2**64):
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        self.seed = seed

    def with_seed(self, seed: int) -> "MarketConfig":
        return replace(self, seed=int(seed))

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "k": self.num_worker_types,
            "q": self.num_employer_types,
            "worker_counts": list(self.worker_counts),
            "employer_counts": list(self.employer_counts),
            "u": self.u.tolist(),
            "distribution": self.distribution.to_json(),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MarketConfig":
        try:
            cfg = cls(
                worker_counts=tuple(obj["worker_counts"]),
                employer_counts=tuple(obj["employer_counts"]),
                u=np.asarray(obj["u"], dtype=float),
                distribution=distribution_from_json(obj.get("distribution")),
                seed=int(obj.get("seed", 0)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"market config missing field {exc}") from exc
        if "k" in obj and int(obj["k"]) != cfg.num_worker_types:
            raise ConfigurationError("declared k disagrees with worker_counts")
        if "q" in obj and int(obj["q"]) != cfg.num_employer_types:
            raise ConfigurationError("declared q disagrees with employer_counts")
        return cfg


@dataclass
class MarketRealization:
    """One sampled market: productivity matrices plus the type assignment."""

    config: MarketConfig
    epsilon: np.ndarray  # n_employers x K, epsilon[j, k] in [0, 1]
    eta: np.ndarray  # n_workers x Q, eta[i, q] in [0, 1]
    worker_type: np.ndarray  # n_workers ints
    employer_type: np.ndarray  # n_employers ints

    @property
    def n_workers(self) -> int:
        return self.eta.shape[0]

    @property
    def n_employers(self) -> int:
        return self.epsilon.shape[0]

    def workers_of_type(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.worker_type == k)

    def employers_of_type(self, q: int) -> np.ndarray:
        return np.flatnonzero(self.employer_type == q)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "epsilon": self.epsilon.tolist(),
            "eta": self.eta.tolist(),
            "worker_type": self.worker_type.tolist(),
            "employer_type": self.employer_type.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MarketRealization":
        try:
            real = cls(
                config=MarketConfig.from_json_dict(obj["config"]),
                epsilon=np.asarray(obj["epsilon"], dtype=float),
                eta=np.asarray(obj["eta"], dtype=float),
                worker_type=np.asarray(obj["worker_type"], dtype=np.int64),
                employer_type=np.asarray(obj["employer_type"], dtype=np.int64),
            )
        except KeyError as exc:
            raise ConfigurationError(f"market realization missing field {exc}") from exc
        _validate_realization(real)
        return real


def _validate_realization(real: MarketRealization) -> None:
    cfg = real.config
    if real.epsilon.shape != (cfg.n_employers, cfg.num_worker_types):
        raise ConfigurationError("epsilon matrix shape disagrees with config")
    if real.eta.shape != (cfg.n_workers, cfg.num_employer_types):
        raise ConfigurationError("eta matrix shape disagrees with config")
    for name, arr in (("epsilon", real.epsilon), ("eta", real.eta)):
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ConfigurationError(f"{name} entries must lie in [0, 1]")


def _type_blocks(counts: Sequence[int]) -> np.ndarray:
    # Contiguous canonical ordering: the first counts[0] agents are type 0, etc.
    return np.repeat(np.arange(len(counts), dtype=np.int64), counts)


def sample_market(config: MarketConfig, salt: tuple[int, ...] = ()) -> MarketRealization:
    """Draw a market realization, a pure function of (config.seed, salt).

    ``salt`` selects an independent stream (e.g. per grid point / trial /
    resample attempt) from a counter-based generator, so concurrent trials
    reproduce bit-identically regardless of execution order.
    """

    config.validate()
    ss = np.random.SeedSequence(entropy=config.seed, spawn_key=tuple(int(s) for s in salt))
    rng = np.random.Generator(np.random.Philox(ss))
    dist = config.distribution
    epsilon = dist.sample(rng, (config.n_employers, config.num_worker_types))
    eta = dist.sample(rng, (config.n_workers, config.num_employer_types))
    return MarketRealization(
        config=config,
        epsilon=epsilon,
        eta=eta,
        worker_type=_type_blocks(config.worker_counts),
        employer_type=_type_blocks(config.employer_counts),
    )


def match_value(real: MarketRealization, i: int, j: int) -> float:
    """Exact pair value u[type(i), type(j)] + epsilon[j, type(i)] + eta[i, type(j)]."""

    if not (0 <= i < real.n_workers):
        raise UsageError(f"worker index {i} out of range [0, {real.n_workers})")
    if not (0 <= j < real.n_employers):
        raise UsageError(f"employer index {j} out of range [0, {real.n_employers})")
    k = real.worker_type[i]
    q = real.employer_type[j]
    return float(real.config.u[k, q] + real.epsilon[j, k] + real.eta[i, q])


def phi_matrix(real: MarketRealization) -> np.ndarray:
    """All pair values as an (n_workers x n_employers) matrix."""

    wt = real.worker_type
    et = real.employer_type
    return real.config.u[np.ix_(wt, et)] + real.epsilon[:, wt].T + real.eta[:, et]


def adjusted_eta(real: MarketRealization) -> np.ndarray:
    """Worker-side productivity with the type-pair utility folded in.

    Entry [i, q] is u[type(i), q] + eta[i, q]; the core constraints are most
    naturally expressed in these adjusted values.
    """

    return real.config.u[real.worker_type, :] + real.eta


def check_assumption_no_balanced_submarket(config: MarketConfig):
    """Check that no nonempty subset of worker types and employer types has
    equal total agent counts.

    Returns ``(True, None)`` or ``(False, (worker_type_set, employer_type_set))``
    with a violating pair of 0-based type index sets.
    """

    K = config.num_worker_types
    Q = config.num_employer_types
    if K + Q > 24:
        raise CapabilityError(
            f"subset enumeration needs K + Q <= 24 types, got {K + Q}"
        )
    worker_sums: dict[int, int] = {}
    for mask in range(1, 1 << K):
        total = sum(config.worker_counts[t] for t in range(K) if mask >> t & 1)
        worker_sums.setdefault(total, mask)
    for mask in range(1, 1 << Q):
        total = sum(config.employer_counts[t] for t in range(Q) if mask >> t & 1)
        if total in worker_sums:
            wmask = worker_sums[total]
            witness = (
                frozenset(t for t in range(K) if wmask >> t & 1),
                frozenset(t for t in range(Q) if mask >> t & 1),
            )
            return False, witness
    return True, None


def check_assumption_linear_growth(config: MarketConfig, c: float) -> bool:
    """Check that every type holds at least a fraction ``c`` of all agents."""

    if not (0.0 < c < 1.0):
        raise UsageError(f"growth fraction must lie in (0, 1), got {c}")
    min_count = min(min(config.worker_counts), min(config.employer_counts))
    return min_count >= c * config.n_agents
