import numpy as np
import pytest

import core_gauge as cg


def manual_realization(u, epsilon, eta, worker_type, employer_type):
    """Build a realization from explicit matrices; counts come from the types."""
    u = np.asarray(u, dtype=float)
    wt = np.asarray(worker_type, dtype=np.int64)
    et = np.asarray(employer_type, dtype=np.int64)
    K, Q = u.shape
    config = cg.MarketConfig(
        worker_counts=tuple(int((wt == k).sum()) for k in range(K)),
        employer_counts=tuple(int((et == q).sum()) for q in range(Q)),
        u=u,
    )
    return cg.MarketRealization(
        config=config,
        epsilon=np.asarray(epsilon, dtype=float),
        eta=np.asarray(eta, dtype=float),
        worker_type=wt,
        employer_type=et,
    )


def random_small_config(rng, max_side=6, max_types=3, u_values=(-1.0, 0.0, 1.0, 3.0)):
    """A random market with at most ``max_side`` agents per side."""
    K = int(rng.integers(1, max_types + 1))
    Q = int(rng.integers(1, max_types + 1))
    wc = np.maximum(rng.multinomial(int(rng.integers(K, max_side + 1)), np.ones(K) / K), 1)
    ec = np.maximum(rng.multinomial(int(rng.integers(Q, max_side + 1)), np.ones(Q) / Q), 1)
    return cg.MarketConfig(
        worker_counts=tuple(int(x) for x in wc),
        employer_counts=tuple(int(x) for x in ec),
        u=rng.choice(list(u_values), size=(K, Q)),
        seed=int(rng.integers(0, 2**32)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
