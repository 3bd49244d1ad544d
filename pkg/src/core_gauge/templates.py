"""Built-in market config templates for smoke tests and CLI examples."""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .market import MarketConfig

__all__ = ["builtin_template_names", "builtin_config"]

_TEMPLATES: dict[str, dict] = {
    "one_pair": {
        "worker_counts": (1,),
        "employer_counts": (1,),
        "u": [[2.0]],
    },
    "balanced_one_type": {
        "worker_counts": (5,),
        "employer_counts": (5,),
        "u": [[1.0]],
    },
    "unbalanced_one_type": {
        "worker_counts": (5,),
        "employer_counts": (6,),
        "u": [[1.0]],
    },
    "two_by_two": {
        "worker_counts": (3, 4),
        "employer_counts": (6, 2),
        "u": [[1.0, 0.0], [3.0, -1.0]],
    },
    "lower_bound_k2": {
        "worker_counts": (4, 4),
        "employer_counts": (5,),
        "u": [[0.0], [3.0]],
    },
}


def builtin_template_names() -> list[str]:
    return sorted(_TEMPLATES)


def builtin_config(name: str, seed: int = 0) -> MarketConfig:
    if name not in _TEMPLATES:
        raise UsageError(
            f"unknown template {name!r}; available: {', '.join(builtin_template_names())}"
        )
    spec = _TEMPLATES[name]
    return MarketConfig(
        worker_counts=spec["worker_counts"],
        employer_counts=spec["employer_counts"],
        u=np.asarray(spec["u"], dtype=float),
        seed=seed,
    )
