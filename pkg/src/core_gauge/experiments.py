"""Monte Carlo harnesses: deterministic parallel trials, scaling fits, audits.

Every trial draws its market from a counter-based stream keyed by
(experiment seed, grid index, trial index, resample attempt), so reports are
bit-identical for any worker count and any execution order. Realizations
flagged by the degeneracy scan are resampled (with the attempt counter
bumped) and the resample count is reported.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import corepoly, market as mkt
from .errors import InternalInconsistencyError, UsageError
from .geometry import PointCloud, event_indicators, region_statistics
from .matching import degeneracy_scan

MAX_RESAMPLES = 64

__all__ = [
    "FitResult",
    "ExperimentReport",
    "fit_power_law",
    "run_trials",
    "make_lower_bound_market",
    "lower_bound_experiment",
    "theorem2_experiment",
    "lemma_audit_experiment",
    "market_event_frequencies",
    "scaling_experiment",
    "scaling_config_for_n",
]


# ---------------------------------------------------------------------------
# power-law fitting


@dataclass
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float


def fit_power_law(ns: Sequence[float], means: Sequence[float]) -> FitResult:
    """Ordinary least squares of ln(mean) on ln(n)."""

    if len(ns) != len(means) or len(ns) < 2:
        raise UsageError("need at least two (n, mean) points to fit a slope")
    if any(m <= 0 for m in means) or any(n <= 0 for n in ns):
        raise UsageError("power-law fit needs positive n and mean values")
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(means, dtype=float))
    xbar = x.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - y.mean())).sum() / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = len(x) - 2
    stderr = math.sqrt(float((resid**2).sum()) / dof / sxx) if dof > 0 else 0.0
    return FitResult(slope=slope, intercept=intercept, slope_stderr=stderr)


# ---------------------------------------------------------------------------
# per-trial diagnostics (top-level functions so worker processes can import them)


def _lower_bound_diagnostics(real, matching, graph, bounds, k_star: int = 0) -> dict:
    """Order-statistic event and feasible-shift interval for the worst-case
    construction with one employer type."""

    cfg = real.config
    K = cfg.num_worker_types
    n_tilde = cfg.worker_counts[k_star]
    others = [k for k in range(K) if k != k_star]
    x_vals = real.epsilon[:, others].max(axis=1) - real.epsilon[:, k_star]

    bin_width = 1.0 / n_tilde ** (1.0 / K)
    in_first = int(np.count_nonzero(x_vals <= -1.0 + bin_width))
    in_second = int(
        np.count_nonzero((x_vals > -1.0 + bin_width) & (x_vals <= -1.0 + 2.0 * bin_width))
    )
    gap_event = in_first == 1 and in_second == 0

    delta = cfg.n_agents ** (-0.51)
    width = _shift_interval_width(graph, bounds, k_star)
    required = bin_width - 2.0 * delta
    return {
        "gap_event": gap_event,
        "shift_width": width,
        "shift_required": required,
        "shift_claim_ok": (not gap_event) or width >= required - 1e-12,
    }


def _shift_interval_width(graph, bounds, k_star: int) -> float:
    """Feasible range of a uniform additive shift of every price except the
    pinned coordinate, evaluated at the feasible midpoint vector.

    With the base vector fixed, each box or pinned-coordinate difference
    constraint on a shifted coordinate becomes a direct bound on the shift,
    so the two extremes are one slack-minimization pass each.
    """

    index = graph.node_index()
    pinned = None
    for (k, q), x in index.items():
        if k == k_star:
            pinned = x
            break
    if pinned is None:
        return 0.0
    mid = corepoly.feasible_midpoint(bounds)
    hi, lo = np.inf, -np.inf
    for x in range(graph.size):
        if x == pinned:
            continue
        hi = min(hi, graph.upper_box[x] - mid[x])
        lo = max(lo, graph.lower_box[x] - mid[x])
        if np.isfinite(graph.diff_bound[pinned, x]):
            hi = min(hi, graph.diff_bound[pinned, x] - (mid[x] - mid[pinned]))
        if np.isfinite(graph.diff_bound[x, pinned]):
            lo = max(lo, (mid[pinned] - mid[x]) - graph.diff_bound[x, pinned])
    return float(max(hi - lo, 0.0))


def _theorem2_diagnostics(real, matching, graph, bounds) -> dict:
    """Matched-floor / unmatched-ceiling box diagnostics for one employer type."""

    cfg = real.config
    K = cfg.num_worker_types
    index = bounds.node_index()
    unmatched = matching.unmatched_employers

    floors = np.full(K, np.nan)
    ceilings = np.full(K, np.nan)
    partner = matching.employer_partner(real.n_employers)
    matched_j = np.flatnonzero(partner >= 0)
    partner_type = real.worker_type[partner[matched_j]]
    for k in range(K):
        jj = matched_j[partner_type == k]
        if len(jj):
            floors[k] = real.epsilon[jj, k].min()
        rows = real.epsilon[unmatched, k]
        if len(rows):
            ceilings[k] = rows.max()

    applicable = bool(np.all(np.isfinite(floors)) and len(unmatched) > 0)
    out: dict = {"im_applicable": applicable}
    if not applicable:
        out.update(
            {
                "im_min_gap": np.nan,
                "im_max_gap": np.nan,
                "core_le_min_gap": True,
                "core_le_max_gap": True,
                "widths_within_boxes": True,
            }
        )
        return out

    gaps = floors - ceilings
    c = bounds.core_size
    widths_ok = True
    for k in range(K):
        node = index.get((k, 0))
        if node is not None and bounds.widths[node] > gaps[k] + 1e-9:
            widths_ok = False
    out.update(
        {
            "im_min_gap": float(gaps.min()),
            "im_max_gap": float(gaps.max()),
            "core_le_min_gap": bool(c <= gaps.min() + 1e-9),
            "core_le_max_gap": bool(c <= gaps.max() + 1e-9),
            "widths_within_boxes": widths_ok,
        }
    )
    return out


def _lemma_audit_diagnostics(real, matching, graph, bounds, delta: float) -> dict:
    """Width-bound audit trail across all types (zero expected violations)."""

    records = corepoly.audit_upper_bound_lemmas(real, matching, bounds, delta)
    active = [r for r in records if not r.skipped]
    return {
        "audit_types": len(active),
        "absolute_checked": sum(r.absolute_applicable for r in active),
        "absolute_violations": sum(r.absolute_violated for r in active),
        "relative_checked": sum(r.relative_applicable for r in active),
        "relative_violations": sum(r.relative_violated for r in active),
        "all_events_hold": all(r.b1 and r.b2 for r in active),
    }


_DIAGNOSTICS: dict[str, Callable] = {
    "lower_bound": _lower_bound_diagnostics,
    "theorem2": _theorem2_diagnostics,
    "lemma_audit": _lemma_audit_diagnostics,
}


# ---------------------------------------------------------------------------
# generic trial runner


@dataclass
class ExperimentReport:
    """Aggregates, fit, and the full per-trial table of one experiment run."""

    experiment: str
    params: dict
    seed: int
    trials: int
    rows: list[dict] = field(default_factory=list)  # one per grid point
    trial_table: list[dict] = field(default_factory=list)  # one per (grid, trial)
    slope: float | None = None
    intercept: float | None = None
    slope_stderr: float | None = None
    frequencies: dict = field(default_factory=dict)
    unmarked_components_total: int = 0
    wall_clock_seconds: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "seed": self.seed,
            "trials": self.trials,
            "rows": self.rows,
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "frequencies": self.frequencies,
            "unmarked_components_total": self.unmarked_components_total,
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "trials.csv", self.trial_table)
        _write_csv(out / "aggregates.csv", self.rows)
        with open(out / "summary.json", "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def _run_market_trial(args) -> dict:
    config, grid_index, trial_index, diag_name, diag_params = args
    attempt = 0
    while True:
        real = mkt.sample_market(config, salt=(grid_index, trial_index, attempt))
        if not degeneracy_scan(real).flagged:
            break
        attempt += 1
        if attempt > MAX_RESAMPLES:
            raise InternalInconsistencyError(
                f"grid {grid_index} trial {trial_index}: "
                f"{MAX_RESAMPLES} consecutive degenerate resamples"
            )
    try:
        matching, graph, bounds = corepoly.solve_market(real)
        adjacency = corepoly.type_adjacency_graph(matching, config)
        record = {
            "grid_index": grid_index,
            "n": config.n_agents,
            "trial": trial_index,
            "core_size": bounds.core_size,
            "resamples": attempt,
            "num_matched": matching.num_matched,
            "unmarked_components": len(adjacency.unmarked_components),
        }
        if diag_name is not None:
            record.update(
                _DIAGNOSTICS[diag_name](real, matching, graph, bounds, **diag_params)
            )
    except InternalInconsistencyError as exc:
        raise InternalInconsistencyError(
            f"seed {config.seed}, grid {grid_index}, trial {trial_index}, "
            f"attempt {attempt}: {exc}"
        ) from exc
    return record


def run_trials(
    configs: Sequence[mkt.MarketConfig],
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    diagnostics: str | None = None,
    diag_params: dict | None = None,
    experiment: str = "scaling",
    params: dict | None = None,
) -> ExperimentReport:
    """Sample -> match -> core -> size, ``trials`` times per grid config.

    Aggregation order is fixed by (grid index, trial index), so the report is
    identical for any ``workers`` value.
    """

    if trials < 2:
        raise UsageError("need at least 2 trials per grid point")
    for config in configs:
        config.validate()
    start = time.perf_counter()
    stamped = [cfg.with_seed(seed) for cfg in configs]
    jobs = [
        (stamped[g], g, t, diagnostics, diag_params or {})
        for g in range(len(stamped))
        for t in range(trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_market_trial, jobs, chunksize=4))
    else:
        results = [_run_market_trial(job) for job in jobs]

    report = ExperimentReport(
        experiment=experiment,
        params=params or {},
        seed=seed,
        trials=trials,
        trial_table=results,
    )
    for g, config in enumerate(stamped):
        chunk = results[g * trials : (g + 1) * trials]
        values = np.array([r["core_size"] for r in chunk])
        row = {
            "grid_index": g,
            "n": config.n_agents,
            "trials": trials,
            "mean_core_size": float(values.mean()),
            "stderr_core_size": float(values.std(ddof=1) / math.sqrt(trials)),
            "excluded_trials": int(sum(r["resamples"] for r in chunk)),
            "unmarked_components": int(sum(r["unmarked_components"] for r in chunk)),
        }
        for key in chunk[0]:
            if key in row or key in ("core_size", "trial", "resamples", "num_matched"):
                continue
            vals = [r[key] for r in chunk]
            if all(isinstance(v, (bool, np.bool_)) for v in vals):
                row[f"freq_{key}"] = float(np.mean([bool(v) for v in vals]))
            elif all(isinstance(v, (int, float, np.floating, np.integer)) for v in vals):
                finite = [float(v) for v in vals if np.isfinite(v)]
                row[f"mean_{key}"] = float(np.mean(finite)) if finite else float("nan")
        report.rows.append(row)

    report.unmarked_components_total = int(
        sum(r["unmarked_components"] for r in results)
    )
    ns = [row["n"] for row in report.rows]
    means = [row["mean_core_size"] for row in report.rows]
    if len(ns) >= 2 and all(m > 0 for m in means):
        fit = fit_power_law(ns, means)
        report.slope = fit.slope
        report.intercept = fit.intercept
        report.slope_stderr = fit.slope_stderr
    report.wall_clock_seconds = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# named experiments


def make_lower_bound_market(K: int, n_tilde: int, seed: int = 0) -> mkt.MarketConfig:
    """Worst-case market: K worker types of ``n_tilde`` agents each, one
    employer type with (K-1)*n_tilde + 1 agents, zero base utility for worker
    type 0 and base utility 3 for every other worker type."""

    if K < 2:
        raise UsageError("the lower-bound construction needs at least 2 worker types")
    if n_tilde < 1:
        raise UsageError("need at least one worker per type")
    u = np.full((K, 1), 3.0)
    u[0, 0] = 0.0
    return mkt.MarketConfig(
        worker_counts=(n_tilde,) * K,
        employer_counts=((K - 1) * n_tilde + 1,),
        u=u,
        seed=seed,
    )


def lower_bound_experiment(
    K: int,
    n_tilde_grid: Sequence[int],
    trials: int,
    seed: int,
    *,
    workers: int = 1,
) -> ExperimentReport:
    """Core-size scaling on the worst-case construction, plus the conditional
    shift-interval check."""

    configs = [make_lower_bound_market(K, nt) for nt in n_tilde_grid]
    report = run_trials(
        configs,
        trials,
        seed,
        workers=workers,
        diagnostics="lower_bound",
        diag_params={"k_star": 0},
        experiment="lowerbound",
        params={"K": K, "n_tilde_grid": list(n_tilde_grid)},
    )
    event_rows = [r for r in report.trial_table if r["gap_event"]]
    report.frequencies["gap_event"] = len(event_rows) / max(len(report.trial_table), 1)
    report.frequencies["shift_claim_given_event"] = (
        float(np.mean([r["shift_claim_ok"] for r in event_rows])) if event_rows else 1.0
    )
    report.frequencies["gap_event_trials"] = len(event_rows)
    return report


def theorem2_config(K: int, n: int, m: int, u_value: float = 1.0) -> mkt.MarketConfig:
    """One employer type, ``m`` more employers than workers, workers split
    near-evenly over ``K`` types, targeting ``n`` agents in total."""

    n_workers = (n - m) // 2
    if n_workers < K:
        raise UsageError(f"n={n} too small for K={K} worker types with imbalance {m}")
    base = n_workers // K
    counts = tuple(base + (1 if k < n_workers % K else 0) for k in range(K))
    config = mkt.MarketConfig(
        worker_counts=counts,
        employer_counts=(n_workers + m,),
        u=np.full((K, 1), float(u_value)),
    )
    ok, witness = mkt.check_assumption_no_balanced_submarket(config)
    if not ok:
        raise UsageError(f"n={n}, m={m} yields a balanced submarket {witness}")
    return config


def theorem2_experiment(
    K: int,
    n_grid: Sequence[int],
    imbalance: str | int,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    u_value: float = 1.0,
) -> ExperimentReport:
    """Scaling with one employer type and an excess of employers.

    ``imbalance`` is "quarter" (m = ceil(n/4)), "one" (m = 1), or a fixed int.
    """

    def m_of(n: int) -> int:
        if imbalance == "quarter":
            return math.ceil(n / 4)
        if imbalance == "one":
            return 1
        return int(imbalance)

    configs = [theorem2_config(K, n, m_of(n), u_value) for n in n_grid]
    report = run_trials(
        configs,
        trials,
        seed,
        workers=workers,
        diagnostics="theorem2",
        experiment="theorem2",
        params={"K": K, "n_grid": list(n_grid), "imbalance": imbalance, "u": u_value},
    )
    applicable = [r for r in report.trial_table if r["im_applicable"]]
    report.frequencies["im_applicable"] = len(applicable) / max(len(report.trial_table), 1)
    for key in ("core_le_min_gap", "core_le_max_gap", "widths_within_boxes"):
        report.frequencies[key] = (
            float(np.mean([r[key] for r in applicable])) if applicable else 1.0
        )
    return report


# ---------------------------------------------------------------------------
# hypercube lemma audits (pure point clouds, no markets)


def _run_cloud_trial(args) -> dict:
    n_points, dim, dim_index, trial_index, seed = args
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(dim_index, trial_index))
    rng = np.random.Generator(np.random.Philox(ss))
    cloud = PointCloud(rng.random((n_points, dim)))

    delta_b1 = n_points ** (-1.0 / dim)
    delta_b2 = 0.5
    delta_b3 = n_points**-0.49
    b1 = event_indicators(region_statistics(cloud, delta_b1), n_points, dim, delta_b1).b1
    b2 = event_indicators(region_statistics(cloud, delta_b2), n_points, dim, delta_b2).b2
    b3 = event_indicators(region_statistics(cloud, delta_b3), n_points, dim, delta_b3).b3
    return {
        "grid_index": dim_index,
        "n": n_points,
        "dim": dim,
        "trial": trial_index,
        "b1": b1,
        "b2": b2,
        "b3": b3,
        "delta_b1": delta_b1,
        "delta_b3": delta_b3,
    }


def lemma_audit_experiment(
    n_points: int,
    dims: Sequence[int],
    trials: int,
    seed: int,
    *,
    workers: int = 1,
) -> ExperimentReport:
    """Empirical frequencies of the three order-statistic events on uniform
    clouds: b1 at delta = n^(-1/D), b2 at delta = 1/2, b3 at delta = n^(-0.49)."""

    if trials < 2:
        raise UsageError("need at least 2 trials")
    start = time.perf_counter()
    jobs = [
        (n_points, dim, d_index, t, seed)
        for d_index, dim in enumerate(dims)
        for t in range(trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cloud_trial, jobs, chunksize=4))
    else:
        results = [_run_cloud_trial(job) for job in jobs]

    report = ExperimentReport(
        experiment="lemmas",
        params={"n_points": n_points, "dims": list(dims)},
        seed=seed,
        trials=trials,
        trial_table=results,
    )
    for d_index, dim in enumerate(dims):
        chunk = results[d_index * trials : (d_index + 1) * trials]
        row = {
            "grid_index": d_index,
            "n": n_points,
            "dim": dim,
            "trials": trials,
            "freq_b1": float(np.mean([r["b1"] for r in chunk])),
            "freq_b2": float(np.mean([r["b2"] for r in chunk])),
            "freq_b3": float(np.mean([r["b3"] for r in chunk])),
        }
        report.rows.append(row)
        report.frequencies[f"b1_dim{dim}"] = row["freq_b1"]
        report.frequencies[f"b2_dim{dim}"] = row["freq_b2"]
        report.frequencies[f"b3_dim{dim}"] = row["freq_b3"]
    report.wall_clock_seconds = time.perf_counter() - start
    return report


def market_event_frequencies(
    config: mkt.MarketConfig, trials: int, seed: int
) -> dict:
    """Frequency of the joint gap events (b1 and b2 for every type) over full
    market realizations, at the global delta from the smallest type count."""

    dmax = max(config.num_worker_types, config.num_employer_types)
    n_star = min(min(config.worker_counts), min(config.employer_counts))
    delta = n_star ** (-1.0 / dmax)
    stamped = config.with_seed(seed)
    joint = 0
    for t in range(trials):
        real = mkt.sample_market(stamped, salt=(0, t))
        ok = True
        for side, n_types in (("worker", config.num_worker_types), ("employer", config.num_employer_types)):
            for ti in range(n_types):
                pts = (
                    real.eta[real.workers_of_type(ti), :]
                    if side == "worker"
                    else real.epsilon[real.employers_of_type(ti), :]
                )
                ev = event_indicators(
                    region_statistics(PointCloud(pts), delta), pts.shape[0], pts.shape[1], delta
                )
                if not (ev.b1 and ev.b2):
                    ok = False
        joint += ok
    return {"joint_b1_b2": joint / trials, "delta": delta, "trials": trials}


# ---------------------------------------------------------------------------
# general scaling experiment driven by a share template


def scaling_config_for_n(template: dict, n: int) -> mkt.MarketConfig:
    """Instantiate a share-based config template at market size ``n``.

    The template holds ``worker_shares``, ``employer_shares`` (fractions of
    n), and ``u``. Counts are rounded to at least 1; if the rounded counts
    violate the no-balanced-submarket assumption, the largest employer count
    is bumped until they do not (bounded number of attempts).
    """

    wshares = template["worker_shares"]
    eshares = template["employer_shares"]
    counts_w = tuple(max(1, round(s * n)) for s in wshares)
    counts_e = list(max(1, round(s * n)) for s in eshares)
    u = np.asarray(template["u"], dtype=float)
    dist = template.get("distribution")
    for _ in range(len(wshares) + len(eshares) + 8):
        config = mkt.MarketConfig(
            worker_counts=counts_w,
            employer_counts=tuple(counts_e),
            u=u,
            distribution=mkt.distribution_from_json(dist),
        )
        ok, _ = mkt.check_assumption_no_balanced_submarket(config)
        if ok or not template.get("enforce_no_balanced_submarket", True):
            return config
        counts_e[int(np.argmax(counts_e))] += 1
    raise UsageError(f"could not avoid balanced submarkets near n={n}")


def scaling_experiment(
    template: dict,
    n_grid: Sequence[int],
    trials: int,
    seed: int,
    *,
    workers: int = 1,
) -> ExperimentReport:
    configs = [scaling_config_for_n(template, n) for n in n_grid]
    params = dict(template)
    params["u"] = np.asarray(template["u"], dtype=float).tolist()
    return run_trials(
        configs,
        trials,
        seed,
        workers=workers,
        experiment="scaling",
        params={"template": params, "n_grid": list(n_grid)},
    )
