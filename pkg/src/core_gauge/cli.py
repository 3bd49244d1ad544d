"""Command-line front end.

Subcommands: ``gen`` (sample a market), ``solve`` (matching + core bounds),
``verify`` (independent stability check), ``experiment`` (Monte Carlo
harnesses), ``assumptions`` (structural checks on a config).

Exit codes: 0 success, 2 validation/usage error, 3 capability error,
4 internal inconsistency. The environment variable CORE_GAUGE_SEED overrides
a config file's seed; an explicit ``--seed`` flag wins over both.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import corepoly, experiments, market as mkt, oracle
from .errors import ConfigurationError, CoreGaugeError
from .matching import Matching

__all__ = ["main"]


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc


def _write_json(path: str, payload: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _resolve_seed(args, config_seed: int) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CORE_GAUGE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigurationError(f"CORE_GAUGE_SEED is not an integer: {env!r}") from exc
    return config_seed


def _cmd_gen(args) -> int:
    config = mkt.MarketConfig.from_json_dict(_load_json(args.config))
    config = config.with_seed(_resolve_seed(args, config.seed))
    real = mkt.sample_market(config)
    _write_json(args.out, real.to_json_dict())
    print(f"sampled market with {config.n_workers} workers x {config.n_employers} employers -> {args.out}")
    return 0


def _cmd_solve(args) -> int:
    real = mkt.MarketRealization.from_json_dict(_load_json(args.market))
    matching, _, bounds = corepoly.solve_market(real)
    payload = {"matching": matching.to_json_dict(), "core": bounds.to_json_dict()}
    _write_json(args.out, payload)
    print(
        f"matched {matching.num_matched} pairs, weight {matching.weight:.6f}, "
        f"core size {bounds.core_size:.6f} -> {args.out}"
    )
    return 0


def _cmd_verify(args) -> int:
    real = mkt.MarketRealization.from_json_dict(_load_json(args.market))
    solution = _load_json(args.solution)
    try:
        matching = Matching.from_json_dict(solution["matching"])
        core = solution["core"]
        nodes = [(int(nd["k"]), int(nd["q"])) for nd in core["nodes"]]
        candidates = {
            name: dict(zip(nodes, core[name]))
            for name in ("witness_min", "witness_max", "midpoint")
            if name in core
        }
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"{args.solution} is not a solve output: {exc}") from exc
    if not candidates:
        raise ConfigurationError(f"{args.solution} holds no price vectors to verify")

    all_ok = True
    for name, alpha in candidates.items():
        ok, violations = oracle.verify_stability(real, matching, alpha)
        status = "stable" if ok else "UNSTABLE"
        print(f"{name}: {status}")
        for v in violations[:8]:
            print(f"  - {v}")
        all_ok &= ok
    return 0 if all_ok else 4


def _cmd_experiment(args) -> int:
    config = _load_json(args.config)
    declared = config.get("experiment")
    if declared is not None and declared != args.kind:
        raise ConfigurationError(
            f"config declares experiment {declared!r} but {args.kind!r} was requested"
        )
    seed = int(config.get("seed", 0))
    trials = int(config.get("trials", 100))
    workers = args.workers if args.workers else int(config.get("workers", 1))

    if args.kind == "lowerbound":
        report = experiments.lower_bound_experiment(
            K=int(config.get("k", 2)),
            n_tilde_grid=config["n_tilde_grid"],
            trials=trials,
            seed=seed,
            workers=workers,
        )
    elif args.kind == "theorem2":
        report = experiments.theorem2_experiment(
            K=int(config.get("k", 2)),
            n_grid=config["n_grid"],
            imbalance=config.get("imbalance", "quarter"),
            trials=trials,
            seed=seed,
            workers=workers,
            u_value=float(config.get("u", 1.0)),
        )
    elif args.kind == "lemmas":
        report = experiments.lemma_audit_experiment(
            n_points=int(config.get("n_points", 10_000)),
            dims=config.get("dims", [2, 3]),
            trials=trials,
            seed=seed,
            workers=workers,
        )
        if "market_template" in config:
            template = mkt.MarketConfig.from_json_dict(config["market_template"])
            report.frequencies["market"] = experiments.market_event_frequencies(
                template, trials=trials, seed=seed
            )
    elif args.kind == "scaling":
        report = experiments.scaling_experiment(
            template=config["template"],
            n_grid=config["n_grid"],
            trials=trials,
            seed=seed,
            workers=workers,
        )
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigurationError(f"unknown experiment kind {args.kind!r}")

    report.write(args.out_dir)
    slope = "n/a" if report.slope is None else f"{report.slope:.4f}"
    print(
        f"{args.kind}: {len(report.rows)} grid points x {report.trials} trials, "
        f"slope {slope}, wall clock {report.wall_clock_seconds:.1f}s -> {args.out_dir}"
    )
    return 0


def _cmd_assumptions(args) -> int:
    config = mkt.MarketConfig.from_json_dict(_load_json(args.config))
    ok, witness = mkt.check_assumption_no_balanced_submarket(config)
    growth_c = args.growth_fraction
    report = {
        "no_balanced_submarket": ok,
        "violating_types": None
        if witness is None
        else {"worker_types": sorted(witness[0]), "employer_types": sorted(witness[1])},
        "linear_growth_fraction": growth_c,
        "linear_growth": mkt.check_assumption_linear_growth(config, growth_c),
        "min_type_count": min(min(config.worker_counts), min(config.employer_counts)),
        "n_agents": config.n_agents,
    }
    print(json.dumps(report, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="core-gauge",
        description="Assignment-market core measurement laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a market realization")
    p.add_argument("--config", required=True, help="market config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output realization JSON")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", help="matching, core bounds, and core size")
    p.add_argument("--market", required=True, help="market realization JSON")
    p.add_argument("--out", required=True, help="output solution JSON")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="independent stability check of a solution")
    p.add_argument("--market", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    p.add_argument("kind", choices=["scaling", "lowerbound", "theorem2", "lemmas"])
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("assumptions", help="structural assumption report")
    p.add_argument("--config", required=True)
    p.add_argument(
        "--growth-fraction",
        type=float,
        default=0.05,
        help="fraction of n each type must hold (default 0.05)",
    )
    p.set_defaults(func=_cmd_assumptions)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CoreGaugeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
