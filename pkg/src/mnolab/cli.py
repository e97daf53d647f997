"""Command-line interface for the operator-learning laboratory.

Every subcommand reads a JSON configuration (``--config``) and writes
delimited results plus a JSON sidecar into ``--out``; ``report`` renders
matplotlib figures from a results table.  Exit codes: 0 on success, 2 on
configuration problems, 3 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError
from .sweep import (
    bound_envelopes,
    compare_aggregation,
    fit_scaling,
    run_gen_data,
    run_sweep,
    run_train,
    validate_config,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_config(path: str, seed_override: int | None) -> dict:
    if path is None:
        raise ConfigError("--config is required for this command")
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("configuration root must be a JSON object")
    if seed_override is not None:
        config = {**config, "seed": seed_override}
    return config


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("MNOLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"MNOLAB_THREADS is not an integer: {env!r}") from exc
    return 1


def _expect_kind(config: dict, kind: str) -> None:
    found = config.get("kind")
    if found != kind:
        raise ConfigError(f"config kind is '{found}', expected '{kind}'")


def _cmd_sweep(args) -> int:
    config = _load_config(args.config, args.seed)
    _expect_kind(config, "sweep")
    rows = run_sweep(config, args.out, threads=_resolve_threads(args.threads))
    n_err = sum(1 for r in rows if r.get("status") == "error")
    print(f"sweep: {len(rows)} rows ({n_err} errored) -> {os.path.join(args.out, 'sweep.csv')}")
    return EXIT_OK


def _cmd_compare_agg(args) -> int:
    config = _load_config(args.config, args.seed)
    _expect_kind(config, "compare-agg")
    rows = compare_aggregation(config, args.out)
    for row in rows:
        print(
            f"P={row['P']}: parallel complexity {row['parallel_complexity']}, "
            f"nested {row['nested_complexity']} "
            f"(ratio {row['complexity_ratio']:.3f})"
        )
    print(f"compare-agg -> {os.path.join(args.out, 'compare_agg.csv')}")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    config = _load_config(args.config, args.seed)
    _expect_kind(config, "bounds")
    rows = bound_envelopes(config, args.out)
    crossed = sum(1 for r in rows if r["crossover"])
    print(
        f"bounds: {len(rows)} grid points ({crossed} past crossover) -> "
        f"{os.path.join(args.out, 'bounds.csv')}"
    )
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    config = _load_config(args.config, args.seed)
    _expect_kind(config, "gen-data")
    csv_path = run_gen_data(config, args.out)
    print(f"gen-data -> {csv_path}")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = _load_config(args.config, args.seed)
    _expect_kind(config, "train")
    metrics = run_train(config, args.out)
    print(
        f"train: final loss {metrics['final_loss']:.6g}, "
        f"generalization {metrics['gen_error']:.6g} "
        f"(stderr {metrics['gen_stderr']:.2g}) -> {args.out}"
    )
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = _load_config(args.config, args.seed)
    kind = validate_config(config)
    print(f"ok: kind={kind}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    from .report import sweep_points
    from .sweep import read_rows

    if not os.path.exists(args.input):
        raise ConfigError(f"input table not found: {args.input}")
    rows = read_rows(args.input)
    points = sweep_points(rows, x_column=args.x_column, y_column=args.y_column)
    fit = fit_scaling(points, args.model)
    payload = {
        "model": fit.model,
        "exponent": fit.exponent,
        "intercept": fit.intercept,
        "residual_rms": fit.residual_rms,
        "n_points": fit.n_points,
        "x_column": args.x_column,
        "y_column": args.y_column,
        "input": args.input,
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "fit.json")
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        print(f"fit -> {out_path}")
    print(
        f"fit[{fit.model}]: exponent {fit.exponent:.6g}, "
        f"intercept {fit.intercept:.6g}, rms {fit.residual_rms:.3g} "
        f"over {fit.n_points} points"
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import render_report

    written = render_report(args.input, args.out)
    for path in written:
        print(f"report -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnolab",
        description="laboratory for separable multi-operator approximation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_out=True):
        p.add_argument("--config", help="path to a JSON configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configuration seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: MNOLAB_THREADS or 1)")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("sweep", help="run a budget/training sweep")
    add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare-agg", help="parallel versus nested aggregation")
    add_common(p)
    p.set_defaults(func=_cmd_compare_agg)

    p = sub.add_parser("bounds", help="tabulate minimax complexity envelopes")
    add_common(p)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("gen-data", help="sample a hierarchical training set")
    add_common(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="build an architecture and fit coefficients")
    add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("validate", help="check a configuration file")
    add_common(p, needs_out=False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("fit", help="fit a scaling law to a sweep table")
    p.add_argument("--input", required=True, help="sweep table (CSV)")
    p.add_argument("--model", default="powerlaw",
                   choices=("powerlaw", "loglog-iterated"))
    p.add_argument("--x-column", default="complexity")
    p.add_argument("--y-column", default="sup_error")
    p.add_argument("--out", default=None, help="optional output directory")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("report", help="render figures from a results table")
    p.add_argument("--input", required=True, help="results table (CSV)")
    p.add_argument("--out", required=True, help="directory for figures")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure: report and signal distinctly
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
