"""Experiment configs, budget sweeps, aggregation comparisons, scaling fits.

A sweep walks a budget grid (optionally crossed with a training grid),
builds or trains at every point, measures Monte Carlo sup-error and
generalization estimates, and records complexity accounts.  Rows are
keyed, appended in deterministic order with round-trip float formatting,
and skipped when already present, so interrupted sweeps resume and
reruns are byte-identical.  Results ship as delimited text plus a JSON
sidecar carrying the configuration hash.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import (
    GenBoundInputs,
    generalization_bound,
    metric_entropy_bound,
    minimax_envelopes,
    rate_schedule,
)
from .errors import ConfigError, FitError
from .erm import (
    TrainOptions,
    UniformPointSampler,
    erm_train,
    estimate_generalization,
    generate_training_set,
    load_training_set,
    save_training_set,
    suggest_learning_rate,
)
from .operators import CubeFunctionSampler, MultiOperator, build_operator
from .separable import (
    ConstructionBudget,
    SeparableNet,
    architecture_nonzero_count,
    build_constructive,
    complexity_account,
    mno_forward_vectors,
    save_separable,
    with_fresh_theta,
)
from .sinecube import calibrate_amplitude
from .spaces import LipschitzClassSpec, build_cover, project

SWEEP_COLUMNS = [
    "row_key",
    "status",
    "message",
    "operator",
    "variant",
    "P",
    "H",
    "N",
    "delta_w",
    "delta_u",
    "n_cw",
    "n_cu",
    "theta_entries",
    "complexity",
    "n_nonzero",
    "sup_error",
    "sup_samples",
    "n_alpha",
    "n_u",
    "n_x",
    "sigma",
    "final_loss",
    "gen_error",
    "gen_stderr",
]

COMPARE_COLUMNS = [
    "P",
    "parallel_error",
    "parallel_complexity",
    "nested_error",
    "nested_complexity",
    "complexity_ratio",
]

BOUNDS_COLUMNS = ["eps", "log_lower", "log_upper", "lower", "upper", "crossover"]


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _require(config: dict, key: str, context: str):
    if key not in config:
        raise ConfigError(f"{context}: missing required field '{key}'")
    return config[key]


def parse_class_spec(data: dict, context: str) -> LipschitzClassSpec:
    try:
        return LipschitzClassSpec(
            d=int(_require(data, "d", context)),
            gamma=float(_require(data, "gamma", context)),
            lip=float(_require(data, "lip", context)),
            bound=float(_require(data, "bound", context)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


@dataclass
class ProblemSetup:
    """Operator, class specs and samplers assembled from a configuration."""

    operator: MultiOperator
    w_spec: LipschitzClassSpec
    u_spec: LipschitzClassSpec
    v_spec: LipschitzClassSpec
    alpha_sampler: CubeFunctionSampler
    u_sampler: CubeFunctionSampler
    x_sampler: UniformPointSampler
    operator_name: str


def parse_problem(config: dict) -> ProblemSetup:
    classes = _require(config, "classes", "config")
    w_spec = parse_class_spec(_require(classes, "w", "classes"), "classes.w")
    u_spec = parse_class_spec(_require(classes, "u", "classes"), "classes.u")
    v_spec = parse_class_spec(_require(classes, "v", "classes"), "classes.v")

    op_cfg = _require(config, "operator", "config")
    name = _require(op_cfg, "name", "operator")
    try:
        operator = build_operator(name, op_cfg.get("params", {}), w_spec, u_spec, v_spec)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"operator '{name}': {exc}") from exc

    cube = config.get("cube", {})
    eta = float(cube.get("eta", 2.5))
    J = int(cube.get("J", 6))
    r = float(cube.get("r", 1.0))
    for spec_d, label in ((w_spec.d, "w"), (u_spec.d, "u")):
        if eta <= 1.0 + 1.0 / spec_d:
            raise ConfigError(
                f"cube decay eta={eta} is not above 1 + 1/d for class '{label}'"
            )
    amp_w = cube.get("amplitude_w", cube.get("amplitude"))
    amp_u = cube.get("amplitude_u", cube.get("amplitude"))
    if amp_w is None:
        amp_w = calibrate_amplitude(w_spec.d, eta, r, J, w_spec)
    if amp_u is None:
        amp_u = calibrate_amplitude(u_spec.d, eta, r, J, u_spec)

    return ProblemSetup(
        operator=operator,
        w_spec=w_spec,
        u_spec=u_spec,
        v_spec=v_spec,
        alpha_sampler=CubeFunctionSampler(w_spec, float(amp_w), eta=eta, J=J, r=r),
        u_sampler=CubeFunctionSampler(u_spec, float(amp_u), eta=eta, J=J, r=r),
        x_sampler=UniformPointSampler(v_spec.gamma, v_spec.d),
        operator_name=name,
    )


def parse_budget(data: dict, context: str) -> ConstructionBudget:
    try:
        return ConstructionBudget(
            P=int(_require(data, "P", context)),
            H=int(_require(data, "H", context)),
            N=int(_require(data, "N", context)),
            delta_w=float(_require(data, "delta_w", context)),
            delta_u=float(_require(data, "delta_u", context)),
            x_mesh=None if data.get("x_mesh") is None else float(data["x_mesh"]),
            variant=str(data.get("variant", "parallel")),
            grid_cap=int(data.get("grid_cap", 1_000_000)),
            n_c_cap=int(data.get("n_c_cap", 12)),
            theta_cap=int(data.get("theta_cap", 2_000_000)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _derived_seed(*path: int) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in path)).generate_state(1)[0])


def mc_sup_error(
    net: SeparableNet,
    operator: MultiOperator,
    alpha_sampler: CubeFunctionSampler,
    u_sampler: CubeFunctionSampler,
    x_sampler: UniformPointSampler,
    n_samples: int,
    seed: int,
) -> float:
    """Monte Carlo sup of ``|G - net|`` over random class triples."""
    worst = 0.0
    for s in range(n_samples):
        alpha = alpha_sampler.sample(np.random.default_rng(np.random.SeedSequence((seed, 21, s))))
        u = u_sampler.sample(np.random.default_rng(np.random.SeedSequence((seed, 22, s))))
        x = x_sampler.sample(
            np.random.default_rng(np.random.SeedSequence((seed, 23, s))), 1
        )[0]
        av = project(alpha, net.w_sensors)
        uv = project(u, net.u_sensors)
        gap = abs(operator.eval(alpha, u, x) - mno_forward_vectors(net, av, uv, x))
        worst = max(worst, gap)
    return worst


def validate_sweep_config(config: dict) -> None:
    parse_problem(config)
    grid = _require(config, "budget_grid", "config")
    if not isinstance(grid, list) or not grid:
        raise ConfigError("budget_grid must be a nonempty list")
    for i, item in enumerate(grid):
        parse_budget(item, f"budget_grid[{i}]")
    training = config.get("training")
    if training is not None:
        n_alpha_list = _require(training, "n_alpha", "training")
        if not isinstance(n_alpha_list, list) or not n_alpha_list:
            raise ConfigError("training.n_alpha must be a nonempty list")
        for field in ("n_u", "n_x"):
            if int(_require(training, field, "training")) < 1:
                raise ConfigError(f"training.{field} must be >= 1")
        if float(training.get("sigma", 0.0)) < 0:
            raise ConfigError("training.sigma must be nonnegative")


def _sweep_points(config: dict) -> list[tuple[str, int, int | None]]:
    grid = config["budget_grid"]
    training = config.get("training")
    n_alpha_values: list[int | None]
    if training is None:
        n_alpha_values = [None]
    else:
        n_alpha_values = [int(v) for v in training["n_alpha"]]
    points = []
    for ib in range(len(grid)):
        for na in n_alpha_values:
            key = f"b{ib:03d}" if na is None else f"b{ib:03d}-a{na}"
            points.append((key, ib, na))
    return points


def _compute_sweep_row(config: dict, setup: ProblemSetup, key: str, ib: int,
                       na: int | None) -> dict:
    seed = int(config.get("seed", 0))
    sup_samples = int(config.get("sup_samples", 1000))
    budget = parse_budget(config["budget_grid"][ib], f"budget_grid[{ib}]")
    row: dict = {c: None for c in SWEEP_COLUMNS}
    row.update(
        row_key=key,
        status="ok",
        message="",
        operator=setup.operator_name,
        variant=budget.variant,
        P=budget.P,
        H=budget.H,
        N=budget.N,
        delta_w=budget.delta_w,
        delta_u=budget.delta_u,
        sup_samples=sup_samples,
    )
    try:
        net = build_constructive(setup.operator, budget)
        row.update(
            n_cw=net.w_sensors.shape[0],
            n_cu=net.u_sensors.shape[0],
            theta_entries=int(net.theta.size),
            complexity=complexity_account(net),
            n_nonzero=architecture_nonzero_count(net),
            sup_error=mc_sup_error(
                net, setup.operator, setup.alpha_sampler, setup.u_sampler,
                setup.x_sampler, sup_samples, _derived_seed(seed, 1, ib),
            ),
        )
        if na is not None:
            training = config["training"]
            n_u = int(training["n_u"])
            n_x = int(training["n_x"])
            sigma = float(training.get("sigma", 0.0))
            data = generate_training_set(
                setup.operator, setup.alpha_sampler, setup.u_sampler, setup.x_sampler,
                net.w_sensors, net.u_sensors, na, n_u, n_x, sigma,
                _derived_seed(seed, 2, ib, na),
            )
            template = with_fresh_theta(
                net, 0.0,
                theta_bound=training.get("theta_bound"),
                clip_a=training.get("clip_a"),
            )
            opt_cfg = dict(training.get("optimizer", {}))
            lr = opt_cfg.get("lr", "auto")
            if lr == "auto":
                lr = suggest_learning_rate(template, data)
            options = TrainOptions(
                steps=int(opt_cfg.get("steps", 200)),
                lr=float(lr),
                batch=None if opt_cfg.get("batch") is None else int(opt_cfg["batch"]),
                seed=int(opt_cfg.get("seed", 0)),
            )
            result = erm_train(template, data, options)
            gen = estimate_generalization(
                result.net, setup.operator, setup.alpha_sampler, setup.u_sampler,
                setup.x_sampler,
                n_test_alpha=int(training.get("test_alpha", 32)),
                n_test_u=int(training.get("test_u", 2)),
                n_x=int(training.get("test_x", 4)),
                seed=_derived_seed(seed, 3, ib, na),
            )
            row.update(
                n_alpha=na,
                n_u=n_u,
                n_x=n_x,
                sigma=sigma,
                final_loss=result.final_loss,
                gen_error=gen.mean,
                gen_stderr=gen.stderr,
            )
    except Exception as exc:  # per-row failures recorded, sweep continues
        row["status"] = "error"
        row["message"] = f"{type(exc).__name__}: {exc}"
    return row


def _existing_keys(csv_path: str) -> set[str]:
    if not os.path.exists(csv_path):
        return set()
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return set()
        if not header or header[0] != "row_key":
            return set()
        return {row[0] for row in reader if row}


def _append_row(csv_path: str, columns: list[str], row: dict, write_header: bool) -> None:
    line_parts = [_fmt(row.get(c)) for c in columns]
    text = ""
    if write_header:
        text += ",".join(columns) + "\n"
    text += ",".join(line_parts) + "\n"
    with open(csv_path, "a", encoding="utf-8", newline="") as fh:
        fh.write(text)
        fh.flush()


def _write_sidecar(out_dir: str, stem: str, config: dict, columns: list[str]) -> str:
    sidecar_path = os.path.join(out_dir, f"{stem}.json")
    payload = {
        "config_hash": config_hash(config),
        "columns": columns,
        "config": config,
    }
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return sidecar_path


def run_sweep(config: dict, out_dir: str, threads: int = 1) -> list[dict]:
    """Execute a budget/training sweep, appending keyed rows as they finish.

    Returns all rows of the finished table (existing plus newly computed).
    """
    validate_sweep_config(config)
    setup = parse_problem(config)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "sweep.csv")
    _write_sidecar(out_dir, "sweep", config, SWEEP_COLUMNS)

    points = _sweep_points(config)
    existing = _existing_keys(csv_path)
    pending = [(key, ib, na) for (key, ib, na) in points if key not in existing]

    write_header = not os.path.exists(csv_path) or os.path.getsize(csv_path) == 0

    threads = max(1, int(threads))
    if pending:
        if threads == 1:
            for key, ib, na in pending:
                row = _compute_sweep_row(config, setup, key, ib, na)
                _append_row(csv_path, SWEEP_COLUMNS, row, write_header)
                write_header = False
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(_compute_sweep_row, config, setup, key, ib, na)
                    for key, ib, na in pending
                ]
                for future in futures:
                    row = future.result()
                    _append_row(csv_path, SWEEP_COLUMNS, row, write_header)
                    write_header = False

    return read_rows(csv_path)


def read_rows(csv_path: str) -> list[dict]:
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def validate_compare_config(config: dict) -> None:
    parse_problem(config)
    base = _require(config, "base_budget", "config")
    parse_budget(base, "base_budget")
    p_values = _require(config, "p_values", "config")
    if not isinstance(p_values, list) or not p_values:
        raise ConfigError("p_values must be a nonempty list")
    if any(int(p) < 1 for p in p_values):
        raise ConfigError("p_values must be positive")


def compare_aggregation(config: dict, out_dir: str | None = None) -> list[dict]:
    """Parallel versus nested aggregation at matched stage-2 targets.

    For each stage-1 resolution ``P`` the parallel column keeps the base
    stage-2 budget while the nested column refines stage-2 by the stage-1
    term count; both meet the base error target and the complexity ratio
    exposes the inflation.
    """
    validate_compare_config(config)
    setup = parse_problem(config)
    seed = int(config.get("seed", 0))
    sup_samples = int(config.get("sup_samples", 400))
    base = config["base_budget"]
    rows = []
    for p in [int(v) for v in config["p_values"]]:
        budget_par = parse_budget({**base, "P": p, "variant": "parallel"}, "base_budget")
        budget_nst = parse_budget({**base, "P": p, "variant": "nested"}, "base_budget")
        net_par = build_constructive(setup.operator, budget_par)
        net_nst = build_constructive(setup.operator, budget_nst)
        err_par = mc_sup_error(
            net_par, setup.operator, setup.alpha_sampler, setup.u_sampler,
            setup.x_sampler, sup_samples, _derived_seed(seed, 4),
        )
        err_nst = mc_sup_error(
            net_nst, setup.operator, setup.alpha_sampler, setup.u_sampler,
            setup.x_sampler, sup_samples, _derived_seed(seed, 4),
        )
        comp_par = complexity_account(net_par)
        comp_nst = complexity_account(net_nst)
        rows.append(
            {
                "P": p,
                "parallel_error": err_par,
                "parallel_complexity": comp_par,
                "nested_error": err_nst,
                "nested_complexity": comp_nst,
                "complexity_ratio": comp_nst / comp_par,
            }
        )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "compare_agg.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(COMPARE_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row[c]) for c in COMPARE_COLUMNS) + "\n")
        _write_sidecar(out_dir, "compare_agg", config, COMPARE_COLUMNS)
    return rows


def _envelope_rows(config: dict) -> list[dict]:
    rows_obj = minimax_envelopes(
        np.asarray(config["eps_grid"], dtype=float),
        eta=float(_require(config, "eta", "config")),
        delta=float(config.get("delta", 0.0)),
        r=float(config.get("r", 1.0)),
        d_w=int(config.get("d_w", 1)),
        d_u=int(config.get("d_u", 1)),
        c_lower=float(config.get("c_lower", 1.0)),
        d_upper=float(config.get("d_upper", 1.0)),
    )
    return [
        {
            "eps": r.eps,
            "log_lower": r.log_lower,
            "log_upper": r.log_upper,
            "lower": r.lower if math.isfinite(r.lower) else None,
            "upper": r.upper if math.isfinite(r.upper) else None,
            "crossover": r.crossover,
        }
        for r in rows_obj
    ]


def _generalization_rows(config: dict) -> list[dict]:
    inputs = GenBoundInputs(
        eps=float(_require(config, "eps", "config")),
        eta=float(_require(config, "eta", "config")),
        sigma=float(config.get("sigma", 0.0)),
        beta_v=float(config.get("beta_v", 1.0)),
        n_alpha=int(_require(config, "n_alpha", "config")),
        n_u=int(config.get("n_u", 1)),
        n_x=int(config.get("n_x", 1)),
        log_cov_eta=float(config.get("log_cov_eta", 0.0)),
        log_cov_eta4b=float(config.get("log_cov_eta4b", 0.0)),
    )
    b = generalization_bound(inputs)
    return [
        {
            "total": b.total,
            "approx_term": b.approx_term,
            "scale_term": b.scale_term,
            "noise_sqrt_term": b.noise_sqrt_term,
            "noise_linear_term": b.noise_linear_term,
            "outer_term": b.outer_term,
        }
    ]


def _entropy_rows(config: dict) -> list[dict]:
    result = metric_entropy_bound(
        n_terms_l=int(_require(config, "P", "config")),
        n_terms_b=int(_require(config, "H", "config")),
        n_terms_tau=int(_require(config, "N", "config")),
        k_l=float(_require(config, "k_l", "config")),
        k_b=float(_require(config, "k_b", "config")),
        k_tau=float(_require(config, "k_tau", "config")),
        depth_l=float(config.get("depth_l", 1.0)),
        depth_b=float(config.get("depth_b", 1.0)),
        depth_tau=float(config.get("depth_tau", 1.0)),
        kappa_l=float(config.get("kappa_l", 1.0)),
        kappa_b=float(config.get("kappa_b", 1.0)),
        kappa_tau=float(config.get("kappa_tau", 1.0)),
        eta=float(_require(config, "eta", "config")),
        log_t_override=(
            None if config.get("log_t_override") is None
            else float(config["log_t_override"])
        ),
    )
    return [{"log_cover": result.log_cover, "log_t": result.log_t}]


def _rate_rows(config: dict) -> list[dict]:
    n_alphas = _require(config, "n_alpha_grid", "config")
    if not isinstance(n_alphas, list) or not n_alphas:
        raise ConfigError("n_alpha_grid must be a nonempty list")
    rows = []
    for n_alpha in n_alphas:
        eps, eta = rate_schedule(
            int(n_alpha),
            d_w=int(config.get("d_w", 1)),
            d_u=int(config.get("d_u", 1)),
            beta_v=float(config.get("beta_v", 1.0)),
        )
        rows.append({"n_alpha": int(n_alpha), "eps": eps, "eta": eta})
    return rows


BOUND_TABLES = {
    "envelopes": (_envelope_rows, BOUNDS_COLUMNS),
    "generalization": (
        _generalization_rows,
        ["total", "approx_term", "scale_term", "noise_sqrt_term",
         "noise_linear_term", "outer_term"],
    ),
    "entropy": (_entropy_rows, ["log_cover", "log_t"]),
    "rate": (_rate_rows, ["n_alpha", "eps", "eta"]),
}


def validate_bounds_config(config: dict) -> None:
    which = config.get("which", "envelopes")
    if which not in BOUND_TABLES:
        raise ConfigError(
            f"unknown bound table '{which}' (choose from {sorted(BOUND_TABLES)})"
        )
    if which == "envelopes":
        grid = _require(config, "eps_grid", "config")
        if not isinstance(grid, list) or not grid:
            raise ConfigError("eps_grid must be a nonempty list")
    builder, _ = BOUND_TABLES[which]
    try:
        builder(config)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def bound_envelopes(config: dict, out_dir: str | None = None) -> list[dict]:
    """Tabulate a bound calculator (``which`` selects it), optionally writing
    CSV plus sidecar.

    ``envelopes`` (default) evaluates the minimax sandwich over
    ``eps_grid`` — its multiplicative constants are user-supplied
    existence constants, recorded as such via the config in the sidecar.
    ``generalization``, ``entropy`` and ``rate`` expose the closed-form
    calculators on single inputs (``rate`` over ``n_alpha_grid``).
    """
    validate_bounds_config(config)
    which = config.get("which", "envelopes")
    builder, columns = BOUND_TABLES[which]
    rows = builder(config)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "bounds.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")
        _write_sidecar(out_dir, "bounds", config, columns)
    return rows


def validate_gen_data_config(config: dict) -> None:
    parse_problem(config)
    sensors = _require(config, "sensors", "config")
    for field in ("delta_w", "delta_u"):
        if float(_require(sensors, field, "sensors")) <= 0:
            raise ConfigError(f"sensors.{field} must be positive")
    training = _require(config, "training", "config")
    for field in ("n_alpha", "n_u", "n_x"):
        if int(_require(training, field, "training")) < 1:
            raise ConfigError(f"training.{field} must be >= 1")
    if float(training.get("sigma", 0.0)) < 0:
        raise ConfigError("training.sigma must be nonnegative")


def run_gen_data(config: dict, out_dir: str) -> str:
    """Sample a hierarchical training set and write it with its sidecar."""
    validate_gen_data_config(config)
    setup = parse_problem(config)
    sensors_cfg = config["sensors"]
    w_sensors = build_cover(setup.w_spec, float(sensors_cfg["delta_w"])).centers
    u_sensors = build_cover(setup.u_spec, float(sensors_cfg["delta_u"])).centers
    training = config["training"]
    data = generate_training_set(
        setup.operator, setup.alpha_sampler, setup.u_sampler, setup.x_sampler,
        w_sensors, u_sensors,
        int(training["n_alpha"]), int(training["n_u"]), int(training["n_x"]),
        float(training.get("sigma", 0.0)), int(config.get("seed", 0)),
    )
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "training.csv")
    save_training_set(data, csv_path, os.path.join(out_dir, "training.json"))
    _write_sidecar(out_dir, "gen_data_config", config, [])
    return csv_path


def validate_train_config(config: dict) -> None:
    parse_problem(config)
    parse_budget(_require(config, "budget", "config"), "budget")
    data_cfg = config.get("data")
    if data_cfg is not None:
        for field in ("csv", "sidecar"):
            path = _require(data_cfg, field, "data")
            if not os.path.exists(path):
                raise ConfigError(f"data.{field} points to a missing file: {path}")
    else:
        training = _require(config, "training", "config")
        for field in ("n_alpha", "n_u", "n_x"):
            if int(_require(training, field, "training")) < 1:
                raise ConfigError(f"training.{field} must be >= 1")


def run_train(config: dict, out_dir: str) -> dict:
    """Build the architecture, fit coefficients by gradient descent, save."""
    validate_train_config(config)
    setup = parse_problem(config)
    seed = int(config.get("seed", 0))
    budget = parse_budget(config["budget"], "budget")
    net = build_constructive(setup.operator, budget)

    data_cfg = config.get("data")
    if data_cfg is not None:
        data = load_training_set(data_cfg["csv"], data_cfg["sidecar"])
        if data.w_sensors.shape != net.w_sensors.shape or not np.allclose(
            data.w_sensors, net.w_sensors
        ):
            raise ConfigError(
                "loaded training set was sampled at different first-domain sensors"
            )
        if data.u_sensors.shape != net.u_sensors.shape or not np.allclose(
            data.u_sensors, net.u_sensors
        ):
            raise ConfigError(
                "loaded training set was sampled at different second-domain sensors"
            )
    else:
        training = config["training"]
        data = generate_training_set(
            setup.operator, setup.alpha_sampler, setup.u_sampler, setup.x_sampler,
            net.w_sensors, net.u_sensors,
            int(training["n_alpha"]), int(training["n_u"]), int(training["n_x"]),
            float(training.get("sigma", 0.0)), _derived_seed(seed, 2),
        )

    training = config.get("training", {})
    template = with_fresh_theta(
        net, 0.0,
        theta_bound=training.get("theta_bound"),
        clip_a=training.get("clip_a"),
    )
    opt_cfg = dict(training.get("optimizer", {}))
    lr = opt_cfg.get("lr", "auto")
    if lr == "auto":
        lr = suggest_learning_rate(template, data)
    options = TrainOptions(
        steps=int(opt_cfg.get("steps", 200)),
        lr=float(lr),
        batch=None if opt_cfg.get("batch") is None else int(opt_cfg["batch"]),
        seed=int(opt_cfg.get("seed", 0)),
    )
    result = erm_train(template, data, options)
    gen = estimate_generalization(
        result.net, setup.operator, setup.alpha_sampler, setup.u_sampler,
        setup.x_sampler,
        n_test_alpha=int(training.get("test_alpha", 32)),
        n_test_u=int(training.get("test_u", 2)),
        n_x=int(training.get("test_x", 4)),
        seed=_derived_seed(seed, 3),
    )

    os.makedirs(out_dir, exist_ok=True)
    save_separable(result.net, os.path.join(out_dir, "trained_net.json"))
    trace_path = os.path.join(out_dir, "loss_trace.csv")
    with open(trace_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("step,loss\n")
        for step, loss in enumerate(result.loss_trace):
            fh.write(f"{step},{_fmt(float(loss))}\n")
    metrics = {
        "final_loss": result.final_loss,
        "gen_error": gen.mean,
        "gen_stderr": gen.stderr,
        "n_groups": gen.n_groups,
        "learning_rate": options.lr,
        "steps": options.steps,
        "complexity": complexity_account(result.net),
        "config_hash": config_hash(config),
    }
    with open(os.path.join(out_dir, "train_metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    _write_sidecar(out_dir, "train_config", config, [])
    return metrics


CONFIG_VALIDATORS = {
    "sweep": validate_sweep_config,
    "compare-agg": validate_compare_config,
    "bounds": validate_bounds_config,
    "gen-data": validate_gen_data_config,
    "train": validate_train_config,
}


def validate_config(config: dict) -> str:
    """Check any known configuration document; returns its kind."""
    if not isinstance(config, dict):
        raise ConfigError("configuration root must be a JSON object")
    kind = _require(config, "kind", "config")
    validator = CONFIG_VALIDATORS.get(kind)
    if validator is None:
        raise ConfigError(
            f"unknown config kind '{kind}' (choose from {sorted(CONFIG_VALIDATORS)})"
        )
    validator(config)
    return kind


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of an error-versus-complexity law."""

    model: str
    exponent: float
    intercept: float
    residual_rms: float
    n_points: int


FIT_MODELS = ("powerlaw", "loglog-iterated")


def fit_scaling(points, model: str) -> ScalingFit:
    """Fit ``log e`` against a transform of the complexity ``c``.

    ``powerlaw`` regresses on ``log c`` (slope is the power-law exponent);
    ``loglog-iterated`` regresses on ``log(log c / log log c)``, the
    abscissa of iterated-logarithm laws, which needs ``c > e`` so the
    iterated logarithm is positive.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError(f"points must form an (n, 2) array, got shape {pts.shape}")
    if pts.shape[0] < 3:
        raise FitError(f"need at least 3 points to fit, got {pts.shape[0]}")
    c, e = pts[:, 0], pts[:, 1]
    if np.any(e <= 0):
        raise FitError("errors must be positive to fit in log space")
    if model == "powerlaw":
        if np.any(c <= 0):
            raise FitError("complexities must be positive for a power-law fit")
        xs = np.log(c)
    elif model == "loglog-iterated":
        if np.any(c <= math.e):
            raise FitError("complexities must exceed e for an iterated-logarithm fit")
        loglog = np.log(np.log(c))
        if np.any(loglog <= 0):
            raise FitError("iterated logarithm must be positive")
        xs = np.log(np.log(c) / loglog)
    else:
        raise FitError(f"unknown fit model '{model}' (choose from {FIT_MODELS})")
    ys = np.log(e)
    if float(np.ptp(xs)) < 1e-12:
        raise FitError("degenerate abscissa: all complexities map to one node")
    slope, intercept = np.polyfit(xs, ys, 1)
    residuals = ys - (slope * xs + intercept)
    return ScalingFit(
        model=model,
        exponent=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
        n_points=int(pts.shape[0]),
    )
