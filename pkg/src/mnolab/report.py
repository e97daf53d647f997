"""Figure rendering for sweep and comparison tables.

Reads the delimited outputs produced by the experiment drivers and saves
matplotlib figures next to them, so a results directory carries both the
data and its pictures.  Rendering is strictly a consumer of the tables:
nothing here feeds back into the computations.
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigError, FitError
from .sweep import ScalingFit, fit_scaling, read_rows


def _float_or_none(text: str):
    if text is None or text == "":
        return None
    return float(text)


def sweep_points(rows: list[dict], x_column: str = "complexity",
                 y_column: str = "sup_error") -> np.ndarray:
    """Extract positive (x, y) pairs from ok rows of a sweep table."""
    points = []
    for row in rows:
        if row.get("status") != "ok":
            continue
        x = _float_or_none(row.get(x_column))
        y = _float_or_none(row.get(y_column))
        if x is None or y is None or x <= 0 or y <= 0:
            continue
        points.append((x, y))
    return np.array(points, dtype=float).reshape(-1, 2)


def render_sweep_figure(rows: list[dict], out_path: str,
                        fit: ScalingFit | None = None,
                        y_column: str = "sup_error") -> str:
    """Log-log error versus complexity, one marker set per variant."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    variants = sorted({row.get("variant", "") for row in rows if row.get("status") == "ok"})
    for variant, marker in zip(variants, "osd^v*"):
        pts = sweep_points([r for r in rows if r.get("variant") == variant],
                           y_column=y_column)
        if pts.size:
            ax.loglog(pts[:, 0], pts[:, 1], marker, label=variant or "default")
    if fit is not None:
        pts = sweep_points(rows, y_column=y_column)
        if pts.size:
            cs = np.geomspace(pts[:, 0].min(), pts[:, 0].max(), 100)
            if fit.model == "powerlaw":
                xs = np.log(cs)
            else:
                xs = np.log(np.log(cs) / np.log(np.log(cs)))
            ax.loglog(cs, np.exp(fit.exponent * xs + fit.intercept), "--",
                      label=f"{fit.model} fit (exponent {fit.exponent:.3g})")
    ax.set_xlabel("complexity (nonzero-parameter account)")
    ax.set_ylabel(y_column.replace("_", " "))
    ax.set_title("error versus complexity")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_compare_figure(rows: list[dict], out_path: str) -> str:
    """Complexity against stage-1 resolution for each aggregation variant."""
    ps = np.array([float(r["P"]) for r in rows])
    par = np.array([float(r["parallel_complexity"]) for r in rows])
    nst = np.array([float(r["nested_complexity"]) for r in rows])
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    axes[0].plot(ps, par, "o-", label="parallel")
    axes[0].plot(ps, nst, "s-", label="nested")
    axes[0].set_yscale("log")
    axes[0].set_xlabel("stage-1 resolution P")
    axes[0].set_ylabel("complexity")
    axes[0].set_title("aggregation cost")
    axes[0].grid(True, alpha=0.3)
    axes[0].legend()
    axes[1].plot(ps, nst / par, "d-")
    axes[1].set_xlabel("stage-1 resolution P")
    axes[1].set_ylabel("nested / parallel complexity")
    axes[1].set_title("overhead ratio")
    axes[1].grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_bounds_figure(rows: list[dict], out_path: str) -> str:
    """Log-scale minimax envelopes against accuracy."""
    eps = np.array([float(r["eps"]) for r in rows])
    low = np.array([float(r["log_lower"]) for r in rows])
    up = np.array([float(r["log_upper"]) for r in rows])
    order = np.argsort(eps)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(eps[order], low[order], "o-", label="log lower envelope")
    ax.plot(eps[order], up[order], "s-", label="log upper envelope")
    ax.set_xscale("log")
    ax.set_xlabel("accuracy eps")
    ax.set_ylabel("log parameter count")
    ax.set_title("minimax complexity envelopes")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_report(input_csv: str, out_dir: str) -> list[str]:
    """Detect the table flavor of ``input_csv`` and render its figures.

    Sweep tables additionally get scaling-law fits written to
    ``fits.json`` (models that fail on the data are recorded with the
    failure message rather than aborting the report).
    """
    if not os.path.exists(input_csv):
        raise ConfigError(f"input table not found: {input_csv}")
    rows = read_rows(input_csv)
    if not rows:
        raise ConfigError(f"input table is empty: {input_csv}")
    os.makedirs(out_dir, exist_ok=True)
    columns = set(rows[0].keys())
    written: list[str] = []
    if {"row_key", "complexity", "sup_error"} <= columns:
        fits: dict[str, dict] = {}
        chosen_fit = None
        points = sweep_points(rows)
        for model in ("powerlaw", "loglog-iterated"):
            try:
                result = fit_scaling(points, model)
                fits[model] = {
                    "exponent": result.exponent,
                    "intercept": result.intercept,
                    "residual_rms": result.residual_rms,
                    "n_points": result.n_points,
                }
                if chosen_fit is None or fits[model]["residual_rms"] < fits[
                    chosen_fit.model
                ]["residual_rms"]:
                    chosen_fit = result
            except FitError as exc:
                fits[model] = {"error": str(exc)}
        fit_path = os.path.join(out_dir, "fits.json")
        with open(fit_path, "w", encoding="utf-8") as fh:
            json.dump(fits, fh, indent=2, sort_keys=True)
        written.append(fit_path)
        written.append(
            render_sweep_figure(rows, os.path.join(out_dir, "sweep_error.png"),
                                fit=chosen_fit)
        )
        if any(_float_or_none(r.get("gen_error")) is not None for r in rows):
            written.append(
                render_sweep_figure(
                    rows, os.path.join(out_dir, "sweep_generalization.png"),
                    y_column="gen_error",
                )
            )
    elif {"P", "parallel_complexity", "nested_complexity"} <= columns:
        written.append(
            render_compare_figure(rows, os.path.join(out_dir, "compare_agg.png"))
        )
    elif {"eps", "log_lower", "log_upper"} <= columns:
        written.append(
            render_bounds_figure(rows, os.path.join(out_dir, "bounds.png"))
        )
    else:
        raise ConfigError(
            "unrecognized table: expected sweep, comparison or bounds columns, "
            f"got {sorted(columns)}"
        )
    return written
