"""Fixed-rule quadrature on boxes and on the torus.

Two rules cover every integral in the package:

* composite Simpson on a box ``[-gamma, gamma]^d`` (tensor product), used
  for Lebesgue norms and kernel integrals, and
* the uniform periodic (trapezoidal) rule on ``[0, 2*pi]^d``, used for
  torus integrals of trigonometric integrands, where it integrates
  trigonometric polynomials below the grid frequency exactly.

Both rules are deterministic: the node count is an explicit argument, so
repeated calls produce bit-identical results.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ParameterError

TWO_PI = 2.0 * np.pi


def _eval_batch(f: Callable, points: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on an (m, d) array of points, looping if needed."""
    try:
        values = np.asarray(f(points), dtype=float)
        if values.shape == (points.shape[0],):
            return values
    except Exception:
        pass
    return np.array([float(f(p)) for p in points], dtype=float)


def simpson_nodes_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Simpson with ``n`` subintervals on [0, 1]."""
    if n < 2 or n % 2 != 0:
        raise ParameterError(f"Simpson rule needs an even subinterval count >= 2, got {n}")
    nodes = np.linspace(0.0, 1.0, n + 1)
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights /= 3.0 * n
    return nodes, weights


def box_nodes_weights(gamma: float, d: int, n_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Simpson nodes (m, d) and weights (m,) on ``[-gamma, gamma]^d``."""
    if gamma <= 0:
        raise ParameterError(f"box half-width must be positive, got {gamma}")
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    t, w = simpson_nodes_weights(n_per_axis)
    axis_nodes = -gamma + 2.0 * gamma * t
    axis_weights = 2.0 * gamma * w
    grids = np.meshgrid(*([axis_nodes] * d), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(points.shape[0])
    for axis in range(d):
        wgrid = np.meshgrid(*([axis_weights] * d), indexing="ij")[axis].ravel()
        weights *= wgrid
    return points, weights


def box_integral(f: Callable, gamma: float, d: int, n_per_axis: int = 200) -> float:
    """Integral of ``f`` over ``[-gamma, gamma]^d`` by tensor composite Simpson."""
    points, weights = box_nodes_weights(gamma, d, n_per_axis)
    return float(np.dot(weights, _eval_batch(f, points)))


def lebesgue_norm(f: Callable, gamma: float, d: int, r: float, n_per_axis: int = 200) -> float:
    """``L^r`` norm of ``f`` on ``[-gamma, gamma]^d`` by tensor composite Simpson."""
    if r < 1:
        raise ParameterError(f"Lebesgue exponent must satisfy r >= 1, got {r}")
    points, weights = box_nodes_weights(gamma, d, n_per_axis)
    values = np.abs(_eval_batch(f, points)) ** r
    return float(np.dot(weights, values)) ** (1.0 / r)


def torus_grid(d: int, n_per_axis: int) -> np.ndarray:
    """Uniform periodic grid on ``[0, 2*pi)^d`` with ``n_per_axis`` nodes per axis."""
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if n_per_axis < 2:
        raise ParameterError(f"need at least 2 nodes per axis, got {n_per_axis}")
    axis = np.arange(n_per_axis) * (TWO_PI / n_per_axis)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def torus_integral(f: Callable, d: int, n_per_axis: int = 256) -> float:
    """Integral of ``f`` over ``[0, 2*pi]^d`` by the uniform periodic rule.

    For periodic integrands the rule is the trapezoidal rule on the full
    period, so trigonometric polynomials with per-axis frequencies below
    ``n_per_axis`` are integrated exactly up to rounding.
    """
    points = torus_grid(d, n_per_axis)
    values = _eval_batch(f, points)
    return float(values.mean() * TWO_PI**d)


def sin_power_period_integral(r: float, quadrature_n: int = 10_000) -> float:
    """``integral_0^{2 pi} |sin t|^r dt`` by composite Simpson.

    The node count is forced even so the kink of ``|sin|`` at ``pi`` falls
    on a node and each half-period stays smooth for the rule.
    """
    if r < 1:
        raise ParameterError(f"Lebesgue exponent must satisfy r >= 1, got {r}")
    n = int(quadrature_n)
    if n % 2 != 0:
        n += 1
    t, w = simpson_nodes_weights(n)
    values = np.abs(np.sin(TWO_PI * t)) ** r
    return float(TWO_PI * np.dot(w, values))
