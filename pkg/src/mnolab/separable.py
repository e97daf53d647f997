"""Separable multi-operator architecture, concatenated baseline, builders.

The separable architecture evaluates

    ``sum_{p,k,l} theta[p,k,l] * l_p(alpha_s) * b_k(u_s) * tau_l(x)``

where ``alpha_s``/``u_s`` are sensor evaluations of the input functions.
The factorized evaluation contracts one factor at a time and agrees with
the brute-force triple sum to rounding.  The concatenated baseline feeds
both rescaled sensor blocks into shared branch networks:

    ``sum_{k,l} theta[k,l] * b_k(alpha_s*, u_s*) * tau_l(x)``

with input rescale factors ``max(beta_W, beta_U)/beta_W`` and
``max(beta_W, beta_U)/beta_U`` on the two blocks.

``build_constructive`` realises the two-stage approximation: cover both
function domains, grid the discretized cubes, take exact hat-product
partitions of unity as subnet families, lift grid nodes to anchor
functions, and fill ``theta`` with operator evaluations at the anchors.
With the parallel aggregation the stage-1 coefficients sum to one, so the
stage-2 resolution needed for a target accuracy is independent of the
stage-1 resolution; the nested variant instead refines the stage-2 meshes
by the stage-1 resolution, exposing the complexity inflation at matched
error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError, ResourceBudgetError
from .operators import MultiOperator
from .relunet import ReluNet, count_nonzero, forward, net_from_dict, net_to_dict
from .spaces import build_cover, build_pou, lift, project


class ReluNetFamily:
    """A list of scalar-output ReLU networks sharing one input dimension."""

    kind = "relu"

    def __init__(self, nets: Sequence[ReluNet]):
        nets = list(nets)
        if not nets:
            raise ParameterError("a subnet family needs at least one member")
        dim = nets[0].input_dim
        for net in nets:
            if net.input_dim != dim:
                raise ParameterError("all family members must share the input dimension")
            if net.output_dim != 1:
                raise ParameterError("subnet outputs must be scalar")
        self.nets = nets
        self.input_dim = dim

    @property
    def size(self) -> int:
        return len(self.nets)

    def values(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        return np.array([forward(net, vec)[0] for net in self.nets])

    def count_nonzero_each(self) -> list[int]:
        return [count_nonzero(net) for net in self.nets]

    def count_nonzero_total(self) -> int:
        return sum(self.count_nonzero_each())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "nets": [net_to_dict(net) for net in self.nets]}


class ProductHatFamily:
    """Exact partition of unity from products of 1-D hat functions.

    Nodes are ``n_per_axis`` equispaced points per axis on ``[lo, hi]``,
    shared across ``n_axes`` axes; boundary hats are clamped to 1 beyond
    the end nodes, so the family sums to exactly 1 everywhere.  Bumps are
    indexed lexicographically by their node multi-index.  For accounting,
    a bump counts one parameter per nonzero node coordinate plus one
    shared width parameter.
    """

    kind = "product_hat"

    def __init__(self, lo: float, hi: float, n_per_axis: int, n_axes: int):
        if not hi > lo:
            raise ParameterError(f"need hi > lo, got [{lo}, {hi}]")
        if n_per_axis < 1 or n_axes < 1:
            raise ParameterError("node and axis counts must be >= 1")
        self.lo = float(lo)
        self.hi = float(hi)
        self.n_per_axis = int(n_per_axis)
        self.n_axes = int(n_axes)
        self.input_dim = self.n_axes
        if n_per_axis == 1:
            self.axis_nodes = np.array([0.5 * (lo + hi)])
        else:
            self.axis_nodes = np.linspace(lo, hi, n_per_axis)

    @property
    def size(self) -> int:
        return self.n_per_axis**self.n_axes

    @property
    def nodes(self) -> np.ndarray:
        """All bump centers, shape (size, n_axes), lexicographic order."""
        grids = np.meshgrid(*([self.axis_nodes] * self.n_axes), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def _axis_weights(self, z: float) -> np.ndarray:
        nodes = self.axis_nodes
        m = nodes.shape[0]
        w = np.zeros(m)
        if m == 1:
            w[0] = 1.0
            return w
        if z <= nodes[0]:
            w[0] = 1.0
            return w
        if z >= nodes[-1]:
            w[-1] = 1.0
            return w
        i = int(np.searchsorted(nodes, z, side="right")) - 1
        i = min(i, m - 2)
        t = (z - nodes[i]) / (nodes[i + 1] - nodes[i])
        w[i] = 1.0 - t
        w[i + 1] = t
        return w

    def values(self, vec: np.ndarray) -> np.ndarray:
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        if vec.shape != (self.n_axes,):
            raise ParameterError(f"input must have {self.n_axes} coordinates, got {vec.shape}")
        out = np.ones(1)
        for axis in range(self.n_axes):
            out = np.multiply.outer(out, self._axis_weights(vec[axis])).ravel()
        return out

    def count_nonzero_each(self) -> list[int]:
        return [int(np.count_nonzero(node)) + 1 for node in self.nodes]

    def count_nonzero_total(self) -> int:
        return sum(self.count_nonzero_each())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lo": self.lo,
            "hi": self.hi,
            "n_per_axis": self.n_per_axis,
            "n_axes": self.n_axes,
        }


def family_from_dict(data: dict):
    kind = data.get("kind")
    if kind == "relu":
        return ReluNetFamily([net_from_dict(nd) for nd in data["nets"]])
    if kind == "product_hat":
        return ProductHatFamily(
            lo=float(data["lo"]),
            hi=float(data["hi"]),
            n_per_axis=int(data["n_per_axis"]),
            n_axes=int(data["n_axes"]),
        )
    raise ParameterError(f"unknown subnet family kind '{kind}'")


@dataclass
class SeparableNet:
    """The separable architecture with frozen or trainable coefficients.

    ``theta`` has shape (P, H, N) matching the three family sizes;
    ``w_sensors``/``u_sensors`` are the sensor locations defining the
    input encodings; optional ``clip_a`` clips the output to ``[-a, a]``
    and ``theta_bound`` is the coefficient box used by training.
    """

    theta: np.ndarray
    l_family: object
    b_family: object
    tau_family: object
    w_sensors: np.ndarray
    u_sensors: np.ndarray
    clip_a: float | None = None
    theta_bound: float | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.w_sensors = np.atleast_2d(np.asarray(self.w_sensors, dtype=float))
        self.u_sensors = np.atleast_2d(np.asarray(self.u_sensors, dtype=float))
        expected = (self.l_family.size, self.b_family.size, self.tau_family.size)
        if self.theta.shape != expected:
            raise ParameterError(f"theta shape {self.theta.shape} does not match families {expected}")
        if self.l_family.input_dim != self.w_sensors.shape[0]:
            raise ParameterError(
                f"stage-1 family input {self.l_family.input_dim} does not match "
                f"{self.w_sensors.shape[0]} sensors"
            )
        if self.b_family.input_dim != self.u_sensors.shape[0]:
            raise ParameterError(
                f"branch family input {self.b_family.input_dim} does not match "
                f"{self.u_sensors.shape[0]} sensors"
            )
        if self.clip_a is not None and self.clip_a < 0:
            raise ParameterError(f"clip level must be nonnegative, got {self.clip_a}")
        if self.theta_bound is not None and self.theta_bound <= 0:
            raise ParameterError(f"coefficient bound must be positive, got {self.theta_bound}")


def _maybe_clip(value: float, clip_a: float | None) -> float:
    if clip_a is None:
        return value
    return float(min(max(value, -clip_a), clip_a))


def mno_forward_vectors(net: SeparableNet, alpha_values: np.ndarray, u_values: np.ndarray,
                        x: np.ndarray) -> float:
    """Factorized evaluation from sensor value vectors."""
    lv = net.l_family.values(alpha_values)
    bv = net.b_family.values(u_values)
    tv = net.tau_family.values(np.atleast_1d(np.asarray(x, dtype=float)))
    value = float(np.einsum("pkl,p,k,l->", net.theta, lv, bv, tv))
    return _maybe_clip(value, net.clip_a)


def mno_forward(net: SeparableNet, alpha: Callable, u: Callable, x: np.ndarray) -> float:
    """Evaluate the separable architecture on input functions and a point."""
    alpha_values = project(alpha, net.w_sensors)
    u_values = project(u, net.u_sensors)
    return mno_forward_vectors(net, alpha_values, u_values, x)


@dataclass
class ConcatNet:
    """Concatenated baseline: shared branch networks over both sensor blocks."""

    theta: np.ndarray
    b_family: object
    tau_family: object
    w_sensors: np.ndarray
    u_sensors: np.ndarray
    beta_w: float
    beta_u: float
    clip_a: float | None = None
    theta_bound: float | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.w_sensors = np.atleast_2d(np.asarray(self.w_sensors, dtype=float))
        self.u_sensors = np.atleast_2d(np.asarray(self.u_sensors, dtype=float))
        expected = (self.b_family.size, self.tau_family.size)
        if self.theta.shape != expected:
            raise ParameterError(f"theta shape {self.theta.shape} does not match families {expected}")
        n_inputs = self.w_sensors.shape[0] + self.u_sensors.shape[0]
        if self.b_family.input_dim != n_inputs:
            raise ParameterError(
                f"branch family input {self.b_family.input_dim} does not match "
                f"{n_inputs} concatenated sensors"
            )
        if self.beta_w <= 0 or self.beta_u <= 0:
            raise ParameterError("sensor value bounds must be positive")

    @property
    def alpha_rescale(self) -> float:
        return max(self.beta_w, self.beta_u) / self.beta_w

    @property
    def u_rescale(self) -> float:
        return max(self.beta_w, self.beta_u) / self.beta_u


def concat_forward_vectors(net: ConcatNet, alpha_values: np.ndarray, u_values: np.ndarray,
                           x: np.ndarray) -> float:
    joint = np.concatenate([
        net.alpha_rescale * np.asarray(alpha_values, dtype=float),
        net.u_rescale * np.asarray(u_values, dtype=float),
    ])
    bv = net.b_family.values(joint)
    tv = net.tau_family.values(np.atleast_1d(np.asarray(x, dtype=float)))
    value = float(np.einsum("kl,k,l->", net.theta, bv, tv))
    return _maybe_clip(value, net.clip_a)


def concat_forward(net: ConcatNet, alpha: Callable, u: Callable, x: np.ndarray) -> float:
    alpha_values = project(alpha, net.w_sensors)
    u_values = project(u, net.u_sensors)
    return concat_forward_vectors(net, alpha_values, u_values, x)


@dataclass(frozen=True)
class ConstructionBudget:
    """Resolution knobs for the constructive builder.

    ``P``/``H`` are per-axis node counts of the coefficient grids over the
    discretized cubes; ``N`` the per-axis node count of the output grid
    (``x_mesh``, when set, raises ``N`` to reach that spacing).  ``delta_w``
    and ``delta_u`` are cover radii.  ``grid_cap`` bounds each grid's
    total size (per-axis counts are reduced to fit), ``n_c_cap`` bounds
    the sensor counts, ``theta_cap`` bounds the coefficient tensor.
    """

    P: int
    H: int
    N: int
    delta_w: float
    delta_u: float
    x_mesh: float | None = None
    variant: str = "parallel"
    grid_cap: int = 1_000_000
    n_c_cap: int = 12
    theta_cap: int = 2_000_000

    def __post_init__(self):
        if self.P < 1 or self.H < 1 or self.N < 1:
            raise ParameterError("grid counts must be >= 1")
        if self.delta_w <= 0 or self.delta_u <= 0:
            raise ParameterError("cover radii must be positive")
        if self.x_mesh is not None and self.x_mesh <= 0:
            raise ParameterError("x_mesh must be positive when given")
        if self.variant not in ("parallel", "nested"):
            raise ParameterError(f"variant must be 'parallel' or 'nested', got '{self.variant}'")
        if self.grid_cap < 1 or self.n_c_cap < 1 or self.theta_cap < 1:
            raise ParameterError("caps must be >= 1")


def _capped_axis_count(requested: int, n_axes: int, cap: int) -> int:
    """Largest per-axis count <= requested whose grid stays within cap."""
    m = max(1, int(requested))
    while m > 1 and m**n_axes > cap:
        m -= 1
    return m


def build_constructive(operator: MultiOperator, budget: ConstructionBudget) -> SeparableNet:
    """Two-stage constructive approximant of a multiple operator.

    Covers both function domains at the budgeted radii, grids the
    discretized cubes, lifts grid nodes through the cover partitions of
    unity to obtain anchor functions, and fills ``theta[p, k, l]`` with
    ``G[alpha_p][u_k](x_l)``.  Resource caps are checked before any
    allocation.  The ``nested`` variant refines the stage-2 per-axis grid
    counts by the stage-1 per-axis resolution ``P`` (a mesh scaled down
    by ``1/P``), modelling the aggregation strategy whose stage-2 error
    is amplified by the stage-1 sum instead of being absorbed by the
    partition of unity.
    """
    spec = operator.spec
    w_cover = build_cover(spec.w_spec, budget.delta_w)
    u_cover = build_cover(spec.u_spec, budget.delta_u)
    n_cw = w_cover.size
    n_cu = u_cover.size
    if n_cw > budget.n_c_cap or n_cu > budget.n_c_cap:
        raise ResourceBudgetError(
            f"cover sizes ({n_cw}, {n_cu}) exceed the sensor cap {budget.n_c_cap}; "
            "enlarge the radii or raise n_c_cap"
        )

    p_axis = _capped_axis_count(budget.P, n_cw, budget.grid_cap)
    n_stage1 = p_axis**n_cw

    h_request = budget.H
    n_request = budget.N
    if budget.x_mesh is not None:
        n_request = max(n_request, math.ceil(2.0 * spec.v_spec.gamma / budget.x_mesh) + 1)
    if budget.variant == "nested":
        h_request *= p_axis
        n_request *= p_axis
    h_axis = _capped_axis_count(h_request, n_cu, budget.grid_cap)
    x_axis = _capped_axis_count(n_request, spec.v_spec.d, budget.grid_cap)

    n_stage2 = h_axis**n_cu
    n_out = x_axis**spec.v_spec.d
    theta_entries = n_stage1 * n_stage2 * n_out
    if theta_entries > budget.theta_cap:
        raise ResourceBudgetError(
            f"coefficient tensor would hold {theta_entries} entries, above the cap "
            f"{budget.theta_cap}"
        )

    w_pou = build_pou(w_cover)
    u_pou = build_pou(u_cover)
    beta_w = spec.w_spec.bound
    beta_u = spec.u_spec.bound
    l_family = ProductHatFamily(-beta_w, beta_w, p_axis, n_cw)
    b_family = ProductHatFamily(-beta_u, beta_u, h_axis, n_cu)
    tau_family = ProductHatFamily(-spec.v_spec.gamma, spec.v_spec.gamma, x_axis, spec.v_spec.d)

    anchor_alphas = [lift(node, w_pou) for node in l_family.nodes]
    anchor_us = [lift(node, u_pou) for node in b_family.nodes]
    x_nodes = tau_family.nodes
    theta = operator.coefficient_tensor(anchor_alphas, anchor_us, x_nodes)
    theta = np.asarray(theta, dtype=float).reshape(n_stage1, n_stage2, n_out)

    return SeparableNet(
        theta=theta,
        l_family=l_family,
        b_family=b_family,
        tau_family=tau_family,
        w_sensors=w_cover.centers,
        u_sensors=u_cover.centers,
        clip_a=None,
        theta_bound=None,
    )


def pou_sum_audit(net: SeparableNet, alpha_samples: Sequence[Callable]) -> tuple[float, float]:
    """(max, min) over samples of the stage-1 coefficient sum."""
    sums = []
    for alpha in alpha_samples:
        values = net.l_family.values(project(alpha, net.w_sensors))
        sums.append(float(values.sum()))
    if not sums:
        raise ParameterError("need at least one sample to audit")
    return max(sums), min(sums)


def complexity_account(net) -> int:
    """Nonzero-parameter complexity of an architecture.

    Separable: ``2 * (nnz(theta) + sum_k K(b_k) + sum_l K(tau_l) + sum_p K(l_p))``.
    Concatenated: ``2 * (nnz(theta) + sum_l K(tau_l) + sum_k K(b_k))``.
    """
    if isinstance(net, SeparableNet):
        total = (
            int(np.count_nonzero(net.theta))
            + net.b_family.count_nonzero_total()
            + net.tau_family.count_nonzero_total()
            + net.l_family.count_nonzero_total()
        )
        return 2 * total
    if isinstance(net, ConcatNet):
        total = (
            int(np.count_nonzero(net.theta))
            + net.tau_family.count_nonzero_total()
            + net.b_family.count_nonzero_total()
        )
        return 2 * total
    raise ParameterError(f"unsupported architecture {type(net).__name__}")


def architecture_nonzero_count(net) -> int:
    """Plain nonzero parameter count (coefficients plus subnet parameters)."""
    if isinstance(net, SeparableNet):
        return (
            int(np.count_nonzero(net.theta))
            + net.l_family.count_nonzero_total()
            + net.b_family.count_nonzero_total()
            + net.tau_family.count_nonzero_total()
        )
    if isinstance(net, ConcatNet):
        return (
            int(np.count_nonzero(net.theta))
            + net.b_family.count_nonzero_total()
            + net.tau_family.count_nonzero_total()
        )
    raise ParameterError(f"unsupported architecture {type(net).__name__}")


def predicted_parameter_count(eps: float, dims: tuple[int, int, int], d_coeff: float = 1.0) -> float:
    """Dominant parameter-count envelope ``eps^(-d_coeff * eps^(-d_max))``.

    ``dims = (d_W, d_U, d_V)`` and ``d_max = max(d_W, d_U)``.  Evaluated in
    log space; raises for ``eps`` outside ``(0, 1)`` where the envelope is
    meaningless.
    """
    d_w, d_u, _ = dims
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"accuracy must lie in (0, 1), got {eps}")
    if d_coeff <= 0:
        raise ParameterError(f"envelope coefficient must be positive, got {d_coeff}")
    d_max = max(d_w, d_u)
    log_value = d_coeff * eps ** (-float(d_max)) * math.log(1.0 / eps)
    return math.exp(log_value)


def accuracy_envelope(n_params: float, dims: tuple[int, int, int]) -> float:
    """Inverted envelope ``(log N / log log N)^(-1/d_max)``.

    Requires ``log log N > 0``, i.e. ``N > e``.
    """
    d_w, d_u, _ = dims
    if n_params <= math.e:
        raise ParameterError(f"parameter count must exceed e, got {n_params}")
    d_max = max(d_w, d_u)
    ratio = math.log(n_params) / math.log(math.log(n_params))
    if ratio <= 0:
        raise ParameterError(f"degenerate envelope ratio for n_params={n_params}")
    return ratio ** (-1.0 / d_max)


def separable_to_dict(net: SeparableNet) -> dict:
    return {
        "theta": {"shape": list(net.theta.shape), "values": net.theta.ravel().tolist()},
        "l_family": net.l_family.to_dict(),
        "b_family": net.b_family.to_dict(),
        "tau_family": net.tau_family.to_dict(),
        "w_sensors": net.w_sensors.tolist(),
        "u_sensors": net.u_sensors.tolist(),
        "clip_a": net.clip_a,
        "theta_bound": net.theta_bound,
    }


def separable_from_dict(data: dict) -> SeparableNet:
    try:
        shape = tuple(int(s) for s in data["theta"]["shape"])
        theta = np.array(data["theta"]["values"], dtype=float).reshape(shape)
        return SeparableNet(
            theta=theta,
            l_family=family_from_dict(data["l_family"]),
            b_family=family_from_dict(data["b_family"]),
            tau_family=family_from_dict(data["tau_family"]),
            w_sensors=np.array(data["w_sensors"], dtype=float),
            u_sensors=np.array(data["u_sensors"], dtype=float),
            clip_a=data.get("clip_a"),
            theta_bound=data.get("theta_bound"),
        )
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed separable net dict: {exc}") from exc


def save_separable(net: SeparableNet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(separable_to_dict(net), fh)


def load_separable(path) -> SeparableNet:
    with open(path, "r", encoding="utf-8") as fh:
        return separable_from_dict(json.load(fh))


def with_fresh_theta(net: SeparableNet, value: float = 0.0,
                     theta_bound: float | None = None,
                     clip_a: float | None = None) -> SeparableNet:
    """Copy of the architecture with a constant coefficient tensor."""
    theta = np.full_like(net.theta, float(value))
    return replace(net, theta=theta, theta_bound=theta_bound, clip_a=clip_a)
