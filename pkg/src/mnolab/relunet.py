"""Feedforward ReLU networks with exact parameter accounting.

A network is a chain of affine layers with ReLU activations between them
(none after the last layer).  ``depth`` counts hidden (activated) layers:
a single affine map has depth 0, the scalar clip construction has depth 2.
The subgradient of ReLU at 0 is fixed to 0 throughout, so gradients are
deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass(frozen=True)
class ReluNet:
    """A feedforward ReLU network given by weight matrices and bias vectors.

    ``weights[i]`` has shape (n_{i+1}, n_i) and ``biases[i]`` shape
    (n_{i+1},).  At least one affine layer is required and consecutive
    layer shapes must chain.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) < 1:
            raise ParameterError("a network needs at least one affine layer")
        if len(self.weights) != len(self.biases):
            raise ParameterError("weights and biases must pair up layer by layer")
        weights = tuple(np.asarray(w, dtype=float) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=float) for b in self.biases)
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2:
                raise ParameterError(f"layer {i}: weight must be a matrix, got ndim={w.ndim}")
            if b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ParameterError(f"layer {i}: bias shape {b.shape} does not match weight {w.shape}")
            if i > 0 and w.shape[1] != weights[i - 1].shape[0]:
                raise ParameterError(
                    f"layer {i}: input width {w.shape[1]} does not chain with previous output "
                    f"{weights[i - 1].shape[0]}"
                )
        for arr in weights + biases:
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_affine_layers(self) -> int:
        return len(self.weights)

    @property
    def depth(self) -> int:
        """Number of hidden (ReLU-activated) layers."""
        return len(self.weights) - 1

    @property
    def max_width(self) -> int:
        """Largest hidden-layer width; 0 for a purely affine network."""
        if self.depth == 0:
            return 0
        return max(w.shape[0] for w in self.weights[:-1])


def forward(net: ReluNet, x: np.ndarray) -> np.ndarray:
    """Evaluate the network at a single input vector (or scalar)."""
    z = np.atleast_1d(np.asarray(x, dtype=float))
    if z.shape != (net.input_dim,):
        raise ParameterError(f"input shape {z.shape} does not match input_dim {net.input_dim}")
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = relu(w @ z + b)
    return net.weights[-1] @ z + net.biases[-1]


def forward_many(net: ReluNet, xs: np.ndarray) -> np.ndarray:
    """Evaluate the network at an (m, input_dim) batch of inputs."""
    z = np.asarray(xs, dtype=float)
    if z.ndim != 2 or z.shape[1] != net.input_dim:
        raise ParameterError(f"batch shape {z.shape} does not match input_dim {net.input_dim}")
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = relu(z @ w.T + b)
    return z @ net.weights[-1].T + net.biases[-1]


def count_nonzero(net: ReluNet) -> int:
    """Number of parameters exactly different from zero."""
    return int(sum(np.count_nonzero(w) for w in net.weights) + sum(np.count_nonzero(b) for b in net.biases))


def count_nonzero_thresholded(net: ReluNet, tol: float = 1e-12) -> int:
    """Number of parameters with magnitude strictly above ``tol``."""
    if tol < 0:
        raise ParameterError(f"threshold must be nonnegative, got {tol}")
    total = 0
    for arr in net.weights + net.biases:
        total += int(np.count_nonzero(np.abs(arr) > tol))
    return total


def max_magnitude(net: ReluNet) -> float:
    return float(max(np.max(np.abs(arr)) if arr.size else 0.0 for arr in net.weights + net.biases))


@dataclass(frozen=True)
class NetClassSpec:
    """Bounds describing a network class.

    ``d1``/``d2`` are input/output dimensions, ``L`` bounds the number of
    hidden layers, ``p`` the hidden width, ``K`` the nonzero parameter
    count, ``kappa`` the parameter magnitudes and ``R`` the sup-norm of
    the output over the probed region.
    """

    d1: int
    d2: int
    L: int
    p: int
    K: int
    kappa: float
    R: float

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise ParameterError("class dimensions must be >= 1")
        if self.L < 0 or self.p < 0 or self.K < 0:
            raise ParameterError("class size bounds must be nonnegative")
        if self.kappa < 0 or self.R < 0:
            raise ParameterError("class magnitude bounds must be nonnegative")


@dataclass(frozen=True)
class ClassViolation:
    """One violated class bound: which bound, the measured value, the limit."""

    bound: str
    measured: float
    allowed: float


def validate_class(net: ReluNet, spec: NetClassSpec, probes: np.ndarray) -> list[ClassViolation]:
    """Check a network against class bounds; empty list means it belongs.

    ``probes`` is an (m, d1) array of inputs over which the output bound
    ``R`` is checked.
    """
    probes = np.asarray(probes, dtype=float)
    if probes.ndim == 1:
        probes = probes[:, None]
    violations: list[ClassViolation] = []
    if net.input_dim != spec.d1:
        violations.append(ClassViolation("input_dim", float(net.input_dim), float(spec.d1)))
    if net.output_dim != spec.d2:
        violations.append(ClassViolation("output_dim", float(net.output_dim), float(spec.d2)))
    if net.depth > spec.L:
        violations.append(ClassViolation("depth", float(net.depth), float(spec.L)))
    if net.max_width > spec.p:
        violations.append(ClassViolation("width", float(net.max_width), float(spec.p)))
    nnz = count_nonzero(net)
    if nnz > spec.K:
        violations.append(ClassViolation("nonzero_count", float(nnz), float(spec.K)))
    mag = max_magnitude(net)
    if mag > spec.kappa:
        violations.append(ClassViolation("magnitude", mag, spec.kappa))
    if probes.shape[1] == net.input_dim and probes.shape[0] > 0:
        out = forward_many(net, probes)
        sup = float(np.max(np.abs(out)))
        if sup > spec.R:
            violations.append(ClassViolation("output_bound", sup, spec.R))
    return violations


def clip_apply(a: float, v):
    """Two-sided clip ``min(max(v, -a), a)`` for scalar or array ``v``."""
    if a < 0:
        raise ParameterError(f"clip level must be nonnegative, got {a}")
    return np.minimum(np.maximum(v, -a), a)


def clip_as_network(a: float) -> ReluNet:
    """The clip function realised exactly as a width-1, depth-2 network.

    Uses ``clip_a(v) = a - relu(2a - relu(v + a))``: six parameters, all
    weights of magnitude 1 and biases of magnitude at most ``2a``.  For
    ``a = 0`` the clip is identically zero and a zero network is returned.
    """
    if a < 0:
        raise ParameterError(f"clip level must be nonnegative, got {a}")
    if a == 0:
        return ReluNet((np.zeros((1, 1)),), (np.zeros(1),))
    return ReluNet(
        (np.array([[1.0]]), np.array([[-1.0]]), np.array([[-1.0]])),
        (np.array([a]), np.array([2.0 * a]), np.array([a])),
    )


@dataclass
class ParamGrads:
    """Per-layer gradients aligned with a network's weights and biases."""

    d_weights: list[np.ndarray] = field(default_factory=list)
    d_biases: list[np.ndarray] = field(default_factory=list)


def grad_params(net: ReluNet, x: np.ndarray, upstream: np.ndarray | None = None) -> ParamGrads:
    """Reverse-mode gradient of ``upstream . forward(net, x)`` in the parameters.

    ``upstream`` defaults to ones, giving the gradient of the sum of
    outputs.  The ReLU subgradient at exactly 0 is taken to be 0.
    """
    z = np.atleast_1d(np.asarray(x, dtype=float))
    if z.shape != (net.input_dim,):
        raise ParameterError(f"input shape {z.shape} does not match input_dim {net.input_dim}")
    if upstream is None:
        upstream = np.ones(net.output_dim)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (net.output_dim,):
        raise ParameterError(f"upstream shape {upstream.shape} does not match output_dim {net.output_dim}")

    activations = [z]
    pre_activations = []
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        pre = w @ activations[-1] + b
        pre_activations.append(pre)
        activations.append(relu(pre))

    n = len(net.weights)
    d_weights: list[np.ndarray] = [np.empty(0)] * n
    d_biases: list[np.ndarray] = [np.empty(0)] * n
    delta = upstream
    d_weights[-1] = np.outer(delta, activations[-1])
    d_biases[-1] = delta.copy()
    for i in range(n - 2, -1, -1):
        delta = net.weights[i + 1].T @ delta
        delta = delta * (pre_activations[i] > 0.0)
        d_weights[i] = np.outer(delta, activations[i])
        d_biases[i] = delta.copy()
    return ParamGrads(d_weights=d_weights, d_biases=d_biases)


def net_to_dict(net: ReluNet) -> dict:
    """JSON-ready dict: ``{dims, layers: [{W: rows, b: vector}, ...]}``."""
    return {
        "dims": [net.input_dim, net.output_dim],
        "layers": [
            {"W": w.tolist(), "b": b.tolist()} for w, b in zip(net.weights, net.biases)
        ],
    }


def net_from_dict(data: dict) -> ReluNet:
    try:
        layers = data["layers"]
        weights = tuple(np.array(layer["W"], dtype=float) for layer in layers)
        biases = tuple(np.array(layer["b"], dtype=float) for layer in layers)
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed network dict: {exc}") from exc
    net = ReluNet(weights, biases)
    dims = data.get("dims")
    if dims is not None and list(dims) != [net.input_dim, net.output_dim]:
        raise ParameterError(f"declared dims {dims} do not match layers")
    return net


def net_to_json(net: ReluNet) -> str:
    """Serialize with shortest round-trip float strings (bit-exact reload)."""
    return json.dumps(net_to_dict(net))


def net_from_json(text: str) -> ReluNet:
    return net_from_dict(json.loads(text))


def save_net(net: ReluNet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(net_to_json(net))


def load_net(path) -> ReluNet:
    with open(path, "r", encoding="utf-8") as fh:
        return net_from_json(fh.read())


def constant_net(input_dim: int, value: float) -> ReluNet:
    """A purely affine network ignoring its input and returning ``value``."""
    return ReluNet((np.zeros((1, input_dim)),), (np.array([float(value)]),))
