"""Hierarchical training sets, projected-gradient ERM, generalization estimates.

A training set samples ``n_alpha`` operator inputs, ``n_u`` argument
functions per input, ``n_x`` evaluation points per pair, and labels each
triple with the operator value plus centered Gaussian noise of standard
deviation ``sigma``.  Every sample draws from its own counter-derived
random stream, so regenerating any sub-block is order independent and
two runs with the same seed agree bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError, TrainingDivergenceError
from .operators import MultiOperator
from .relunet import ReluNet, forward, grad_params
from .separable import ReluNetFamily, SeparableNet, mno_forward_vectors
from .spaces import project


class UniformPointSampler:
    """Uniform draws from the box ``[-gamma, gamma]^d``."""

    def __init__(self, gamma: float, d: int):
        if gamma <= 0 or d < 1:
            raise ParameterError("sampler needs gamma > 0 and d >= 1")
        self.gamma = gamma
        self.d = d

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-self.gamma, self.gamma, size=(n, self.d))


def _stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for one sample, derived by counter splitting."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path)))


@dataclass
class TrainingSet:
    """Sensor-encoded hierarchical samples with noisy labels.

    ``alpha_values`` has shape (n_alpha, n_cw); ``u_values`` shape
    (n_alpha, n_u, n_cu); ``x_points`` shape (n_alpha, n_u, n_x, d_v);
    ``labels`` shape (n_alpha, n_u, n_x).
    """

    alpha_values: np.ndarray
    u_values: np.ndarray
    x_points: np.ndarray
    labels: np.ndarray
    sigma: float
    seed: int
    w_sensors: np.ndarray
    u_sensors: np.ndarray

    @property
    def n_alpha(self) -> int:
        return self.labels.shape[0]

    @property
    def n_u(self) -> int:
        return self.labels.shape[1]

    @property
    def n_x(self) -> int:
        return self.labels.shape[2]

    @property
    def n_samples(self) -> int:
        return int(np.prod(self.labels.shape))


def generate_training_set(
    operator: MultiOperator,
    alpha_sampler,
    u_sampler,
    x_sampler: UniformPointSampler,
    w_sensors: np.ndarray,
    u_sensors: np.ndarray,
    n_alpha: int,
    n_u: int,
    n_x: int,
    sigma: float,
    seed: int,
) -> TrainingSet:
    """Sample the three-tier training set with per-sample random streams."""
    if n_alpha < 1 or n_u < 1 or n_x < 1:
        raise ParameterError("tier sizes must be >= 1")
    if sigma < 0:
        raise ParameterError(f"noise level must be nonnegative, got {sigma}")
    w_sensors = np.atleast_2d(np.asarray(w_sensors, dtype=float))
    u_sensors = np.atleast_2d(np.asarray(u_sensors, dtype=float))

    alpha_values = np.empty((n_alpha, w_sensors.shape[0]))
    u_values = np.empty((n_alpha, n_u, u_sensors.shape[0]))
    x_points = np.empty((n_alpha, n_u, n_x, x_sampler.d))
    labels = np.empty((n_alpha, n_u, n_x))

    for l in range(n_alpha):
        alpha = alpha_sampler.sample(_stream(seed, 1, l))
        alpha_values[l] = project(alpha, w_sensors)
        for i in range(n_u):
            u = u_sampler.sample(_stream(seed, 2, l, i))
            u_values[l, i] = project(u, u_sensors)
            xs = x_sampler.sample(_stream(seed, 3, l, i), n_x)
            x_points[l, i] = xs
            clean = operator.eval_x_batch(alpha, u, xs)
            noise = _stream(seed, 4, l, i).normal(0.0, 1.0, size=n_x) if sigma > 0 else 0.0
            labels[l, i] = clean + sigma * noise

    return TrainingSet(
        alpha_values=alpha_values,
        u_values=u_values,
        x_points=x_points,
        labels=labels,
        sigma=float(sigma),
        seed=int(seed),
        w_sensors=w_sensors,
        u_sensors=u_sensors,
    )


@dataclass(frozen=True)
class TrainOptions:
    """Projected-gradient options; ``batch=None`` trains full batch."""

    steps: int = 200
    lr: float = 1e-2
    batch: int | None = None
    seed: int = 0
    train_subnets: bool = False
    divergence_threshold: float = 1e6

    def __post_init__(self):
        if self.steps < 0:
            raise ParameterError(f"step count must be nonnegative, got {self.steps}")
        if self.lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {self.lr}")
        if self.batch is not None and self.batch < 1:
            raise ParameterError(f"batch size must be >= 1, got {self.batch}")


@dataclass
class TrainResult:
    net: SeparableNet
    loss_trace: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]


def _check_compatible(net: SeparableNet, data: TrainingSet) -> None:
    if data.alpha_values.shape[1] != net.l_family.input_dim:
        raise ParameterError("training alpha encoding does not match the architecture sensors")
    if data.u_values.shape[2] != net.b_family.input_dim:
        raise ParameterError("training u encoding does not match the architecture sensors")
    if data.x_points.shape[3] != net.tau_family.input_dim:
        raise ParameterError("training x points do not match the output dimension")


def _feature_tensors(net: SeparableNet, data: TrainingSet):
    n_a, n_u, n_x = data.n_alpha, data.n_u, data.n_x
    lv = np.stack([net.l_family.values(data.alpha_values[l]) for l in range(n_a)])
    bv = np.stack(
        [
            np.stack([net.b_family.values(data.u_values[l, i]) for i in range(n_u)])
            for l in range(n_a)
        ]
    )
    tv = np.stack(
        [
            np.stack(
                [
                    np.stack([net.tau_family.values(data.x_points[l, i, j]) for j in range(n_x)])
                    for i in range(n_u)
                ]
            )
            for l in range(n_a)
        ]
    )
    return lv, bv, tv


def _predictions(theta: np.ndarray, lv, bv, tv) -> np.ndarray:
    return np.einsum("pkn,lp,lik,lijn->lij", theta, lv, bv, tv)


def _loss(raw_pred: np.ndarray, labels: np.ndarray, clip_a: float | None) -> float:
    pred = raw_pred if clip_a is None else np.clip(raw_pred, -clip_a, clip_a)
    return float(np.mean((pred - labels) ** 2))


def erm_train(net: SeparableNet, data: TrainingSet, options: TrainOptions = TrainOptions()) -> TrainResult:
    """Mini-batch projected gradient descent on the empirical squared loss.

    Coefficients start from ``net.theta`` and are projected into the box
    ``[-theta_bound, theta_bound]`` after every step when a bound is set.
    Subnet weights move only when ``options.train_subnets`` holds and the
    families are ReLU networks.  The returned trace holds the full-data
    loss before training and after each step.
    """
    _check_compatible(net, data)
    if options.train_subnets:
        return _erm_train_subnets(net, data, options)

    lv, bv, tv = _feature_tensors(net, data)
    labels = data.labels
    theta = net.theta.copy()
    m_total = labels.size
    batch = options.batch if options.batch is not None else m_total
    batch = min(batch, m_total)
    rng = _stream(options.seed, 9)

    raw = _predictions(theta, lv, bv, tv)
    trace = [_loss(raw, labels, net.clip_a)]
    for _ in range(options.steps):
        if batch < m_total:
            chosen = rng.choice(m_total, size=batch, replace=False)
            mask = np.zeros(m_total)
            mask[chosen] = 1.0
            mask = mask.reshape(labels.shape)
        else:
            mask = np.ones_like(labels)
        raw = _predictions(theta, lv, bv, tv)
        pred = raw if net.clip_a is None else np.clip(raw, -net.clip_a, net.clip_a)
        active = np.ones_like(raw) if net.clip_a is None else (np.abs(raw) <= net.clip_a).astype(float)
        residual = (pred - labels) * active * mask
        grad = np.einsum("lij,lp,lik,lijn->pkn", residual, lv, bv, tv) * (2.0 / batch)
        theta = theta - options.lr * grad
        if net.theta_bound is not None:
            theta = np.clip(theta, -net.theta_bound, net.theta_bound)
        loss = _loss(_predictions(theta, lv, bv, tv), labels, net.clip_a)
        if not np.isfinite(loss) or loss > options.divergence_threshold:
            raise TrainingDivergenceError(
                f"loss {loss} exceeded the divergence threshold", trace=trace + [loss]
            )
        trace.append(loss)
    return TrainResult(net=replace_theta(net, theta), loss_trace=trace)


def replace_theta(net: SeparableNet, theta: np.ndarray) -> SeparableNet:
    return replace(net, theta=theta)


def _erm_train_subnets(net: SeparableNet, data: TrainingSet, options: TrainOptions) -> TrainResult:
    """Gradient descent moving theta and ReLU subnet weights together."""
    for family in (net.l_family, net.b_family, net.tau_family):
        if not isinstance(family, ReluNetFamily):
            raise ParameterError("subnet training requires ReLU network families")

    l_nets = list(net.l_family.nets)
    b_nets = list(net.b_family.nets)
    t_nets = list(net.tau_family.nets)
    theta = net.theta.copy()
    labels = data.labels
    m_total = labels.size
    batch = min(options.batch or m_total, m_total)
    rng = _stream(options.seed, 9)
    flat = [
        (l, i, j)
        for l in range(data.n_alpha)
        for i in range(data.n_u)
        for j in range(data.n_x)
    ]

    def assemble() -> SeparableNet:
        return SeparableNet(
            theta=theta,
            l_family=ReluNetFamily(l_nets),
            b_family=ReluNetFamily(b_nets),
            tau_family=ReluNetFamily(t_nets),
            w_sensors=net.w_sensors,
            u_sensors=net.u_sensors,
            clip_a=net.clip_a,
            theta_bound=net.theta_bound,
        )

    def full_loss() -> float:
        current = assemble()
        total = 0.0
        for (l, i, j) in flat:
            pred = mno_forward_vectors(
                current, data.alpha_values[l], data.u_values[l, i], data.x_points[l, i, j]
            )
            total += (pred - labels[l, i, j]) ** 2
        return total / m_total

    trace = [full_loss()]
    for _ in range(options.steps):
        if batch < m_total:
            chosen_idx = rng.choice(m_total, size=batch, replace=False)
            chosen = [flat[c] for c in chosen_idx]
        else:
            chosen = flat
        grad_theta = np.zeros_like(theta)
        grads_l = [_zero_grads(netw) for netw in l_nets]
        grads_b = [_zero_grads(netw) for netw in b_nets]
        grads_t = [_zero_grads(netw) for netw in t_nets]
        for (l, i, j) in chosen:
            av, uv, xv = data.alpha_values[l], data.u_values[l, i], data.x_points[l, i, j]
            lvec = np.array([0.0] * len(l_nets))
            for p, nw in enumerate(l_nets):
                lvec[p] = forward_scalar(nw, av)
            bvec = np.array([forward_scalar(nw, uv) for nw in b_nets])
            tvec = np.array([forward_scalar(nw, xv) for nw in t_nets])
            raw = float(np.einsum("pkn,p,k,n->", theta, lvec, bvec, tvec))
            if net.clip_a is not None and abs(raw) > net.clip_a:
                continue
            residual = 2.0 * (raw - labels[l, i, j]) / batch
            grad_theta += residual * np.einsum("p,k,n->pkn", lvec, bvec, tvec)
            up_l = residual * np.einsum("pkn,k,n->p", theta, bvec, tvec)
            up_b = residual * np.einsum("pkn,p,n->k", theta, lvec, tvec)
            up_t = residual * np.einsum("pkn,p,k->n", theta, lvec, bvec)
            for p, nw in enumerate(l_nets):
                _accumulate(grads_l[p], grad_params(nw, av, np.array([up_l[p]])))
            for k, nw in enumerate(b_nets):
                _accumulate(grads_b[k], grad_params(nw, uv, np.array([up_b[k]])))
            for n, nw in enumerate(t_nets):
                _accumulate(grads_t[n], grad_params(nw, xv, np.array([up_t[n]])))
        theta = theta - options.lr * grad_theta
        if net.theta_bound is not None:
            theta = np.clip(theta, -net.theta_bound, net.theta_bound)
        l_nets = [_apply_grads(nw, g, options.lr) for nw, g in zip(l_nets, grads_l)]
        b_nets = [_apply_grads(nw, g, options.lr) for nw, g in zip(b_nets, grads_b)]
        t_nets = [_apply_grads(nw, g, options.lr) for nw, g in zip(t_nets, grads_t)]
        loss = full_loss()
        if not np.isfinite(loss) or loss > options.divergence_threshold:
            raise TrainingDivergenceError(
                f"loss {loss} exceeded the divergence threshold", trace=trace + [loss]
            )
        trace.append(loss)
    return TrainResult(net=assemble(), loss_trace=trace)


def forward_scalar(net: ReluNet, x: np.ndarray) -> float:
    return float(forward(net, x)[0])


def _zero_grads(net: ReluNet):
    return (
        [np.zeros_like(w) for w in net.weights],
        [np.zeros_like(b) for b in net.biases],
    )


def _accumulate(acc, grads) -> None:
    for a, g in zip(acc[0], grads.d_weights):
        a += g
    for a, g in zip(acc[1], grads.d_biases):
        a += g


def _apply_grads(net: ReluNet, acc, lr: float) -> ReluNet:
    weights = tuple(w - lr * g for w, g in zip(net.weights, acc[0]))
    biases = tuple(b - lr * g for b, g in zip(net.biases, acc[1]))
    return ReluNet(weights, biases)


def solve_theta_least_squares(net: SeparableNet, data: TrainingSet) -> tuple[np.ndarray, float]:
    """Exact least-squares coefficients for frozen subnets, with its loss.

    Valid as an ERM oracle when clipping is inactive on the data (for
    example realizable noise-free labels inside the clip box).  Returns
    the minimum-norm solution and the attained mean squared error.
    """
    _check_compatible(net, data)
    lv, bv, tv = _feature_tensors(net, data)
    design = np.einsum("lp,lik,lijn->lijpkn", lv, bv, tv)
    m = data.labels.size
    p, h, n = net.theta.shape
    design = design.reshape(m, p * h * n)
    rhs = data.labels.ravel()
    solution, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    residual = design @ solution - rhs
    return solution.reshape(p, h, n), float(np.mean(residual**2))


def suggest_learning_rate(net: SeparableNet, data: TrainingSet) -> float:
    """Step size ``1 / lambda_max`` of the quadratic loss in the coefficients.

    With frozen subnets the empirical loss is quadratic in ``theta`` with
    Hessian ``(2/m) D^T D`` for the feature design ``D``; gradient descent
    contracts monotonically for any step below ``2 / lambda_max``.
    """
    _check_compatible(net, data)
    lv, bv, tv = _feature_tensors(net, data)
    design = np.einsum("lp,lik,lijn->lijpkn", lv, bv, tv)
    m = data.labels.size
    design = design.reshape(m, -1)
    smax = float(np.linalg.svd(design, compute_uv=False)[0])
    if smax == 0.0:
        return 1.0
    return m / (2.0 * smax**2)


@dataclass(frozen=True)
class GenEstimate:
    """Monte Carlo estimate of the expected generalization error."""

    mean: float
    stderr: float
    n_groups: int


def estimate_generalization(
    net: SeparableNet,
    operator: MultiOperator,
    alpha_sampler,
    u_sampler,
    x_sampler: UniformPointSampler,
    n_test_alpha: int,
    n_test_u: int,
    n_x: int,
    seed: int,
) -> GenEstimate:
    """Average squared error over fresh (alpha, u) pairs, ``n_x`` points each.

    Groups are (alpha, u) pairs; the standard error is the group standard
    deviation over the square root of the group count, so doubling
    ``n_test_alpha`` shrinks it by about ``1/sqrt(2)``.
    """
    if n_test_alpha < 1 or n_test_u < 1 or n_x < 1:
        raise ParameterError("test tier sizes must be >= 1")
    group_values = []
    for l in range(n_test_alpha):
        alpha = alpha_sampler.sample(_stream(seed, 11, l))
        av = project(alpha, net.w_sensors)
        for i in range(n_test_u):
            u = u_sampler.sample(_stream(seed, 12, l, i))
            uv = project(u, net.u_sensors)
            xs = x_sampler.sample(_stream(seed, 13, l, i), n_x)
            truth = operator.eval_x_batch(alpha, u, xs)
            preds = np.array([mno_forward_vectors(net, av, uv, x) for x in xs])
            group_values.append(float(np.mean((preds - truth) ** 2)))
    values = np.array(group_values)
    n_groups = values.size
    stderr = float(values.std(ddof=1) / np.sqrt(n_groups)) if n_groups > 1 else 0.0
    return GenEstimate(mean=float(values.mean()), stderr=stderr, n_groups=n_groups)


def save_training_set(data: TrainingSet, csv_path, sidecar_path) -> None:
    """CSV rows (alpha_id, u_id, x coords ..., label) plus a JSON sidecar.

    The sidecar carries the seed, noise level, sensor locations and the
    sensor-encoded input functions, making the pair self-contained for
    retraining.
    """
    d_v = data.x_points.shape[3]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha_id", "u_id"] + [f"x{k}" for k in range(d_v)] + ["label"])
        for l in range(data.n_alpha):
            for i in range(data.n_u):
                for j in range(data.n_x):
                    row = [str(l), str(i)]
                    row += [repr(float(c)) for c in data.x_points[l, i, j]]
                    row.append(repr(float(data.labels[l, i, j])))
                    writer.writerow(row)
    sidecar = {
        "seed": data.seed,
        "sigma": data.sigma,
        "n_alpha": data.n_alpha,
        "n_u": data.n_u,
        "n_x": data.n_x,
        "w_sensors": data.w_sensors.tolist(),
        "u_sensors": data.u_sensors.tolist(),
        "alpha_values": data.alpha_values.tolist(),
        "u_values": data.u_values.tolist(),
    }
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh)


def load_training_set(csv_path, sidecar_path) -> TrainingSet:
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    n_alpha, n_u, n_x = sidecar["n_alpha"], sidecar["n_u"], sidecar["n_x"]
    alpha_values = np.array(sidecar["alpha_values"], dtype=float)
    u_values = np.array(sidecar["u_values"], dtype=float)
    w_sensors = np.array(sidecar["w_sensors"], dtype=float)
    u_sensors = np.array(sidecar["u_sensors"], dtype=float)
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d_v = len(header) - 3
        x_points = np.empty((n_alpha, n_u, n_x, d_v))
        labels = np.empty((n_alpha, n_u, n_x))
        counters: dict[tuple[int, int], int] = {}
        for row in reader:
            l, i = int(row[0]), int(row[1])
            j = counters.get((l, i), 0)
            counters[(l, i)] = j + 1
            x_points[l, i, j] = [float(c) for c in row[2 : 2 + d_v]]
            labels[l, i, j] = float(row[2 + d_v])
    return TrainingSet(
        alpha_values=alpha_values,
        u_values=u_values,
        x_points=x_points,
        labels=labels,
        sigma=float(sidecar["sigma"]),
        seed=int(sidecar["seed"]),
        w_sensors=w_sensors,
        u_sensors=u_sensors,
    )
