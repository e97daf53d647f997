"""Benchmark multiple-operator targets and assumption verification.

A multiple operator maps an input-deciding function ``alpha`` on
``Omega_W`` to an operator taking ``u`` on ``Omega_U`` to a function of
``x`` in ``Omega_V``.  The working regularity assumptions are Lipschitz
continuity in ``u`` with respect to ``L^{r_cal}(Omega_U)`` (constant
``L_cal``) and in ``alpha`` with respect to ``L^{r_G}(Omega_W)``
(constant ``L_G``), plus a uniform output bound ``beta_V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ParameterError
from .quadrature import box_integral, lebesgue_norm
from .sinecube import (
    CubeElement,
    CubeSpec,
    biorthogonal_coeff,
    c_r,
    enumerate_multiindices,
    rescale_to_domain,
)
from .spaces import LipschitzClassSpec


@dataclass(frozen=True)
class MultiOperatorSpec:
    """Domains, regularity constants and output bound of a multiple operator."""

    w_spec: LipschitzClassSpec
    u_spec: LipschitzClassSpec
    v_spec: LipschitzClassSpec
    lip_alpha: float
    r_alpha: float
    lip_u: float
    r_u: float
    beta_v: float

    def __post_init__(self):
        if self.lip_alpha < 0 or self.lip_u < 0 or self.beta_v < 0:
            raise ParameterError("operator constants must be nonnegative")
        if self.r_alpha < 1 or self.r_u < 1:
            raise ParameterError("Lebesgue exponents must satisfy r >= 1")


class MultiOperator:
    """Base class: subclasses implement ``eval(alpha, u, x) -> float``."""

    def __init__(self, spec: MultiOperatorSpec):
        self.spec = spec

    def eval(self, alpha: Callable, u: Callable, x: np.ndarray) -> float:
        raise NotImplementedError

    def eval_x_batch(self, alpha: Callable, u: Callable, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.array([self.eval(alpha, u, x) for x in xs])

    def coefficient_tensor(
        self, alphas: Sequence[Callable], us: Sequence[Callable], xs: np.ndarray
    ) -> np.ndarray:
        """Tensor ``G[alpha_p][u_k](x_l)`` of shape (P, H, N); subclasses
        override when the evaluation factorizes."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        out = np.empty((len(alphas), len(us), xs.shape[0]))
        for p, alpha in enumerate(alphas):
            for k, u in enumerate(us):
                out[p, k, :] = self.eval_x_batch(alpha, u, xs)
        return out


class KernelOperator(MultiOperator):
    """``G[alpha][u](x) = scale * (k_W-weighted integral of alpha) *
    (k_U-weighted integral of u) * cos(x_1)``.

    The weights ``k(y) = prod_i cos(pi (y_i - gamma) / (4 gamma))`` stay
    in ``[0, 1]`` on the box, so the declared constants below are valid,
    and they have both even and odd parts about the box center, so the
    operator collapses on neither zero-mean nor odd-symmetric inputs.
    Integrals are fixed-rule Simpson
    over the respective boxes, making the operator deterministic.
    Declared constants: ``lip_alpha = scale * beta_U * |Omega_U|`` with
    respect to ``L^1``, ``lip_u = scale * beta_W * |Omega_W|`` with
    respect to ``L^1``, and ``beta_v`` their product over ``scale``.
    """

    def __init__(
        self,
        scale: float,
        w_spec: LipschitzClassSpec,
        u_spec: LipschitzClassSpec,
        v_spec: LipschitzClassSpec,
        quad_n: int = 200,
    ):
        vol_w = (2.0 * w_spec.gamma) ** w_spec.d
        vol_u = (2.0 * u_spec.gamma) ** u_spec.d
        spec = MultiOperatorSpec(
            w_spec=w_spec,
            u_spec=u_spec,
            v_spec=v_spec,
            lip_alpha=abs(scale) * u_spec.bound * vol_u,
            r_alpha=1.0,
            lip_u=abs(scale) * w_spec.bound * vol_w,
            r_u=1.0,
            beta_v=abs(scale) * w_spec.bound * vol_w * u_spec.bound * vol_u,
        )
        super().__init__(spec)
        self.scale = float(scale)
        self.quad_n = int(quad_n)

    @staticmethod
    def _weighted(f: Callable, gamma: float) -> Callable:
        def weighted(points):
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            weight = np.prod(np.cos(np.pi * (pts - gamma) / (4.0 * gamma)), axis=1)
            return weight * np.asarray(f(pts), dtype=float)

        return weighted

    def _integral_w(self, alpha: Callable) -> float:
        w_spec = self.spec.w_spec
        return box_integral(
            self._weighted(alpha, w_spec.gamma), w_spec.gamma, w_spec.d, self.quad_n
        )

    def _integral_u(self, u: Callable) -> float:
        u_spec = self.spec.u_spec
        return box_integral(
            self._weighted(u, u_spec.gamma), u_spec.gamma, u_spec.d, self.quad_n
        )

    def eval(self, alpha: Callable, u: Callable, x: np.ndarray) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.scale * self._integral_w(alpha) * self._integral_u(u) * math.cos(x[0])

    def eval_x_batch(self, alpha, u, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return self.scale * self._integral_w(alpha) * self._integral_u(u) * np.cos(xs[:, 0])

    def coefficient_tensor(self, alphas, us, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ia = np.array([self._integral_w(a) for a in alphas])
        iu = np.array([self._integral_u(u) for u in us])
        cx = np.cos(xs[:, 0])
        return self.scale * ia[:, None, None] * iu[None, :, None] * cx[None, None, :]


class RankOneOperator(MultiOperator):
    """``G[alpha][u](x) = F(alpha) * phi(x)`` with ``phi(x0) = 1``.

    Evaluating the approximant at ``x0`` recovers the functional ``F``
    exactly, which is the lifting used by functional lower bounds.
    """

    def __init__(
        self,
        functional: Callable,
        phi: Callable,
        x0: np.ndarray,
        w_spec: LipschitzClassSpec,
        u_spec: LipschitzClassSpec,
        v_spec: LipschitzClassSpec,
        lip_alpha: float = 1.0,
        r_alpha: float = 1.0,
        beta_v: float = 1.0,
    ):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        phi_at_x0 = float(np.atleast_1d(phi(x0[None, :]))[0])
        if abs(phi_at_x0 - 1.0) > 1e-12:
            raise ParameterError(f"phi(x0) must equal 1, got {phi_at_x0}")
        spec = MultiOperatorSpec(
            w_spec=w_spec,
            u_spec=u_spec,
            v_spec=v_spec,
            lip_alpha=lip_alpha,
            r_alpha=r_alpha,
            lip_u=0.0,
            r_u=1.0,
            beta_v=beta_v,
        )
        super().__init__(spec)
        self.functional = functional
        self.phi = phi
        self.x0 = x0

    def eval(self, alpha, u, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.functional(alpha)) * float(np.atleast_1d(self.phi(x[None, :]))[0])

    def eval_x_batch(self, alpha, u, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return float(self.functional(alpha)) * np.asarray(self.phi(xs), dtype=float)

    def coefficient_tensor(self, alphas, us, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        fa = np.array([float(self.functional(a)) for a in alphas])
        px = np.asarray(self.phi(xs), dtype=float)
        return fa[:, None, None] * np.ones(len(us))[None, :, None] * px[None, None, :]


class AffinePointwiseOperator(MultiOperator):
    """``G[alpha][u](x) = alpha(pi_W x) + u(pi_U x)``.

    ``pi_W``/``pi_U`` keep the leading coordinates (padding with zeros when
    the output dimension is larger) and clip them into the respective box.
    Point evaluation is 1-Lipschitz in the sup norm; the declared
    ``L^r``-based constants are nominal and assumption verification
    reports the measured ratios.
    """

    def __init__(
        self,
        w_spec: LipschitzClassSpec,
        u_spec: LipschitzClassSpec,
        v_spec: LipschitzClassSpec,
        lip_alpha: float = 1.0,
        r_alpha: float = 1.0,
        lip_u: float = 1.0,
        r_u: float = 1.0,
    ):
        spec = MultiOperatorSpec(
            w_spec=w_spec,
            u_spec=u_spec,
            v_spec=v_spec,
            lip_alpha=lip_alpha,
            r_alpha=r_alpha,
            lip_u=lip_u,
            r_u=r_u,
            beta_v=w_spec.bound + u_spec.bound,
        )
        super().__init__(spec)

    @staticmethod
    def _project(x: np.ndarray, target: LipschitzClassSpec) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(target.d)
        take = min(target.d, x.shape[0])
        out[:take] = x[:take]
        return np.clip(out, -target.gamma, target.gamma)

    def eval(self, alpha, u, x):
        pw = self._project(x, self.spec.w_spec)
        pu = self._project(x, self.spec.u_spec)
        return float(np.atleast_1d(alpha(pw[None, :]))[0]) + float(np.atleast_1d(u(pu[None, :]))[0])


@dataclass
class AssumptionReport:
    """Measured Lipschitz ratios against the declared constants.

    Ratios are ``|G[alpha_1][u](x) - G[alpha_2][u](x)| / (lip_alpha *
    |alpha_1 - alpha_2|_{L^{r_alpha}})`` and the analogue in ``u``; a ratio
    above ``1 + tol`` is recorded as a violation.
    """

    max_ratio_alpha: float
    max_ratio_u: float
    max_abs_output: float
    n_pairs: int
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class CubeFunctionSampler:
    """Draws class-feasible functions as rescaled calibrated cube elements."""

    def __init__(self, target: LipschitzClassSpec, amplitude: float, eta: float = 2.5,
                 J: int = 6, r: float = 1.0):
        self.target = target
        self.cube = CubeSpec(d=target.d, eta=eta, amplitude=amplitude, J=J, r=r)
        self.enumeration = enumerate_multiindices(target.d, J)
        self._c_r = c_r(target.d, r)

    def sample(self, rng: np.random.Generator) -> Callable:
        y = rng.uniform(0.0, 1.0, size=self.cube.J)
        element = CubeElement(self.cube, y, self.enumeration, self._c_r)
        return rescale_to_domain(element, self.target.gamma)


def verify_assumptions(
    operator: MultiOperator,
    n_pairs: int = 200,
    rng_seed: int = 0,
    alpha_sampler: CubeFunctionSampler | None = None,
    u_sampler: CubeFunctionSampler | None = None,
    norm_quad_n: int = 200,
    tol: float = 1e-6,
) -> AssumptionReport:
    """Monte Carlo check of the declared Lipschitz constants and output bound.

    Samples pairs of class functions, computes difference quotients in the
    declared ``L^r`` norms by quadrature, and reports the worst ratios.  A
    zero-distance pair contributes ratio 0 unless the outputs differ by
    more than ``tol``.
    """
    spec = operator.spec
    rng = np.random.default_rng(rng_seed)
    if alpha_sampler is None:
        alpha_sampler = CubeFunctionSampler(spec.w_spec, amplitude=spec.w_spec.bound)
    if u_sampler is None:
        u_sampler = CubeFunctionSampler(spec.u_spec, amplitude=spec.u_spec.bound)

    max_ra = 0.0
    max_ru = 0.0
    max_out = 0.0
    violations: list[str] = []
    for _ in range(n_pairs):
        a1 = alpha_sampler.sample(rng)
        a2 = alpha_sampler.sample(rng)
        u1 = u_sampler.sample(rng)
        u2 = u_sampler.sample(rng)
        x = rng.uniform(-spec.v_spec.gamma, spec.v_spec.gamma, size=spec.v_spec.d)

        num_a = abs(operator.eval(a1, u1, x) - operator.eval(a2, u1, x))
        dist_a = lebesgue_norm(
            lambda pts: np.asarray(a1(pts)) - np.asarray(a2(pts)),
            spec.w_spec.gamma, spec.w_spec.d, spec.r_alpha, norm_quad_n,
        )
        denom_a = spec.lip_alpha * dist_a
        if denom_a > 0:
            max_ra = max(max_ra, num_a / denom_a)
        elif num_a > tol:
            violations.append(f"alpha pair at distance 0 with output gap {num_a}")

        num_u = abs(operator.eval(a1, u1, x) - operator.eval(a1, u2, x))
        dist_u = lebesgue_norm(
            lambda pts: np.asarray(u1(pts)) - np.asarray(u2(pts)),
            spec.u_spec.gamma, spec.u_spec.d, spec.r_u, norm_quad_n,
        )
        denom_u = spec.lip_u * dist_u
        if denom_u > 0:
            max_ru = max(max_ru, num_u / denom_u)
        elif num_u > tol:
            violations.append(f"u pair at distance 0 with output gap {num_u}")

        max_out = max(max_out, abs(operator.eval(a1, u1, x)))

    if max_ra > 1.0 + tol:
        violations.append(f"alpha ratio {max_ra} exceeds declared constant")
    if max_ru > 1.0 + tol:
        violations.append(f"u ratio {max_ru} exceeds declared constant")
    if max_out > spec.beta_v * (1.0 + tol):
        violations.append(f"output bound {max_out} exceeds beta_v={spec.beta_v}")
    return AssumptionReport(
        max_ratio_alpha=max_ra,
        max_ratio_u=max_ru,
        max_abs_output=max_out,
        n_pairs=n_pairs,
        violations=violations,
    )


def make_point_eval_functional(point: np.ndarray) -> Callable:
    point = np.atleast_1d(np.asarray(point, dtype=float))

    def functional(alpha: Callable) -> float:
        return float(np.atleast_1d(alpha(point[None, :]))[0])

    return functional


def make_mean_functional(gamma: float, d: int, quad_n: int = 200) -> Callable:
    volume = (2.0 * gamma) ** d

    def functional(alpha: Callable) -> float:
        return box_integral(alpha, gamma, d, quad_n) / volume

    return functional


def make_lattice_functional(
    w_spec: LipschitzClassSpec,
    amplitude: float,
    eta: float = 2.5,
    J: int = 4,
    r: float = 1.0,
    levels: int = 8,
    quadrature_n: int = 64,
) -> Callable:
    """A rugged but bounded functional built from recovered cube coordinates.

    Recovers the leading cube coordinates of ``alpha`` by biorthogonal
    quadrature, quantizes each onto a lattice of ``levels`` cells, and
    combines triangular bumps with alternating signs.  It stands in for
    hard-to-approximate functionals in lower-bound experiments; arbitrary
    user functionals can be passed to ``RankOneOperator`` directly.
    """
    enumeration = enumerate_multiindices(w_spec.d, J)
    weights = np.array([(-1.0) ** j / (j + 1.0) for j in range(J)])
    jpow = np.arange(1, J + 1, dtype=float) ** (-eta)

    def functional(alpha: Callable) -> float:
        pulled = RescaledPullback(alpha, w_spec.gamma)
        total = 0.0
        for j in range(J):
            coeff = biorthogonal_coeff(pulled, enumeration.indices[j], r, quadrature_n)
            y = coeff / (amplitude * jpow[j]) if amplitude > 0 else 0.0
            y = min(max(y, 0.0), 1.0)
            phase = y * levels
            total += weights[j] * (1.0 - 2.0 * abs(phase - math.floor(phase) - 0.5))
        return total

    return functional


class RescaledPullback:
    """View a function on ``[-gamma, gamma]^d`` as one on ``[0, 2*pi]^d``."""

    def __init__(self, f: Callable, gamma: float):
        self.f = f
        self.gamma = gamma
        self.scale = gamma / math.pi

    def __call__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        return self.f(x * self.scale - self.gamma)


def build_operator(name: str, params: dict, w_spec: LipschitzClassSpec,
                   u_spec: LipschitzClassSpec, v_spec: LipschitzClassSpec) -> MultiOperator:
    """Registry of benchmark operators addressed by name.

    Names: ``kernel`` (params: scale, quad_n), ``rank_one`` (params:
    functional {constant|point_eval|mean|lattice}, ...), ``affine``.
    """
    if name == "kernel":
        return KernelOperator(
            scale=float(params.get("scale", 0.25)),
            w_spec=w_spec,
            u_spec=u_spec,
            v_spec=v_spec,
            quad_n=int(params.get("quad_n", 200)),
        )
    if name == "rank_one":
        fspec = params.get("functional", {"type": "constant", "value": 1.0})
        ftype = fspec.get("type", "constant")
        if ftype == "constant":
            value = float(fspec.get("value", 1.0))
            functional = lambda alpha: value  # noqa: E731
            beta_v = abs(value)
            lip_alpha = 0.0
        elif ftype == "point_eval":
            point = np.asarray(fspec.get("point", [0.0] * w_spec.d), dtype=float)
            functional = make_point_eval_functional(point)
            beta_v = w_spec.bound
            lip_alpha = float(fspec.get("lip_alpha", 1.0))
        elif ftype == "mean":
            functional = make_mean_functional(w_spec.gamma, w_spec.d)
            beta_v = w_spec.bound
            lip_alpha = 1.0 / (2.0 * w_spec.gamma) ** w_spec.d
        elif ftype == "lattice":
            functional = make_lattice_functional(
                w_spec,
                amplitude=float(fspec.get("amplitude", w_spec.bound)),
                eta=float(fspec.get("eta", 2.5)),
                J=int(fspec.get("J", 4)),
                r=float(fspec.get("r", 1.0)),
                levels=int(fspec.get("levels", 8)),
            )
            beta_v = float(fspec.get("beta_v", 2.0))
            lip_alpha = float(fspec.get("lip_alpha", 1.0))
        else:
            raise ConfigError(f"unknown functional type '{ftype}'")
        phi_kind = params.get("phi", "cos")
        if phi_kind == "one":
            phi = lambda xs: np.ones(np.atleast_2d(xs).shape[0])  # noqa: E731
        elif phi_kind == "cos":
            phi = lambda xs: np.cos(np.atleast_2d(xs)[:, 0])  # noqa: E731
        else:
            raise ConfigError(f"unknown phi kind '{phi_kind}'")
        x0 = np.asarray(params.get("x0", [0.0] * v_spec.d), dtype=float)
        return RankOneOperator(
            functional, phi, x0, w_spec, u_spec, v_spec,
            lip_alpha=lip_alpha, r_alpha=float(params.get("r_alpha", 1.0)), beta_v=beta_v,
        )
    if name == "affine":
        return AffinePointwiseOperator(w_spec, u_spec, v_spec)
    raise ConfigError(f"unknown operator '{name}'")


OPERATOR_NAMES = ("kernel", "rank_one", "affine")
