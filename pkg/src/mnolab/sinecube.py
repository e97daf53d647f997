"""An infinite-dimensional cube of sine mixtures inside a Lipschitz class.

The building blocks are ``e_kappa(x) = sin(kappa . x) / c_r`` on
``[0, 2*pi]^d`` for positive integer multi-indices ``kappa``, where

    ``c_r = ((2*pi)^(d-1) * integral_0^{2*pi} |sin t|^r dt)^(1/r)``

normalizes every ``e_kappa`` in ``L^r`` independently of ``kappa``.  Cube
elements are ``u_y = A * sum_j j^(-eta) y_j e_{kappa(j)}`` with
``y in [0, 1]^J``; the decay ``eta`` keeps the family inside a Lipschitz
ball once the amplitude ``A`` is calibrated.  Coefficients are recovered
by the biorthogonal functionals
``u -> (2 c_r / (2*pi)^d) * integral u(x) sin(kappa . x) dx``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .errors import CalibrationError, ParameterError
from .quadrature import TWO_PI, sin_power_period_integral, torus_grid, torus_integral
from .spaces import LipschitzClassSpec, membership_check, uniform_grid


@lru_cache(maxsize=64)
def _sin_power_integral_cached(r: float, quadrature_n: int) -> float:
    return sin_power_period_integral(r, quadrature_n)


def c_r(d: int, r: float, quadrature_n: int = 10_000) -> float:
    """The ``L^r([0, 2*pi]^d)`` norm of ``sin(kappa . x)``, any ``kappa``.

    Equals ``((2*pi)^(d-1) * integral_0^{2*pi} |sin t|^r dt)^(1/r)``; the
    1-D integral is evaluated by composite Simpson with ``quadrature_n``
    subintervals (relative error well below 1e-8 at the default).
    """
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if r < 1:
        raise ParameterError(f"Lebesgue exponent must satisfy r >= 1, got {r}")
    integral = _sin_power_integral_cached(float(r), int(quadrature_n))
    return float((TWO_PI ** (d - 1) * integral) ** (1.0 / r))


def lr_norm_sin(kappa, r: float, n_per_axis: int = 512) -> float:
    """``L^r`` norm of ``sin(kappa . x)`` on ``[0, 2*pi]^d`` by direct quadrature.

    Uses the uniform periodic rule per axis; by the lattice structure of
    the integrand the quadrature defect is identical across ``kappa`` with
    entries coprime to the grid, which is what the invariance check
    exploits.
    """
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim != 1 or kappa.size < 1:
        raise ParameterError(f"kappa must be a nonempty index vector, got shape {kappa.shape}")
    if r < 1:
        raise ParameterError(f"Lebesgue exponent must satisfy r >= 1, got {r}")
    d = kappa.size
    grid = torus_grid(d, n_per_axis)
    values = np.abs(np.sin(grid @ kappa)) ** r
    return float((values.mean() * TWO_PI**d) ** (1.0 / r))


@dataclass(frozen=True)
class MultiIndexEnumeration:
    """The first ``J`` positive multi-indices ordered by sup-norm, then lex.

    With this order the 1-based position ``j`` of an index with sup-norm
    ``K`` satisfies ``(K - 1)^d <= j <= K^d``.
    """

    d: int
    indices: np.ndarray

    @property
    def size(self) -> int:
        return self.indices.shape[0]


def enumerate_multiindices(d: int, J: int) -> MultiIndexEnumeration:
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if J < 1:
        raise ParameterError(f"need at least one index, got J={J}")
    k_max = math.ceil(J ** (1.0 / d)) + 1
    found: list[tuple[int, ...]] = []
    for shell in range(1, k_max + 1):
        members = [
            idx
            for idx in itertools.product(range(1, shell + 1), repeat=d)
            if max(idx) == shell
        ]
        members.sort()
        found.extend(members)
        if len(found) >= J:
            break
    indices = np.array(found[:J], dtype=int)
    indices.setflags(write=False)
    return MultiIndexEnumeration(d=d, indices=indices)


@dataclass(frozen=True)
class CubeSpec:
    """Coefficient cube ``u_y = A * sum_{j<=J} j^(-eta) y_j e_{kappa(j)}``."""

    d: int
    eta: float
    amplitude: float
    J: int
    r: float

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.d}")
        if self.eta <= 1.0:
            raise ParameterError(f"decay must satisfy eta > 1, got {self.eta}")
        if self.amplitude < 0:
            raise ParameterError(f"amplitude must be nonnegative, got {self.amplitude}")
        if self.J < 1:
            raise ParameterError(f"need at least one term, got J={self.J}")
        if self.r < 1:
            raise ParameterError(f"Lebesgue exponent must satisfy r >= 1, got {self.r}")


class CubeElement:
    """Evaluator of a cube element on ``[0, 2*pi]^d``.

    ``tail_sup_bound`` bounds the sup-norm of the discarded tail
    ``A * c_r^-1 * sum_{j > J} j^(-eta)`` via the Hurwitz zeta function.
    """

    def __init__(self, spec: CubeSpec, y: np.ndarray, enumeration: MultiIndexEnumeration,
                 c_r_value: float):
        y = np.asarray(y, dtype=float)
        if y.shape != (spec.J,):
            raise ParameterError(f"coefficient vector must have shape ({spec.J},), got {y.shape}")
        if np.any(y < -1e-12) or np.any(y > 1.0 + 1e-12):
            raise ParameterError("cube coefficients must lie in [0, 1]")
        if enumeration.d != spec.d or enumeration.size < spec.J:
            raise ParameterError("enumeration does not match the cube spec")
        self.spec = spec
        self.y = y
        self.enumeration = enumeration
        self.c_r_value = float(c_r_value)
        j = np.arange(1, spec.J + 1, dtype=float)
        self._coeffs = spec.amplitude * j ** (-spec.eta) * y / self.c_r_value
        self._kappas = enumeration.indices[: spec.J].astype(float)

    @property
    def tail_sup_bound(self) -> float:
        tail = float(_hurwitz_zeta(self.spec.eta, self.spec.J + 1))
        return self.spec.amplitude * tail / self.c_r_value

    def __call__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.spec.d:
            raise ParameterError(f"points must have {self.spec.d} coordinates, got {pts.shape}")
        values = np.sin(pts @ self._kappas.T) @ self._coeffs
        return float(values[0]) if single else values


def cube_element(
    spec: CubeSpec,
    y: np.ndarray,
    enumeration: MultiIndexEnumeration | None = None,
    quadrature_n: int = 10_000,
) -> CubeElement:
    """Build the evaluator of ``u_y`` on ``[0, 2*pi]^d``."""
    if enumeration is None:
        enumeration = enumerate_multiindices(spec.d, spec.J)
    return CubeElement(spec, y, enumeration, c_r(spec.d, spec.r, quadrature_n))


class RescaledElement:
    """A cube element pulled back to ``[-gamma, gamma]^d``.

    The affine change of variables maps ``x`` to ``(x + gamma) * pi / gamma``
    and multiplies Lipschitz constants by ``pi / gamma``.
    """

    def __init__(self, element: Callable, gamma: float):
        if gamma <= 0:
            raise ParameterError(f"domain half-width must be positive, got {gamma}")
        self.element = element
        self.gamma = gamma
        self.scale = math.pi / gamma

    def __call__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        return self.element((x + self.gamma) * self.scale)


def rescale_to_domain(element: Callable, gamma: float) -> RescaledElement:
    return RescaledElement(element, gamma)


def biorthogonal_coeff(u: Callable, kappa, r: float, quadrature_n: int = 256) -> float:
    """Coefficient functional ``(2 c_r / (2*pi)^d) * integral u(x) sin(kappa . x) dx``.

    Applied to ``e_{kappa'}`` it returns the Kronecker delta; applied to a
    cube element it recovers ``A * j^(-eta) * y_j`` for the position ``j``
    of ``kappa`` in the enumeration.  ``quadrature_n`` is the per-axis node
    count of the periodic rule on ``[0, 2*pi]^d``.
    """
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim != 1 or kappa.size < 1:
        raise ParameterError(f"kappa must be a nonempty index vector, got shape {kappa.shape}")
    d = kappa.size
    factor = 2.0 * c_r(d, r) / TWO_PI**d

    def integrand(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        uvals = u(pts)
        uvals = np.asarray(uvals, dtype=float).reshape(pts.shape[0])
        return uvals * np.sin(pts @ kappa)

    return float(factor * torus_integral(integrand, d, quadrature_n))


def corner_coefficient_vectors(J: int, max_varied: int = 10) -> np.ndarray:
    """Extreme corners of ``[0, 1]^J``: vary the first ``min(J, max_varied)``
    coordinates over {0, 1}, pin the rest at 1."""
    m = min(J, max_varied)
    corners = []
    for bits in itertools.product((0.0, 1.0), repeat=m):
        y = np.ones(J)
        y[:m] = bits
        corners.append(y)
    return np.array(corners)


def calibrate_amplitude(
    d: int,
    eta: float,
    r: float,
    J: int,
    target: LipschitzClassSpec,
    grid: np.ndarray | None = None,
    quadrature_n: int = 10_000,
    bisect_steps: int = 48,
    max_varied_corners: int = 10,
) -> float:
    """Largest amplitude keeping all extreme-corner elements in the class.

    Feasibility of an amplitude means: every corner element (coefficients
    in {0, 1}, first ``min(J, 10)`` coordinates varied, the rest pinned at
    1), rescaled to ``[-gamma, gamma]^d``, passes ``membership_check``
    against ``target`` on the grid.  Amplitude 0 is always feasible and
    feasibility is monotone, so bisection brackets the supremum; the last
    feasible iterate is returned.
    """
    if target.d != d:
        raise ParameterError(f"target dimension {target.d} does not match d={d}")
    if eta <= 1.0 + 1.0 / d:
        raise ParameterError(
            f"Lipschitz targeting needs eta > 1 + 1/d = {1.0 + 1.0 / d}, got {eta}"
        )
    if grid is None:
        n_axis = {1: 201, 2: 41}.get(d, 11)
        grid = uniform_grid(target.gamma, d, n_axis)
    enumeration = enumerate_multiindices(d, J)
    corners = corner_coefficient_vectors(J, max_varied_corners)

    def feasible(amplitude: float) -> bool:
        spec = CubeSpec(d=d, eta=eta, amplitude=amplitude, J=J, r=r)
        for y in corners:
            element = CubeElement(spec, y, enumeration, c_r(d, r, quadrature_n))
            rescaled = rescale_to_domain(element, target.gamma)
            if membership_check(rescaled, target, grid):
                return False
        return True

    lo = 0.0
    hi = 1.0
    growth = 0
    while feasible(hi):
        lo = hi
        hi *= 2.0
        growth += 1
        if growth > 60:
            return lo
    for _ in range(bisect_steps):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise CalibrationError(
            "no positive amplitude keeps the corner elements inside the target class"
        )
    return lo
