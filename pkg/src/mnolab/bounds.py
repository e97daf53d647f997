"""Closed-form calculators: generalization, entropy, rate and minimax envelopes.

Every calculator is pure arithmetic on user-supplied constants, evaluated
in log space where magnitudes could overflow.  Covering numbers enter as
logarithms, so measured covering estimates and the analytic envelope can
be plugged into the same formulas interchangeably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class GenBoundInputs:
    """Inputs of the expected generalization-error bound.

    ``log_cov_eta`` is ``log N(eta)``, the log covering number of the
    architecture class at scale ``eta``; ``log_cov_eta4b`` is the log
    covering number at scale ``eta / (4 beta_v)``.
    """

    eps: float
    eta: float
    sigma: float
    beta_v: float
    n_alpha: int
    n_u: int
    n_x: int
    log_cov_eta: float
    log_cov_eta4b: float

    def __post_init__(self):
        if self.eps < 0 or self.eta < 0 or self.sigma < 0 or self.beta_v < 0:
            raise ParameterError("bound inputs must be nonnegative")
        if self.n_alpha < 1 or self.n_u < 1 or self.n_x < 1:
            raise ParameterError("sample tier sizes must be >= 1")
        if self.log_cov_eta < 0 or self.log_cov_eta4b < 0:
            raise ParameterError("log covering numbers must be nonnegative")


@dataclass(frozen=True)
class GenBoundBreakdown:
    """The bound total together with its five addends."""

    total: float
    approx_term: float
    scale_term: float
    noise_sqrt_term: float
    noise_linear_term: float
    outer_term: float

    @property
    def terms(self) -> tuple[float, float, float, float, float]:
        return (
            self.approx_term,
            self.scale_term,
            self.noise_sqrt_term,
            self.noise_linear_term,
            self.outer_term,
        )


def generalization_bound(b: GenBoundInputs) -> GenBoundBreakdown:
    """Expected generalization-error bound of the trained clipped operator.

    ``4 eps^2 + eta (8 sigma + 6)
    + (8 sigma eta / sqrt(n)) sqrt(log N(eta) + log 2)
    + (16 sigma^2 / n) (log N(eta) + log 2)
    + (112 beta_v^2 / (3 n_alpha)) log N(eta / (4 beta_v))``
    with ``n = n_alpha n_u n_x``.
    """
    n_total = b.n_alpha * b.n_u * b.n_x
    approx = 4.0 * b.eps**2
    scale = b.eta * (8.0 * b.sigma + 6.0)
    log_term = b.log_cov_eta + math.log(2.0)
    noise_sqrt = (8.0 * b.sigma * b.eta / math.sqrt(n_total)) * math.sqrt(log_term)
    noise_linear = (16.0 * b.sigma**2 / n_total) * log_term
    outer = (112.0 * b.beta_v**2 / (3.0 * b.n_alpha)) * b.log_cov_eta4b
    return GenBoundBreakdown(
        total=approx + scale + noise_sqrt + noise_linear + outer,
        approx_term=approx,
        scale_term=scale,
        noise_sqrt_term=noise_sqrt,
        noise_linear_term=noise_linear,
        outer_term=outer,
    )


@dataclass(frozen=True)
class EntropyBoundResult:
    """Log covering bound together with the log of the scale factor T."""

    log_cover: float
    log_t: float


def metric_entropy_bound(
    n_terms_l: float,
    n_terms_b: float,
    n_terms_tau: float,
    k_tau: float,
    k_b: float,
    k_l: float,
    depth_tau: float,
    depth_b: float,
    depth_l: float,
    kappa_tau: float,
    kappa_b: float,
    kappa_l: float,
    eta: float,
    log_t_override: float | None = None,
) -> EntropyBoundResult:
    """Covering-number bound of the separable class at scale ``eta``.

    With ``M = P H N`` the product of term counts, the scale factor is
    ``T = M (L_1 kappa_1^(L_1 - 1) + L_2 kappa_2^(L_2 - 1) + L_3 kappa_3^(L_3 - 1))``
    and

    ``log N(eta) = M [log(T / eta)
                      + K_3 log(L_3 kappa_3 T / eta)
                      + K_2 log(L_2 kappa_2 T / eta)
                      + K_1 log(L_1 kappa_1 T / eta)]``

    where index 1 is the output stage (tau), 2 the branch stage (b), 3 the
    stage-1 coefficients (l).  Everything is computed with logarithms so
    large depths and magnitudes cannot overflow.
    """
    for name, value in (
        ("n_terms_l", n_terms_l),
        ("n_terms_b", n_terms_b),
        ("n_terms_tau", n_terms_tau),
    ):
        if value < 1:
            raise ParameterError(f"{name} must be >= 1, got {value}")
    for name, value in (
        ("k_tau", k_tau), ("k_b", k_b), ("k_l", k_l),
        ("depth_tau", depth_tau), ("depth_b", depth_b), ("depth_l", depth_l),
        ("kappa_tau", kappa_tau), ("kappa_b", kappa_b), ("kappa_l", kappa_l),
    ):
        if value < 0:
            raise ParameterError(f"{name} must be nonnegative, got {value}")
    if eta <= 0:
        raise ParameterError(f"covering scale must be positive, got {eta}")

    m_product = float(n_terms_l) * float(n_terms_b) * float(n_terms_tau)
    if log_t_override is None:
        stage_logs = []
        for depth, kappa in ((depth_tau, kappa_tau), (depth_b, kappa_b), (depth_l, kappa_l)):
            if depth <= 0:
                continue
            if kappa <= 0:
                if depth == 1:
                    stage_logs.append(0.0)
                continue
            stage_logs.append(math.log(depth) + (depth - 1.0) * math.log(kappa))
        if not stage_logs:
            raise ParameterError("at least one stage must have positive depth")
        log_t = math.log(m_product) + _logsumexp(stage_logs)
    else:
        log_t = float(log_t_override)

    log_eta = math.log(eta)
    pieces = [log_t - log_eta]
    for k, depth, kappa in ((k_l, depth_l, kappa_l), (k_b, depth_b, kappa_b),
                            (k_tau, depth_tau, kappa_tau)):
        if k == 0:
            continue
        if depth <= 0 or kappa <= 0:
            raise ParameterError("stages with parameters need positive depth and magnitude")
        pieces.append(k * (math.log(depth) + math.log(kappa) + log_t - log_eta))
    log_cover = m_product * sum(pieces)
    return EntropyBoundResult(log_cover=log_cover, log_t=log_t)


def _logsumexp(values) -> float:
    values = np.asarray(values, dtype=float)
    peak = values.max()
    return float(peak + math.log(np.exp(values - peak).sum()))


def rate_schedule(n_alpha: int, d_w: int, d_u: int, beta_v: float = 1.0) -> tuple[float, float]:
    """Accuracy and covering-scale schedule driven by the outer sample count.

    ``eps = (d_max / (4 (1 + d_max / 2)) * log(n_alpha) / log(log(n_alpha)))^(-1/d_max)``
    and ``eta = 4 beta_v / n_alpha``; requires ``n_alpha >= 16`` so the
    iterated logarithm is positive.
    """
    if d_w < 1 or d_u < 1:
        raise ParameterError("dimensions must be >= 1")
    if beta_v <= 0:
        raise ParameterError(f"output bound must be positive, got {beta_v}")
    if n_alpha < 16:
        raise ParameterError(f"need n_alpha >= 16 for a positive iterated logarithm, got {n_alpha}")
    d_max = max(d_w, d_u)
    constant = d_max / (4.0 * (1.0 + d_max / 2.0))
    ratio = math.log(n_alpha) / math.log(math.log(n_alpha))
    eps = (constant * ratio) ** (-1.0 / d_max)
    eta = 4.0 * beta_v / n_alpha
    return eps, eta


@dataclass(frozen=True)
class EnvelopeRow:
    """Minimax complexity envelopes at one accuracy."""

    eps: float
    log_lower: float
    log_upper: float
    crossover: bool

    @property
    def lower(self) -> float:
        return math.exp(self.log_lower) if self.log_lower < 700 else math.inf

    @property
    def upper(self) -> float:
        return math.exp(self.log_upper) if self.log_upper < 700 else math.inf


def minimax_envelopes(
    eps_grid,
    eta: float,
    delta: float,
    r: float,
    d_w: int,
    d_u: int,
    c_lower: float = 1.0,
    d_upper: float = 1.0,
) -> list[EnvelopeRow]:
    """Lower and upper minimax envelopes over an accuracy grid.

    ``log lower = c * eps^(-1 / ((eta + 1 + delta) r))`` and
    ``log upper = d * log(1 / eps) * eps^(-max(d_w, d_u))``.  The decay
    must satisfy ``eta > min(1 + 1/d_w, 1 + 1/d_u)``; accuracies must lie
    in ``(0, 1)``.  A row where the lower envelope exceeds the upper is
    flagged as a crossover (the envelopes are asymptotic and may cross
    near ``eps = 1``).
    """
    if d_w < 1 or d_u < 1:
        raise ParameterError("dimensions must be >= 1")
    eta_floor = min(1.0 + 1.0 / d_w, 1.0 + 1.0 / d_u)
    if eta <= eta_floor:
        raise ParameterError(f"decay must satisfy eta > {eta_floor}, got {eta}")
    if delta < 0:
        raise ParameterError(f"slack must be nonnegative, got {delta}")
    if r < 1:
        raise ParameterError(f"Lebesgue exponent must satisfy r >= 1, got {r}")
    if c_lower <= 0 or d_upper <= 0:
        raise ParameterError("envelope constants must be positive")
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0:
        raise ParameterError("accuracy grid must be nonempty")
    if np.any(eps_grid <= 0.0) or np.any(eps_grid >= 1.0):
        raise ParameterError("accuracies must lie in (0, 1)")
    d_max = max(d_w, d_u)
    rows = []
    for eps in eps_grid:
        log_lower = c_lower * eps ** (-1.0 / ((eta + 1.0 + delta) * r))
        log_upper = d_upper * math.log(1.0 / eps) * eps ** (-float(d_max))
        rows.append(
            EnvelopeRow(
                eps=float(eps),
                log_lower=float(log_lower),
                log_upper=float(log_upper),
                crossover=bool(log_lower > log_upper),
            )
        )
    return rows
