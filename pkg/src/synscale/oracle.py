"""Brute-force references for the closed-form bias adjustments.

Nothing in here reuses the closed forms it is meant to check: optimal
adjustments come from direct minimization over Gaussian samples, moments
from rejection sampling, and the delta-weighted ratio from adaptive
quadrature of the exact activation derivative.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .exceptions import BracketError, DomainError, QuadratureError
from .nn import Activation, activation_apply, activation_derivative
from .numerics import GaussianParams, make_rng, minimize_scalar

SEARCH_BRACKET = (-5.0, 5.0)
WIDE_BRACKET = (-20.0, 20.0)
SEARCH_TOL = 1e-5
FIG2_PARAMS = GaussianParams(mu=-0.1, sigma=0.25)
FIG2_BIAS = 0.7
SURROGATE_WIDTH = {Activation.SIGMOID: 1.05, Activation.TANH: 0.75}


@dataclass(frozen=True)
class OracleConfig:
    gaussian: GaussianParams
    bias: float
    activation: Activation
    n_samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.n_samples < 10_000:
            raise DomainError("oracle needs at least 1e4 samples")


@lru_cache(maxsize=32)
def _antithetic_samples(mu: float, sigma: float, n: int, seed: int) -> np.ndarray:
    # pairs (z, -z) make the sample mean exactly mu
    z = make_rng(seed).standard_normal(n // 2)
    z = np.concatenate([z, -z, np.zeros(n % 2)])
    s = mu + sigma * z
    s.setflags(write=False)
    return s


def output_change_objective(cfg: OracleConfig, epsilon: float) -> Callable[[float], float]:
    """Mean squared change of the neuron output as a function of the bias shift."""
    s = _antithetic_samples(cfg.gaussian.mu, cfg.gaussian.sigma, cfg.n_samples, cfg.seed)
    kind, b = cfg.activation, cfg.bias
    reference = activation_apply(kind, s)
    shifted = epsilon * (s - b) + b

    def objective(db: float) -> float:
        d = activation_apply(kind, shifted + db) - reference
        return float(np.mean(d * d))

    return objective


def numeric_optimal_delta_b(cfg: OracleConfig, epsilon: float) -> float:
    """argmin over db of E[(f(eps*(s-b) + b + db) - f(s))^2], s ~ N(mu, sigma^2)."""
    if not 0.0 <= epsilon <= 2.0:
        raise DomainError(f"epsilon must lie in [0, 2], got {epsilon}")
    objective = output_change_objective(cfg, epsilon)
    for lo, hi in (SEARCH_BRACKET, WIDE_BRACKET):
        x = minimize_scalar(objective, (lo, hi), tol=SEARCH_TOL)
        cell = (hi - lo) / 200
        if lo + cell < x < hi - cell:
            return x
    raise BracketError(f"optimum pinned to the edge of {WIDE_BRACKET} (last estimate {x})")


def numeric_slope_at_one(cfg: OracleConfig, h: float = 0.01) -> float:
    """Central-difference d(db_opt)/d(eps) at eps = 1."""
    return (numeric_optimal_delta_b(cfg, 1.0 + h) - numeric_optimal_delta_b(cfg, 1.0 - h)) / (2 * h)


def mc_truncated_mean(params: GaussianParams, lower: float, n: int = 10_000, seed: int = 0,
                      chunk: int = 1 << 20) -> tuple[float, float]:
    """Rejection-sampled mean of N(mu, sigma^2) restricted to [lower, inf).

    Returns ``(mean, standard_error)`` from exactly ``n`` accepted draws.
    """
    if n < 10_000:
        raise DomainError("need at least 1e4 accepted samples")
    rng = make_rng(seed)
    total = 0.0
    total_sq = 0.0
    accepted = 0
    drawn = 0
    while accepted < n:
        x = params.mu + params.sigma * rng.standard_normal(chunk)
        drawn += chunk
        keep = x[x >= lower][: n - accepted]
        if accepted == 0 and len(keep) / chunk < 1e-4:
            raise DomainError(
                f"acceptance rate {len(keep) / chunk:.2e} below 1e-4; truncation too deep")
        total += keep.sum()
        total_sq += (keep * keep).sum()
        accepted += len(keep)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def _squared_derivative(kind: Activation, s):
    s = np.asarray(s, dtype=float)
    if kind is Activation.TANH:
        # sech via exp(-|s|) keeps large |s| finite
        e = np.exp(-2.0 * np.abs(s))
        sech = 2.0 * np.exp(-np.abs(s)) / (1.0 + e)
        return sech ** 4
    return activation_derivative(kind, s) ** 2


def _gaussian_surrogate(kind: Activation, s, k: float):
    peak = 1.0 / 16.0 if kind is Activation.SIGMOID else 1.0
    return peak * np.exp(-0.5 * (np.asarray(s) / k) ** 2)


def _quad(f, a, b, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-10, limit=500,
                                      points=points)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    return value


def weighted_mean_ratio(kind, params: GaussianParams) -> float:
    """int p(s) f'(s)^2 s ds / int p(s) f'(s)^2 ds for Gaussian p."""
    kind = Activation(kind)
    if kind is Activation.STEP:
        raise DomainError("step derivative vanishes almost everywhere; ratio undefined")
    mu, sigma = params.mu, params.sigma
    lo, hi = mu - 10 * sigma, mu + 10 * sigma
    if kind is Activation.RELU:
        lo = max(lo, 0.0)
        if hi <= lo:
            raise QuadratureError("no probability mass above zero within 10 sigma")

    def density(s):
        z = (s - mu) / sigma
        return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2 * math.pi))

    def weight(s):
        return density(s) * float(_squared_derivative(kind, s))

    points = [mu] if lo < mu < hi else None
    den = _quad(weight, lo, hi, points)
    num = _quad(lambda s: weight(s) * s, lo, hi, points)
    if den <= 0:
        raise QuadratureError("weight integral is zero")
    return num / den


def quadrature_delta_b(kind, params: GaussianParams, b: float, epsilon: float) -> float:
    """First-order optimal bias shift with dL/dx = 1, integrated exactly."""
    return (1.0 - epsilon) * (weighted_mean_ratio(kind, params) - b)


@dataclass
class GaussianFit:
    kind: Activation
    k: float
    fit_error: float
    fitted_k: float
    fitted_error: float
    ratio_check: Callable[[float, float], float]


def sq_deriv_gaussian_fit(kind, grid=None) -> GaussianFit:
    """Compare [f'(s)]^2 with its scaled-Gaussian stand-in on ``[-8, 8]``.

    ``k`` is the width the closed forms use and ``fit_error`` its max
    absolute error on the grid; ``fitted_k`` is the least-squares width.
    """
    kind = Activation(kind)
    if kind not in SURROGATE_WIDTH:
        raise DomainError("only sigmoid and tanh have a Gaussian surrogate")
    s = np.linspace(-8.0, 8.0, 16001) if grid is None else np.asarray(grid, dtype=float)
    exact = _squared_derivative(kind, s)

    def max_err(k):
        return float(np.max(np.abs(exact - _gaussian_surrogate(kind, s, k))))

    def sq_err(k):
        return float(np.sum((exact - _gaussian_surrogate(kind, s, k)) ** 2))

    k = SURROGATE_WIDTH[kind]
    fitted = minimize_scalar(sq_err, (0.2, 3.0), tol=1e-7)

    def ratio_check(mu: float, sigma: float) -> float:
        return weighted_mean_ratio(kind, GaussianParams(mu, sigma))

    return GaussianFit(kind, k, max_err(k), fitted, max_err(fitted), ratio_check)
