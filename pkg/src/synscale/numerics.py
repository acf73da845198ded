"""Scalar math primitives: Gaussian functions, truncated-normal moments,
a bracketed 1-D minimizer, central differences and seeded generators.

Everything here is float64 and side-effect free, apart from the generator
returned by :func:`make_rng`, which is owned by a single caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfcx

from .exceptions import DomainError, EvaluationError, SaturationError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# 1 - Phi(alpha) for alpha > 8 is below 7e-16; treat as saturated.
SATURATION_ALPHA = 8.0


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError(f"non-finite Gaussian parameters ({self.mu}, {self.sigma})")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator; the stream depends only on ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def _check_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"non-finite input {x}")
    return x


def std_normal_pdf(x: float) -> float:
    x = _check_finite(x)
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x: float) -> float:
    # erfc keeps full relative precision in the lower tail.
    x = _check_finite(x)
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_hazard(alpha):
    """phi(alpha) / (1 - Phi(alpha)), stable for any alpha.

    Uses the scaled complementary error function so that neither the
    numerator nor the denominator underflows. Accepts scalars or arrays.
    """
    return _SQRT_2_OVER_PI / erfcx(np.asarray(alpha, dtype=float) / math.sqrt(2.0))


def truncated_normal_mean(params: GaussianParams, lower: float) -> float:
    """Mean of N(mu, sigma^2) conditioned on being >= ``lower``.

    Raises SaturationError once the standardized bound passes 8, where the
    retained tail mass is below double-precision resolution.
    """
    lower = _check_finite(lower)
    alpha = (lower - params.mu) / params.sigma
    if alpha > SATURATION_ALPHA:
        raise SaturationError(
            f"standardized truncation point {alpha:.3g} > {SATURATION_ALPHA}; "
            "tail mass underflows"
        )
    return params.mu + params.sigma * float(normal_hazard(alpha))


def _evaluate(f: Callable[[float], float], x: float) -> float:
    y = float(f(x))
    if not math.isfinite(y):
        raise EvaluationError(f"objective returned {y} at x={x}")
    return y


def minimize_scalar(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    tol: float = 1e-8,
    grid_points: int = 201,
) -> float:
    """Minimize ``f`` on ``[lo, hi]`` by a grid scan then golden-section search.

    The scan localizes the best grid cell (which tolerates mild
    non-unimodality); golden-section then refines within the two adjacent
    cells until the interval is shorter than ``tol``.
    """
    lo, hi = (float(v) for v in bracket)
    if not lo < hi:
        raise DomainError(f"empty bracket [{lo}, {hi}]")
    if tol <= 0:
        raise DomainError("tol must be positive")
    if grid_points < 201:
        raise DomainError("grid scan needs at least 201 points")

    xs = np.linspace(lo, hi, grid_points)
    ys = [_evaluate(f, x) for x in xs]
    i = int(np.argmin(ys))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid_points - 1)]
    best_x, best_y = xs[i], ys[i]

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = _evaluate(f, c), _evaluate(f, d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _evaluate(f, c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _evaluate(f, d)
    x = 0.5 * (a + b)
    # a grid node can beat the refined point when f is flat or kinked there
    if best_y < _evaluate(f, x):
        return float(best_x)
    return float(x)


def finite_difference(f: Callable[[float], float], x: float, h: float = 1e-5) -> float:
    if h <= 0:
        raise DomainError("step h must be positive")
    return (_evaluate(f, x + h) - _evaluate(f, x - h)) / (2.0 * h)
