"""
numerics.py — Differentiation and Extrapolation Helpers
=======================================================

Small numerical kernels shared by the geometry modules:

• central finite-difference stencils of arbitrary even order, with weights
  obtained from a Vandermonde solve;
• Taylor coefficients of a holomorphic function from FFT samples on a
  Cauchy circle (spectrally accurate derivatives for the Schwarzian);
• convergence-order fits, remainder-order fits and polynomial extrapolation
  of limit sequences.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy import optimize

from constants import CONTOUR_SAMPLES, RATE_FIT_MIN_POINTS
from errors import ConvergenceError, ValidationError

logger = logging.getLogger(__name__)


# ── Finite differences ──────────────────────────────────────────────────────

@lru_cache(maxsize=None)
def central_weights(derivative: int, order: int) -> Tuple[Tuple[int, ...], Tuple[float, ...]]:
    """Offsets and weights of the central stencil for d^derivative/dx^derivative.

    The stencil spans offsets −m..m with m = (derivative+1)//2 + order//2 − 1
    and is exact for polynomials up to degree 2m.
    """
    if derivative < 1 or order < 2 or order % 2:
        raise ValidationError(f"unsupported stencil: derivative={derivative}, order={order}")
    m = (derivative + 1) // 2 + order // 2 - 1
    offsets = np.arange(-m, m + 1, dtype=float)
    vandermonde = np.vander(offsets, increasing=True).T
    rhs = np.zeros(offsets.size)
    rhs[derivative] = math.factorial(derivative)
    weights = np.linalg.solve(vandermonde, rhs)
    return tuple(int(o) for o in offsets), tuple(float(w) for w in weights)


def central_difference(
    func: Callable[[float], float],
    x: float,
    step: float,
    derivative: int = 1,
    order: int = 4,
) -> float:
    """Central finite-difference derivative of a real function of one variable."""
    offsets, weights = central_weights(derivative, order)
    total = math.fsum(w * func(x + o * step) for o, w in zip(offsets, weights) if w != 0.0)
    return total / step ** derivative


def convergence_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    steps_arr = np.asarray(steps, dtype=float)
    errors_arr = np.asarray(errors, dtype=float)
    if steps_arr.size < 2 or np.any(errors_arr <= 0.0):
        raise ConvergenceError("convergence order needs at least two positive errors")
    slope, _ = np.polyfit(np.log(steps_arr), np.log(errors_arr), 1)
    return float(slope)


# ── Contour derivatives ─────────────────────────────────────────────────────

def taylor_coefficients(
    func: Callable[[np.ndarray], np.ndarray],
    z0: complex,
    radius: float,
    count: int = 4,
    samples: int = CONTOUR_SAMPLES,
) -> np.ndarray:
    """First `count` Taylor coefficients a_k = f^(k)(z0)/k! of a holomorphic f.

    f is sampled on the circle |z − z0| = radius, which must lie inside the
    disk of analyticity; the trapezoidal rule on the circle is the discrete
    Fourier transform of the samples.
    """
    if radius <= 0.0:
        raise ValidationError("contour radius must be positive")
    nodes = z0 + radius * np.exp(2j * np.pi * np.arange(samples) / samples)
    values = np.asarray(func(nodes), dtype=complex)
    coeffs = np.fft.fft(values) / samples
    k = np.arange(count)
    return coeffs[:count] / radius ** k


def complex_derivatives(
    func: Callable[[np.ndarray], np.ndarray],
    z0: complex,
    radius: float,
    count: int = 4,
    samples: int = CONTOUR_SAMPLES,
) -> np.ndarray:
    """Derivatives f(z0), f'(z0), …, f^(count−1)(z0) via taylor_coefficients."""
    coeffs = taylor_coefficients(func, z0, radius, count, samples)
    factorials = np.array([math.factorial(k) for k in range(count)], dtype=float)
    return coeffs * factorials


def schwarzian_derivative(
    func: Callable[[np.ndarray], np.ndarray],
    z0: complex,
    radius: float,
    samples: int = CONTOUR_SAMPLES,
) -> complex:
    """S(f)(z0) = f'''/f' − (3/2)(f''/f')²."""
    _, d1, d2, d3 = complex_derivatives(func, z0, radius, 4, samples)
    if d1 == 0:
        raise ValidationError("Schwarzian undefined where f' vanishes")
    ratio = d2 / d1
    return complex(d3 / d1 - 1.5 * ratio * ratio)


# ── Limits ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RateFit:
    """Fit of a sequence s(h) ≈ limit + coefficient·h^order."""

    limit: float
    coefficient: float
    order: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "limit": self.limit,
            "coefficient": self.coefficient,
            "order": self.order,
            "residual": self.residual,
        }


def _linear_fit(h: np.ndarray, values: np.ndarray, order: float) -> Tuple[float, float, float]:
    design = np.column_stack([np.ones_like(h), h ** order])
    coeffs, _, _, _ = np.linalg.lstsq(design, values, rcond=None)
    residual = float(np.linalg.norm(design @ coeffs - values))
    return float(coeffs[0]), float(coeffs[1]), residual


def fit_remainder_order(
    h: Sequence[float],
    values: Sequence[float],
    order_bounds: Tuple[float, float] = (0.1, 4.0),
) -> RateFit:
    """Fit s(h) = L + C·h^p with p chosen to minimise the least-squares residual.

    For each trial p the pair (L, C) is linear; the outer search over p is a
    bounded scalar minimisation.
    """
    h_arr = np.asarray(h, dtype=float)
    v_arr = np.asarray(values, dtype=float)
    if h_arr.size < RATE_FIT_MIN_POINTS:
        raise ConvergenceError(
            f"rate fit needs at least {RATE_FIT_MIN_POINTS} points, got {h_arr.size}"
        )
    if not np.all(np.isfinite(v_arr)):
        raise ConvergenceError("limit sequence contains non-finite values")

    # residuals of nearly exact data sit at round-off; compare on a log scale
    scale = max(float(np.max(np.abs(v_arr))), 1.0)

    def objective(p: float) -> float:
        return math.log(_linear_fit(h_arr, v_arr, p)[2] / scale + 1e-300)

    found = optimize.minimize_scalar(objective, bounds=order_bounds, method="bounded",
                                     options={"xatol": 1e-6})
    if not found.success:
        raise ConvergenceError(f"remainder-order fit failed: {found.message}")
    order = float(found.x)
    limit, coefficient, residual = _linear_fit(h_arr, v_arr, order)
    logger.debug("remainder fit: order=%.4f limit=%.12g residual=%.3g", order, limit, residual)
    return RateFit(limit=limit, coefficient=coefficient, order=order, residual=residual)


def linear_extrapolation(h: Sequence[float], values: Sequence[float]) -> float:
    """Intercept at h = 0 of the least-squares line through (h, values)."""
    limit, _, _ = _linear_fit(np.asarray(h, dtype=float), np.asarray(values, dtype=float), 1.0)
    return limit


def polynomial_extrapolation(h: Sequence[float], values: Sequence[float], degree: int = 3) -> float:
    """Intercept at h = 0 of a least-squares polynomial in h.

    The degree is capped at len(h) − 2 so at least one degree of freedom is
    left for the residual.
    """
    h_arr = np.asarray(h, dtype=float)
    v_arr = np.asarray(values, dtype=float)
    degree = max(1, min(degree, h_arr.size - 2))
    design = np.vander(h_arr, degree + 1, increasing=True)
    coeffs, _, _, _ = np.linalg.lstsq(design, v_arr, rcond=None)
    return float(coeffs[0])


def successive_ratio(values: Sequence[float]) -> float:
    """(v0 − v1)/(v1 − v2) for the first three entries of a sequence."""
    if len(values) < 3:
        raise ConvergenceError("successive ratio needs three values")
    denominator = values[1] - values[2]
    if denominator == 0.0:
        raise ConvergenceError("successive ratio undefined: flat tail")
    return (values[0] - values[1]) / denominator
