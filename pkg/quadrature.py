"""
quadrature.py — Cell-Tree Adaptive Integration
==============================================

Every integral the engine evaluates is a 1D integral over x = log ρ, or a 2D
integral over (x, θ) whose θ-direction is periodic.  The interval is cut into
a fixed set of cells; each cell is integrated by QUADPACK (scipy.integrate.quad)
and bisected recursively while its error exceeds its share of the tolerance.

Determinism
───────────
• The initial cell tree depends only on the interval and `cells`.
• Cells may be evaluated on a thread pool (`jobs > 1`); results are collected
  with Executor.map, which preserves submission order.
• Values are summed with math.fsum in cell order, so a fixed cell tree gives
  bit-identical totals regardless of the number of workers.

Periodic directions use the trapezoidal rule, which converges geometrically
for smooth periodic integrands.
"""

from __future__ import annotations

import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import integrate

from constants import (
    QUAD_ABS_TOL,
    QUAD_CELLS,
    QUAD_MAX_DEPTH,
    QUAD_MAX_SUBDIVISIONS,
    QUAD_ORDER,
    QUAD_REL_TOL,
    QUAD_ROUNDOFF_FACTOR,
)
from errors import QuadratureError, ValidationError

logger = logging.getLogger(__name__)

ANGULAR_NODES = 32


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and layout of the cell tree."""

    rel_tol: float = QUAD_REL_TOL
    abs_tol: float = QUAD_ABS_TOL
    max_subdivisions: int = QUAD_MAX_SUBDIVISIONS
    order: int = QUAD_ORDER
    cells: int = QUAD_CELLS
    max_depth: int = QUAD_MAX_DEPTH
    angular_nodes: int = ANGULAR_NODES
    jobs: int = 1

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValidationError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1 or self.cells < 1 or self.max_depth < 0:
            raise ValidationError("quadrature subdivision limits must be positive")
        if self.angular_nodes < 4:
            raise ValidationError("at least 4 angular nodes are required")
        if self.jobs < 1:
            raise ValidationError("jobs must be at least 1")

    def halved(self) -> "QuadratureConfig":
        """Same layout with half the relative tolerance."""
        return replace(self, rel_tol=self.rel_tol / 2.0)

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_subdivisions": self.max_subdivisions,
            "order": self.order,
            "cells": self.cells,
            "max_depth": self.max_depth,
            "angular_nodes": self.angular_nodes,
            "jobs": self.jobs,
        }


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    depth: int
    cells: int
    evaluations: int


@dataclass(frozen=True)
class _CellResult:
    value: float
    error: float
    magnitude: float
    depth: int
    cells: int
    evaluations: int


def _integrate_cell(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    cfg: QuadratureConfig,
    abs_share: float,
    depth: int = 0,
) -> _CellResult:
    out = integrate.quad(
        func,
        lo,
        hi,
        epsabs=abs_share,
        epsrel=cfg.rel_tol,
        limit=cfg.max_subdivisions,
        full_output=1,
    )
    value, error, info = out[0], out[1], out[2]
    warned = len(out) > 3
    evaluations = int(info.get("neval", 0))
    target = max(abs_share, cfg.rel_tol * abs(value))
    if not warned and error <= target and math.isfinite(value):
        return _CellResult(value, error, abs(value), depth, 1, evaluations)

    if depth >= cfg.max_depth:
        logger.warning(
            "cell [%.6g, %.6g] did not converge: value=%.6g error=%.3g depth=%d",
            lo, hi, value, error, depth,
        )
        raise QuadratureError(
            f"quadrature failed on [{lo:.6g}, {hi:.6g}] after {depth} bisections "
            f"(error {error:.3g} > target {target:.3g})"
        )

    logger.debug("bisecting cell [%.6g, %.6g] at depth %d (error %.3g)", lo, hi, depth, error)
    mid = 0.5 * (lo + hi)
    left = _integrate_cell(func, lo, mid, cfg, abs_share / 2.0, depth + 1)
    right = _integrate_cell(func, mid, hi, cfg, abs_share / 2.0, depth + 1)
    return _CellResult(
        value=math.fsum((left.value, right.value)),
        error=left.error + right.error,
        magnitude=left.magnitude + right.magnitude,
        depth=max(left.depth, right.depth),
        cells=left.cells + right.cells,
        evaluations=evaluations + left.evaluations + right.evaluations,
    )


def cell_edges(lo: float, hi: float, cells: int, breakpoints: Sequence[float] = ()) -> List[float]:
    """Equal-width cell edges on [lo, hi] with extra breakpoints merged in."""
    edges = set(np.linspace(lo, hi, cells + 1).tolist())
    edges.update(float(b) for b in breakpoints if lo < b < hi)
    return sorted(edges)


def integrate_1d(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    cfg: QuadratureConfig,
    breakpoints: Sequence[float] = (),
) -> QuadratureResult:
    """∫_lo^hi func(x) dx over the cell tree; an empty interval gives 0."""
    if hi == lo:
        return QuadratureResult(0.0, 0.0, 0, 0, 0)
    sign = 1.0
    if hi < lo:
        lo, hi, sign = hi, lo, -1.0

    edges = cell_edges(lo, hi, cfg.cells, breakpoints)
    spans: List[Tuple[float, float]] = list(zip(edges[:-1], edges[1:]))
    abs_share = cfg.abs_tol / len(spans)

    def work(span: Tuple[float, float]) -> _CellResult:
        return _integrate_cell(func, span[0], span[1], cfg, abs_share)

    if cfg.jobs > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(work, spans))
    else:
        results = [work(span) for span in spans]

    value = math.fsum(r.value for r in results)
    magnitude = math.fsum(r.magnitude for r in results)
    error = math.fsum(r.error for r in results)
    error += QUAD_ROUNDOFF_FACTOR * sys.float_info.epsilon * magnitude
    return QuadratureResult(
        value=sign * value,
        error=error,
        depth=max(r.depth for r in results),
        cells=sum(r.cells for r in results),
        evaluations=sum(r.evaluations for r in results),
    )


def periodic_mean(func: Callable[[np.ndarray], np.ndarray], nodes: int) -> float:
    """(1/2π)∫_0^{2π} func(θ) dθ by the trapezoidal rule on `nodes` points."""
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    values = np.asarray(func(theta), dtype=float)
    return math.fsum(values.tolist()) / nodes


def integrate_cylinder(
    func: Callable[[float, np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    cfg: QuadratureConfig,
    breakpoints: Sequence[float] = (),
) -> QuadratureResult:
    """∫_lo^hi ∫_0^{2π} func(x, θ) dθ dx, adaptive in x and trapezoidal in θ.

    `func` receives a scalar x and the array of angular nodes.
    """
    nodes = cfg.angular_nodes

    def slice_integral(x: float) -> float:
        return 2.0 * np.pi * periodic_mean(lambda theta: func(x, theta), nodes)

    return integrate_1d(slice_integral, lo, hi, cfg, breakpoints)


def integrate_rectangle(
    func: Callable[[float, float], float],
    x_range: Tuple[float, float],
    y_range: Tuple[float, float],
    cfg: QuadratureConfig,
) -> QuadratureResult:
    """∫∫ func(x, y) dy dx over a rectangle, nested adaptive in both directions."""
    y_lo, y_hi = y_range
    inner_errors: List[float] = []

    def inner(x: float) -> float:
        value, error = integrate.quad(
            lambda y: func(x, y),
            y_lo,
            y_hi,
            epsabs=cfg.abs_tol,
            epsrel=cfg.rel_tol,
            limit=cfg.max_subdivisions,
        )
        inner_errors.append(error)
        return value

    outer = integrate_1d(inner, x_range[0], x_range[1], replace(cfg, jobs=1))
    width = abs(x_range[1] - x_range[0])
    inner_error = max(inner_errors, default=0.0) * width
    return replace(outer, error=outer.error + inner_error)
