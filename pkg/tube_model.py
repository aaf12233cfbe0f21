"""
tube_model.py — Symmetric Projective Tube A_ℓ(ε)
=================================================

The hyperbolic annulus with core geodesic of length ℓ, written as the round
annulus

    x_in = −2π²/ℓ + (2π/ℓ)·arcsin(ℓ/ε)  <  x_core = −π²/ℓ  <  x_out = −(2π/ℓ)·arcsin(ℓ/ε)

in x = log ρ, carrying the push-forward metric

    Î_ℓ = a² / (ρ² sin²(a log ρ)) |dz|²,     a = ℓ/2π,

i.e. σ = log a − log|sin(ax)|.  Both boundary circles have length ε and the
inversion r(z) = e^{−2π²/ℓ}/z̄ is an isometry swapping the two halves.

W-volume routes
───────────────
• polyakov  the outer half is the cusp annulus (x_core, x_out) with
            Î_ℓ = e^{2w_ℓ}Î₀; its W-volume comes from the cusp closed forms
            plus the Polyakov variation of w_ℓ, and is doubled; the boundary
            items are then those of the tube circles.
• direct    the shell quadrature of the engine over the whole tube.

The two routes are run concurrently by `compare_routes` in a chosen ledger;
their difference is reported, together with the doubling defect of the
direct route.  The study against −π³/ℓ + 2π²/ε + 2b(ε) uses the itemized
ledger that b is written in.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np

from constants import CONTOUR_RADIUS_FRACTION, EPSILON_0, TUBE_DEFAULT_ELLS, TUBE_DEFAULT_EPS
from cusp_model import CuspTruncation, boundary_term_x, cusp_metric, cusp_w_volume_for
from errors import DomainError, ValidationError
from halfspace import AnnulusDomain, ConformalMetric, RadialField, RadialProfile, radial_metric
from numerics import RateFit, fit_remainder_order, schwarzian_derivative, successive_ratio
from quadrature import QuadratureConfig
from wvolume import (
    BoundaryCircle,
    LedgerConvention,
    RegionSpec,
    VolumeRoute,
    WVolumeReport,
    assemble_report,
    boundary_term,
    polyakov_delta,
    w_volume,
)

logger = logging.getLogger(__name__)


class TubeRoute(str, Enum):
    POLYAKOV = "polyakov"
    DIRECT = "direct"


def tube_profile(ell: float) -> RadialProfile:
    a = ell / (2.0 * math.pi)
    return RadialProfile(
        sigma=lambda x: math.log(a) - math.log(abs(math.sin(a * x))),
        sigma_x=lambda x: -a / math.tan(a * x),
        sigma_xx=lambda x: (a / math.sin(a * x)) ** 2,
    )


@dataclass(frozen=True)
class TubeSpec:
    """A_ℓ(ε): core length ℓ, boundary length ε with ℓ < ε ≤ ε₀."""

    ell: float
    eps: float = TUBE_DEFAULT_EPS

    def __post_init__(self) -> None:
        try:
            ell, eps = float(self.ell), float(self.eps)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"tube parameters must be numbers: {exc}") from exc
        if not ell > 0.0:
            raise ValidationError(f"core length must be positive, got {ell}")
        if not (ell < eps <= EPSILON_0):
            raise ValidationError(f"tube needs ℓ < ε ≤ ε₀ = {EPSILON_0:.6f}, got ℓ={ell}, ε={eps}")

    @property
    def a(self) -> float:
        return self.ell / (2.0 * math.pi)

    @property
    def boundary_angle(self) -> float:
        return math.asin(self.ell / self.eps)

    @property
    def log_inner(self) -> float:
        return (self.boundary_angle - math.pi) / self.a

    @property
    def log_core(self) -> float:
        return -math.pi * math.pi / self.ell

    @property
    def log_outer(self) -> float:
        return -self.boundary_angle / self.a

    @property
    def inner_radius(self) -> float:
        return math.exp(self.log_inner)

    @property
    def outer_radius(self) -> float:
        return math.exp(self.log_outer)

    @property
    def boundary_horocycle_length(self) -> float:
        """Î₀-length ε̃ = 2π/|x_out| of the outer boundary circle."""
        return 2.0 * math.pi / abs(self.log_outer)

    def contains_log(self, x: float) -> bool:
        slack = 1e-12 * abs(self.log_inner)
        return self.log_inner - slack <= x <= self.log_outer + slack

    def region(self) -> RegionSpec:
        return RegionSpec(tube_metric(self), self.log_inner, self.log_outer)

    def half_region(self) -> RegionSpec:
        return RegionSpec(tube_metric(self), self.log_core, self.log_outer)

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "eps": self.eps,
            "log_inner": self.log_inner,
            "log_core": self.log_core,
            "log_outer": self.log_outer,
        }


def tube_core_radius(spec: TubeSpec) -> float:
    """e^{−π²/ℓ}; 0.0 once it underflows."""
    return math.exp(spec.log_core)


def tube_metric(spec: TubeSpec) -> ConformalMetric:
    domain = AnnulusDomain(spec.inner_radius, spec.outer_radius)
    return radial_metric(tube_profile(spec.ell), domain, name=f"tube(ℓ={spec.ell:g})")


def tube_density(spec: TubeSpec, z: complex) -> float:
    """e^{2φ_ℓ(z)} = ℓ²/(4π²ρ² sin²((ℓ/2π) log ρ))."""
    if z == 0:
        raise DomainError("the tube metric is not defined at 0")
    x = math.log(abs(z))
    if not spec.contains_log(x):
        raise DomainError(f"|z| = {abs(z):.6g} lies outside the tube")
    sigma = tube_profile(spec.ell).sigma(x)
    return math.exp(2.0 * (sigma - x))


def circle_length(spec: TubeSpec, x: float) -> float:
    """Î_ℓ-length 2πe^σ of the circle log|z| = x."""
    if not spec.contains_log(x):
        raise DomainError(f"log ρ = {x:.6g} lies outside the tube")
    return 2.0 * math.pi * math.exp(tube_profile(spec.ell).sigma(x))


# ── Developing map and Schwarzian ───────────────────────────────────────────

def f_ell(ell: float, z: complex) -> complex:
    """f_ℓ(z) = z^{2πi/ℓ} on the principal branch."""
    return cmath.exp(2j * math.pi / ell * cmath.log(z))


def tube_schwarzian_coefficient(ell: float, z: complex) -> complex:
    """(1 + 4π²/ℓ²)/(2z²)."""
    return (1.0 + 4.0 * math.pi ** 2 / ell ** 2) / (2.0 * z * z)


def tube_schwarzian(spec: TubeSpec) -> Callable[[complex], complex]:
    """Coefficient of dz² in S(f_ℓ) as a function of z."""
    ell = spec.ell
    return lambda z: tube_schwarzian_coefficient(ell, z)


def tube_schwarzian_numeric(ell: float, z: complex) -> complex:
    """S(f_ℓ)(z) from contour derivatives of f_ℓ.

    f_ℓ is sampled as f_ℓ(z₀)·(w/z₀)^β so the circle never meets the branch
    cut; the radius shrinks with |β| to keep the samples well scaled.
    """
    if z == 0:
        raise DomainError("f_ℓ is singular at 0")
    beta = 2j * math.pi / ell
    radius = CONTOUR_RADIUS_FRACTION * abs(z) / max(1.0, abs(beta))

    def local(w: np.ndarray) -> np.ndarray:
        return np.exp(beta * np.log(w / z))

    return schwarzian_derivative(local, z, radius)


def tube_inversion(spec: TubeSpec, z: complex) -> complex:
    """r(z) = e^{−2π²/ℓ}/z̄, evaluated in log-polar form."""
    if z == 0:
        raise DomainError("the inversion is not defined at 0")
    log_modulus = 2.0 * spec.log_core - math.log(abs(z))
    return cmath.exp(complex(log_modulus, cmath.phase(z)))


# ── Comparison with the cusp ────────────────────────────────────────────────

def w_ell(ell: float, x: float) -> float:
    """w_ℓ = log(a x / sin(a x)) with Î_ℓ = e^{2w_ℓ}Î₀."""
    a = ell / (2.0 * math.pi)
    return math.log(a * x / math.sin(a * x))


def w_ell_field(ell: float) -> RadialField:
    a = ell / (2.0 * math.pi)
    return RadialField(
        u=lambda x: w_ell(ell, x),
        du=lambda x: 1.0 / x - a / math.tan(a * x),
        d2u=lambda x: -1.0 / (x * x) + (a / math.sin(a * x)) ** 2,
        name=f"w_ell({ell:g})",
    )


def tube_perturbation_budget(ell: float, magnitude: float) -> float:
    """Error budget A·e^{−π²/(2ℓ)}/ℓ² for a Schwarzian perturbation of size A."""
    if ell <= 0.0:
        raise ValidationError("core length must be positive")
    if magnitude < 0.0:
        raise ValidationError("perturbation magnitude must be non-negative")
    return magnitude * math.exp(-math.pi ** 2 / (2.0 * ell)) / ell ** 2


# ── W-volume ────────────────────────────────────────────────────────────────

def _polyakov_route(spec: TubeSpec, cfg: QuadratureConfig, ledger: LedgerConvention) -> WVolumeReport:
    x_core, x_out = spec.log_core, spec.log_outer
    truncation = CuspTruncation(x_core, x_out)
    correction = polyakov_delta(cusp_metric(), w_ell_field(spec.ell), truncation.region(), cfg)
    cusp_half = cusp_w_volume_for(truncation)
    target = 2.0 * (cusp_half.invariant_W() + correction)
    # items are those of the tube's own boundary circles; the correction
    # absorbs the Polyakov variation and the change of boundary items
    report = assemble_report(
        volume=2.0 * cusp_half.volume,
        h_integral=2.0 * cusp_half.epstein_H_integral,
        boundaries=[tube_boundary(spec, spec.log_inner, 1), tube_boundary(spec, x_out, -1)],
        error_estimate=0.0,
        route=VolumeRoute.POLYAKOV,
        ledger=ledger,
    )
    report.polyakov_correction = target - report.invariant_W()
    report.total_W = report.ledger_total()
    return report


def tube_w_volume(spec: TubeSpec, cfg: Optional[QuadratureConfig] = None,
                  route: TubeRoute = TubeRoute.POLYAKOV,
                  ledger: LedgerConvention = LedgerConvention.INVARIANT) -> WVolumeReport:
    """W(A_ℓ(ε), Î_ℓ) by the Polyakov route or by direct quadrature.

    The outer half of the tube is the cusp annulus (x_core, x_out) changed
    by w_ℓ, and the invariant W doubles exactly across the core geodesic.
    """
    cfg = cfg or QuadratureConfig()
    if route is TubeRoute.POLYAKOV:
        report = _polyakov_route(spec, cfg, ledger)
    else:
        report = w_volume(spec.region(), cfg, ledger=ledger)
    logger.debug("tube ℓ=%g ε=%g route=%s: W=%.12g", spec.ell, spec.eps, route.value, report.total_W)
    return report


def tube_boundary(spec: TubeSpec, x: float, orientation: int = 1) -> BoundaryCircle:
    return BoundaryCircle.from_profile(tube_metric(spec), x, orientation)


def doubling_defect(spec: TubeSpec, cfg: Optional[QuadratureConfig] = None,
                    whole: Optional[WVolumeReport] = None) -> float:
    """W(A) − 2W(C) − (2b(core) − b(in) − b(out)) for the direct route.

    b is the boundary item of `whole`'s ledger.  Zero up to quadrature
    error: the inversion carries the inner half of the region onto the
    outer half.
    """
    cfg = cfg or QuadratureConfig()
    whole = whole or w_volume(spec.region(), cfg)
    ledger = LedgerConvention(whole.ledger)
    half = w_volume(spec.half_region(), cfg, ledger=ledger)
    b = {x: boundary_term(tube_boundary(spec, x), ledger)
         for x in (spec.log_inner, spec.log_core, spec.log_outer)}
    expected = 2.0 * b[spec.log_core] - b[spec.log_inner] - b[spec.log_outer]
    return whole.total_W - 2.0 * half.total_W - expected


@dataclass
class RouteComparison:
    spec: TubeSpec
    polyakov: WVolumeReport
    direct: WVolumeReport
    doubling_defect: float

    @property
    def delta(self) -> float:
        return self.polyakov.total_W - self.direct.total_W

    @property
    def relative_delta(self) -> float:
        return abs(self.delta) / max(abs(self.direct.total_W), 1e-300)

    def to_dict(self) -> dict:
        return {
            "tube": self.spec.to_dict(),
            "polyakov": self.polyakov.to_dict(),
            "direct": self.direct.to_dict(),
            "delta": self.delta,
            "relative_delta": self.relative_delta,
            "doubling_defect": self.doubling_defect,
        }


def compare_routes(spec: TubeSpec, cfg: Optional[QuadratureConfig] = None,
                   ledger: LedgerConvention = LedgerConvention.INVARIANT) -> RouteComparison:
    """Both W routes in one ledger, evaluated concurrently."""
    cfg = cfg or QuadratureConfig()
    with ThreadPoolExecutor(max_workers=2) as pool:
        polyakov = pool.submit(tube_w_volume, spec, cfg, TubeRoute.POLYAKOV, ledger)
        direct = pool.submit(tube_w_volume, spec, cfg, TubeRoute.DIRECT, ledger)
        polyakov_report, direct_report = polyakov.result(), direct.result()
    defect = doubling_defect(spec, cfg, direct_report)
    comparison = RouteComparison(spec, polyakov_report, direct_report, defect)
    logger.debug("tube ℓ=%g: route delta %.3g, doubling defect %.3g", spec.ell, comparison.delta, defect)
    return comparison


# ── Asymptotics ─────────────────────────────────────────────────────────────

def wvol_asymptote(ell: float, eps: float) -> float:
    """−π³/ℓ + 2π²/ε + 2b(ρ(ε)) with the exact itemized cusp boundary term."""
    if ell <= 0.0 or eps <= 0.0:
        raise ValidationError("ℓ and ε must be positive")
    return -math.pi ** 3 / ell + 2.0 * math.pi ** 2 / eps + 2.0 * boundary_term_x(-2.0 * math.pi / eps)


def tube_wvol_asymptote(spec: TubeSpec) -> float:
    """Leading-order W(A_ℓ(ε)) at the tube's boundary length ε."""
    return wvol_asymptote(spec.ell, spec.eps)


def tube_wvol_asymptote_boundary(spec: TubeSpec) -> float:
    """Leading-order W evaluated at the actual boundary circle.

    The outer circle has Î₀-horocycle length ε̃ = ℓ/arcsin(ℓ/ε) rather than
    ε; the two forms differ by O(ℓ²).
    """
    return wvol_asymptote(spec.ell, spec.boundary_horocycle_length)


@dataclass
class TubeStudy:
    """W(A_ℓ(ε)) against its asymptote over a decreasing ℓ-schedule."""

    eps: float
    route: str
    ells: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    asymptotes: List[float] = field(default_factory=list)
    rate: Optional[RateFit] = None

    @property
    def residuals(self) -> List[float]:
        return [w - a for w, a in zip(self.values, self.asymptotes)]

    @property
    def adapted_values(self) -> List[float]:
        """W + π³/ℓ: the tube with its adapted correction."""
        return [w + math.pi ** 3 / ell for w, ell in zip(self.values, self.ells)]

    def residual_ratio(self) -> float:
        return successive_ratio(self.residuals)

    def rows(self) -> List[dict]:
        return [
            {"ell": ell, "W": w, "asymptote": a, "residual": w - a, "adapted": w + math.pi ** 3 / ell}
            for ell, w, a in zip(self.ells, self.values, self.asymptotes)
        ]

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "route": self.route,
            "rate": self.rate.to_dict() if self.rate is not None else None,
            "rows": self.rows(),
        }


def tube_study(
    eps: float = TUBE_DEFAULT_EPS,
    ells: Sequence[float] = TUBE_DEFAULT_ELLS,
    cfg: Optional[QuadratureConfig] = None,
    route: TubeRoute = TubeRoute.DIRECT,
    fit: bool = True,
) -> TubeStudy:
    cfg = cfg or QuadratureConfig()
    ordered = sorted((float(e) for e in ells), reverse=True)
    specs = [TubeSpec(ell, eps) for ell in ordered]

    # the asymptote carries the itemized b(ε), so W is totalled the same way
    def run(spec: TubeSpec) -> float:
        return tube_w_volume(spec, cfg, route, LedgerConvention.ITEMIZED).total_W

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            values = list(pool.map(run, specs))
    else:
        values = [run(spec) for spec in specs]
    study = TubeStudy(
        eps=eps,
        route=route.value,
        ells=ordered,
        values=values,
        asymptotes=[tube_wvol_asymptote(spec) for spec in specs],
    )
    if fit and len(ordered) >= 3:
        study.rate = fit_remainder_order(ordered, study.residuals)
    return study
