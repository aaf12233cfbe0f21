"""
wvolume.py — W-Volume Engine
============================

W-volume of the region N(Ω, φ) over an annulus Ω = {ρ₁ ≤ |z − c| ≤ ρ₂} with
round boundary, bounded by the Epstein surface Σ over Ω, the caterpillar
over each boundary circle, and the hyperplane (dome) over each circle.

Items
─────
    volume          hyperbolic volume between the domes through the two
                    Epstein boundary circles, on the axis side of Σ
    cat_volume_i    σ_i·(volume of the caterpillar solid P_i between the dome
                    through the Epstein circle and the dome over ∂Ω)
    caterpillar_i   σ_i·½∫_{C_i} H da
    edge_i          σ_i·¼θℓ_i   (θ = π/2, ℓ_i the lower caterpillar edge)
    σ_i             orientation flag, +1 on the inner and −1 on the outer circle

Ledgers
───────
    invariant   W = volume − Σ_i cat_volume_i − ½∫_Σ H da − Σ_i caterpillar_i
    itemized    W = volume − ½∫_Σ H da − Σ_i caterpillar_i − Σ_i edge_i

The invariant ledger is W of the whole region N(Ω, φ); it obeys the Polyakov
formula, boundary term included, and is the engine default.  For a radial
metric it equals −(π/2)∫σ'² dx − (π/2)(x₂ − x₁) exactly.  The edge items
change with e^{σ_i} under a constant rescale, so they are reported but only
summed by the itemized ledger, which is the one the cusp boundary term b(ρ)
and the tube asymptote are written in.  The two differ by boundary items
only:  itemized = invariant + Σ_i cat_volume_i − Σ_i edge_i.

A concentric split telescopes in both ledgers: the shared circle enters once
with each flag.  The (1 + H) caterpillar term is optional in both.

Volume routes
─────────────
• shell     rotationally symmetric metrics: 1D integral of π(X̃/T̃)² d log R
            in x = log ρ, scale-free in (σ, σ', σ'').
• cylinder  general metrics with rotationally constant boundary data: 2D
            integral over (x, θ) of ½tan²α·∂(log R, Θ)/∂(x, θ), using the
            differential of the Epstein map.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from constants import EMBEDDING_SAMPLES, REPORT_SCHEMA_VERSION
from epstein import (
    check_radial_embedding,
    cone_volume_density,
    epstein_differential,
    epstein_point,
    h_area_density,
    area_density_induced,
    radial_forms,
)
from errors import NonEmbeddedSurfaceError, ValidationError
from halfspace import (
    ConformalMetric,
    DerivativeMode,
    HyperbolicPoint3,
    RadialField,
    liouville_jet,
)
from quadrature import (
    QuadratureConfig,
    QuadratureResult,
    integrate_1d,
    integrate_cylinder,
    periodic_mean,
)

logger = logging.getLogger(__name__)

RIGHT_ANGLE = 0.5 * math.pi
BOUNDARY_DATA_TOL = 1.0e-8


class VolumeRoute(str, Enum):
    SHELL = "shell"
    CYLINDER = "cylinder"
    CLOSED_FORM = "closed-form"
    POLYAKOV = "polyakov"


class LedgerConvention(str, Enum):
    INVARIANT = "invariant"
    ITEMIZED = "itemized"


# ── Boundary circles ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BoundaryCircle:
    """A round boundary circle with constant boundary data.

    σ = φ + log ρ and σ' = 1 + ρ·∂_ρφ on the circle; the circle is stored by
    its log-radius so that radii far below the float range stay usable.
    """

    log_radius: float
    sigma: float
    sigma_x: float
    orientation: int = 1
    center: complex = 0j
    exterior_angle: float = RIGHT_ANGLE

    def __post_init__(self) -> None:
        if self.orientation not in (1, -1):
            raise ValidationError("orientation flag must be +1 or −1")

    @classmethod
    def from_phi(cls, radius: float, phi: float, dphi_drho: float,
                 orientation: int = 1, center: complex = 0j) -> "BoundaryCircle":
        if radius <= 0.0:
            raise ValidationError("boundary radius must be positive")
        x = math.log(radius)
        return cls(x, phi + x, 1.0 + radius * dphi_drho, orientation, center)

    @classmethod
    def from_profile(cls, metric: ConformalMetric, x: float, orientation: int = 1) -> "BoundaryCircle":
        s, s1, _ = metric.profile.jet(x)
        return cls(x, s, s1, orientation, metric.center)

    @property
    def radius(self) -> float:
        return math.exp(self.log_radius)

    @property
    def phi(self) -> float:
        return self.sigma - self.log_radius

    @property
    def u_surface(self) -> float:
        """ρ·v at the Epstein surface end of the caterpillar: 1 − σ'."""
        return 1.0 - self.sigma_x

    @property
    def v_surface(self) -> float:
        return self.u_surface / self.radius

    @property
    def v_plane(self) -> float:
        return 1.0 / self.radius

    def reversed(self) -> "BoundaryCircle":
        return replace(self, orientation=-self.orientation)


def caterpillar_point(boundary: BoundaryCircle, s: float, v: float) -> HyperbolicPoint3:
    """Point of the caterpillar over `boundary` at arclength s and parameter v.

    v runs from v_surface (on the Epstein surface) to v_plane = 1/ρ (on the
    dome over the circle).
    """
    lo, hi = sorted((boundary.v_surface, boundary.v_plane))
    slack = 1e-12 * max(abs(lo), abs(hi))
    if not (lo - slack <= v <= hi + slack):
        raise ValidationError(f"caterpillar parameter v={v:.6g} outside [{lo:.6g}, {hi:.6g}]")
    rho = boundary.radius
    e_phi = math.exp(boundary.phi)
    d = e_phi * e_phi + v * v
    radial = rho - 2.0 * v / d
    horizontal = boundary.center + radial * cmath.exp(1j * s / rho)
    return HyperbolicPoint3.of(horizontal, 2.0 * e_phi / d)


def _caterpillar_meridian(boundary: BoundaryCircle, u: float) -> Tuple[float, float, float, float]:
    """Scaled caterpillar meridian (X/ρ, T/ρ) and its u-derivatives, u = ρv."""
    e_s = math.exp(boundary.sigma)
    q = e_s * e_s + u * u
    x_t = 1.0 - 2.0 * u / q
    t_t = 2.0 * e_s / q
    dx_t = -2.0 * (q - 2.0 * u * u) / (q * q)
    dt_t = -4.0 * u * e_s / (q * q)
    return x_t, t_t, dx_t, dt_t


def caterpillar_half_h_integral(boundary: BoundaryCircle) -> float:
    """½∫_C H da over the caterpillar, unoriented.

    With H da = ½e^{−2φ}(2kv − v²) dv ds and k = 1/ρ this integrates to
    (π/2)e^{−2σ}(2/3 − u_s² + u_s³/3).
    """
    u = boundary.u_surface
    return 0.5 * math.pi * math.exp(-2.0 * boundary.sigma) * (2.0 / 3.0 - u * u + u ** 3 / 3.0)


def caterpillar_H_integral(boundary: BoundaryCircle) -> float:
    """−½∫_C H da with the orientation flag applied."""
    return -boundary.orientation * caterpillar_half_h_integral(boundary)


def caterpillar_H_integral_quadrature(boundary: BoundaryCircle, cfg: QuadratureConfig) -> float:
    """caterpillar_H_integral by 1D quadrature of the integrand in v."""
    rho = boundary.radius
    k = 1.0 / rho
    scale = 0.5 * math.exp(-2.0 * boundary.phi)
    inner = integrate_1d(lambda v: scale * (2.0 * k * v - v * v),
                         boundary.v_surface, boundary.v_plane, cfg)
    return -boundary.orientation * 0.5 * 2.0 * math.pi * rho * inner.value


def edge_length(boundary: BoundaryCircle) -> float:
    """Hyperbolic length 2π|sinh σ| of the lower caterpillar edge."""
    return 2.0 * math.pi * abs(math.sinh(boundary.sigma))


def edge_length_from_caterpillar(boundary: BoundaryCircle) -> float:
    """2π r_b/t_b evaluated on the caterpillar point at v = 1/ρ."""
    x_t, t_t, _, _ = _caterpillar_meridian(boundary, 1.0)
    return 2.0 * math.pi * abs(x_t) / t_t


def edge_term(exterior_angle: float, length: float) -> float:
    """¼·θ·ℓ for an edge of exterior angle θ ∈ (0, π] and length ℓ ≥ 0."""
    if not (0.0 < exterior_angle <= math.pi):
        raise ValidationError(f"exterior angle must lie in (0, π], got {exterior_angle}")
    if length < 0.0:
        raise ValidationError(f"edge length must be non-negative, got {length}")
    return 0.25 * exterior_angle * length


def boundary_term(boundary: BoundaryCircle, ledger: LedgerConvention = LedgerConvention.ITEMIZED) -> float:
    """Boundary items of one circle, unoriented.

    itemized:  b = ½∫_C H da + ¼θℓ
    invariant: b = ½∫_C H da + Vol(P)
    """
    half = caterpillar_half_h_integral(boundary)
    if LedgerConvention(ledger) is LedgerConvention.INVARIANT:
        return half + caterpillar_volume_exact(boundary)
    return half + edge_term(boundary.exterior_angle, edge_length(boundary))


def one_plus_h_term(boundary: BoundaryCircle) -> float:
    """(3/2)∫_C (1 + H) da = (3π/2)σ', unoriented."""
    return 1.5 * math.pi * boundary.sigma_x


def caterpillar_meeting_angle(boundary: BoundaryCircle) -> float:
    """Angle between the caterpillar and the dome over the circle at v = 1/ρ."""
    x_t, t_t, dx_t, dt_t = _caterpillar_meridian(boundary, 1.0)
    tangent_norm = math.hypot(dx_t, dt_t)
    dome_tangent = (-t_t, x_t)
    cosine = (dx_t * dome_tangent[0] + dt_t * dome_tangent[1]) / (tangent_norm * math.hypot(x_t, t_t))
    return math.acos(min(1.0, abs(cosine)))


def caterpillar_volume(boundary: BoundaryCircle, cfg: QuadratureConfig) -> float:
    """Signed volume of the caterpillar solid between the two domes.

    Cone formula π∫(X/T)² d log R along the caterpillar meridian from the
    Epstein surface to the dome over the circle.
    """

    def density(u: float) -> float:
        x_t, t_t, dx_t, dt_t = _caterpillar_meridian(boundary, u)
        rate = (x_t * dx_t + t_t * dt_t) / (x_t * x_t + t_t * t_t)
        return math.pi * (x_t / t_t) ** 2 * rate

    return integrate_1d(density, boundary.u_surface, 1.0, cfg).value


def caterpillar_volume_exact(boundary: BoundaryCircle) -> float:
    """caterpillar_volume in closed form.

    With p = σ', E = e^σ and N± = E² + (1 ± p)²:
        Vol(P) = (π/2)E^{−2}(p³/3 − (E² + 1)p) + (π/2) log(N₊/N₋)
    where the logarithm is log R − log ρ at the Epstein circle.
    """
    p = boundary.sigma_x
    inv = math.exp(-2.0 * boundary.sigma)
    polynomial = 0.5 * math.pi * (inv * (p ** 3 / 3.0 - p) - p)
    ratio = math.log1p(inv * (1.0 + p) ** 2) - math.log1p(inv * (1.0 - p) ** 2)
    return polynomial + 0.5 * math.pi * ratio


# ── Regions and reports ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class RegionSpec:
    """Annulus log ρ₁ ≤ log|z − c| ≤ log ρ₂ carrying a conformal metric."""

    metric: ConformalMetric
    log_rho1: float
    log_rho2: float
    euler_characteristic: int = 0
    orientations: Tuple[int, int] = (1, -1)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.log_rho1) and math.isfinite(self.log_rho2)):
            raise ValidationError("region radii must be positive and finite")
        if self.log_rho1 > self.log_rho2:
            raise ValidationError(
                f"region radii out of order: log ρ₁ = {self.log_rho1:.6g} > log ρ₂ = {self.log_rho2:.6g}"
            )
        if self.euler_characteristic != 0:
            raise ValidationError("an annulus has Euler characteristic 0")
        if any(o not in (1, -1) for o in self.orientations):
            raise ValidationError("orientation flags must be ±1")

    @classmethod
    def annulus(cls, metric: ConformalMetric, rho1: float, rho2: float, **kwargs) -> "RegionSpec":
        try:
            rho1, rho2 = float(rho1), float(rho2)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"radii must be numbers: {exc}") from exc
        if not (rho1 > 0.0 and rho2 > 0.0):
            raise ValidationError("annulus radii must be positive")
        return cls(metric, math.log(rho1), math.log(rho2), **kwargs)

    @property
    def rho1(self) -> float:
        return math.exp(self.log_rho1)

    @property
    def rho2(self) -> float:
        return math.exp(self.log_rho2)

    @property
    def is_degenerate(self) -> bool:
        return self.log_rho1 == self.log_rho2

    def split(self, log_rho: float) -> Tuple["RegionSpec", "RegionSpec"]:
        if not (self.log_rho1 < log_rho < self.log_rho2):
            raise ValidationError("split circle must lie strictly inside the annulus")
        return replace(self, log_rho2=log_rho), replace(self, log_rho1=log_rho)


@dataclass
class WVolumeReport:
    volume: float
    epstein_H_integral: float
    caterpillar_terms: List[float] = field(default_factory=list)
    edge_terms: List[float] = field(default_factory=list)
    total_W: float = 0.0
    error_estimate: float = 0.0
    route: str = VolumeRoute.SHELL.value
    depth: int = 0
    cells: int = 0
    boundary_log_radii: List[float] = field(default_factory=list)
    polyakov_correction: float = 0.0
    one_plus_h_terms: List[float] = field(default_factory=list)
    one_plus_h_included: bool = False
    caterpillar_volumes: List[float] = field(default_factory=list)
    ledger: str = LedgerConvention.INVARIANT.value

    @property
    def region_volume(self) -> float:
        """Vol(N(Ω, φ)): the shell volume with the caterpillar solids attached."""
        return self.volume - math.fsum(self.caterpillar_volumes)

    def invariant_W(self) -> float:
        total = (
            self.region_volume
            - self.epstein_H_integral
            - math.fsum(self.caterpillar_terms)
            + self.polyakov_correction
        )
        if self.one_plus_h_included:
            total -= math.fsum(self.one_plus_h_terms)
        return total

    def itemized_W(self) -> float:
        return self.invariant_W() + math.fsum(self.caterpillar_volumes) - math.fsum(self.edge_terms)

    def ledger_total(self, ledger: Optional[LedgerConvention] = None) -> float:
        ledger = LedgerConvention(ledger or self.ledger)
        if ledger is LedgerConvention.ITEMIZED:
            return self.itemized_W()
        return self.invariant_W()

    def with_ledger(self, ledger: LedgerConvention) -> "WVolumeReport":
        ledger = LedgerConvention(ledger)
        report = replace(self, ledger=ledger.value)
        report.total_W = report.ledger_total()
        return report

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA_VERSION,
            "route": self.route,
            "ledger": self.ledger,
            "volume": self.volume,
            "epstein_H_integral": self.epstein_H_integral,
            "caterpillar_terms": list(self.caterpillar_terms),
            "edge_terms": list(self.edge_terms),
            "polyakov_correction": self.polyakov_correction,
            "one_plus_h_terms": list(self.one_plus_h_terms),
            "one_plus_h_included": self.one_plus_h_included,
            "caterpillar_volumes": list(self.caterpillar_volumes),
            "boundary_log_radii": list(self.boundary_log_radii),
            "total_W": self.total_W,
            "error_estimate": self.error_estimate,
            "depth": self.depth,
            "cells": self.cells,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WVolumeReport":
        fields = {k: v for k, v in data.items() if k != "schema"}
        return cls(**fields)


def assemble_report(
    volume: float,
    h_integral: float,
    boundaries: Sequence[BoundaryCircle],
    error_estimate: float,
    route: VolumeRoute,
    depth: int = 0,
    cells: int = 0,
    polyakov_correction: float = 0.0,
    include_one_plus_h: bool = False,
    caterpillar_volumes: Optional[List[float]] = None,
    ledger: LedgerConvention = LedgerConvention.INVARIANT,
) -> WVolumeReport:
    """Itemise the boundary terms of `boundaries` and close the ledger.

    Caterpillar solids default to their closed form.
    """
    if caterpillar_volumes is None:
        caterpillar_volumes = [b.orientation * caterpillar_volume_exact(b) for b in boundaries]
    report = WVolumeReport(
        volume=volume,
        epstein_H_integral=h_integral,
        caterpillar_terms=[b.orientation * caterpillar_half_h_integral(b) for b in boundaries],
        edge_terms=[b.orientation * edge_term(b.exterior_angle, edge_length(b)) for b in boundaries],
        error_estimate=error_estimate,
        route=route.value,
        depth=depth,
        cells=cells,
        boundary_log_radii=[b.log_radius for b in boundaries],
        polyakov_correction=polyakov_correction,
        one_plus_h_terms=[b.orientation * one_plus_h_term(b) for b in boundaries],
        one_plus_h_included=include_one_plus_h,
        caterpillar_volumes=list(caterpillar_volumes),
        ledger=LedgerConvention(ledger).value,
    )
    report.total_W = report.ledger_total()
    return report


def _zero_report(region: RegionSpec, ledger: LedgerConvention) -> WVolumeReport:
    route = VolumeRoute.SHELL if region.metric.is_radial else VolumeRoute.CYLINDER
    return WVolumeReport(
        volume=0.0,
        epstein_H_integral=0.0,
        caterpillar_terms=[0.0, 0.0],
        edge_terms=[0.0, 0.0],
        route=route.value,
        boundary_log_radii=[region.log_rho1, region.log_rho2],
        one_plus_h_terms=[0.0, 0.0],
        caterpillar_volumes=[0.0, 0.0],
        ledger=LedgerConvention(ledger).value,
    )


# ── Shell route ─────────────────────────────────────────────────────────────

def _shell_w_volume(region: RegionSpec, cfg: QuadratureConfig, include_one_plus_h: bool,
                    ledger: LedgerConvention) -> WVolumeReport:
    metric = region.metric
    profile = metric.profile
    x1, x2 = region.log_rho1, region.log_rho2
    check_radial_embedding(profile, x1, x2)

    volume = integrate_1d(lambda x: cone_volume_density(profile, x), x1, x2, cfg)
    h_integral = integrate_1d(lambda x: math.pi * radial_forms(profile, x).h_density, x1, x2, cfg)

    boundaries = [
        BoundaryCircle.from_profile(metric, x1, region.orientations[0]),
        BoundaryCircle.from_profile(metric, x2, region.orientations[1]),
    ]
    cat_volumes = [b.orientation * caterpillar_volume(b, cfg) for b in boundaries]
    return assemble_report(
        volume=volume.value,
        h_integral=h_integral.value,
        boundaries=boundaries,
        error_estimate=volume.error + h_integral.error,
        route=VolumeRoute.SHELL,
        depth=max(volume.depth, h_integral.depth),
        cells=volume.cells + h_integral.cells,
        include_one_plus_h=include_one_plus_h,
        caterpillar_volumes=cat_volumes,
        ledger=ledger,
    )


# ── Cylinder route ──────────────────────────────────────────────────────────

def _point(metric: ConformalMetric, x: float, theta: float) -> complex:
    return metric.center + cmath.exp(complex(x, theta))


def _sigma_data(metric: ConformalMetric, x: float, theta: float) -> Tuple[float, float]:
    """(σ, ∂_xσ) at log-radius x and angle θ for a general metric."""
    zeta = cmath.exp(complex(x, theta))
    jet = liouville_jet(metric, metric.center + zeta)
    return jet.phi + x, 1.0 + 2.0 * (zeta * jet.phi_z).real


def boundary_from_samples(metric: ConformalMetric, x: float, orientation: int,
                          nodes: int) -> BoundaryCircle:
    """Boundary data of a general metric, required to be constant on the circle."""
    thetas = 2.0 * math.pi * np.arange(nodes) / nodes
    data = np.array([_sigma_data(metric, x, float(t)) for t in thetas])
    spread = np.ptp(data, axis=0)
    scale = 1.0 + np.abs(data).max(axis=0)
    if np.any(spread > BOUNDARY_DATA_TOL * scale):
        raise ValidationError(
            f"{metric.name}: boundary data is not rotationally constant on log ρ = {x:.6g}"
        )
    sigma, sigma_x = data.mean(axis=0)
    return BoundaryCircle(x, float(sigma), float(sigma_x), orientation, metric.center)


def _cylinder_volume_density(metric: ConformalMetric, x: float, theta: float) -> float:
    zeta = cmath.exp(complex(x, theta))
    z = metric.center + zeta
    point = epstein_point(metric, z)
    w = point.w - metric.center
    t = point.height
    dw_z, dw_zbar, dt_z, _ = epstein_differential(metric, z)
    w_x = zeta * dw_z + zeta.conjugate() * dw_zbar
    w_theta = 1j * (zeta * dw_z - zeta.conjugate() * dw_zbar)
    t_x = 2.0 * (zeta * dt_z).real
    t_theta = -2.0 * (zeta * dt_z).imag
    r2 = abs(w) ** 2 + t * t
    log_r_x = ((w.conjugate() * w_x).real + t * t_x) / r2
    log_r_theta = ((w.conjugate() * w_theta).real + t * t_theta) / r2
    jacobian = log_r_x * (w.conjugate() * w_theta).imag - log_r_theta * (w.conjugate() * w_x).imag
    return 0.5 * jacobian / (t * t)


def _check_cylinder_embedding(metric: ConformalMetric, x1: float, x2: float, nodes: int) -> None:
    signs = set()
    radial = max(9, EMBEDDING_SAMPLES // 16)
    for x in np.linspace(x1, x2, radial):
        for theta in 2.0 * np.pi * np.arange(nodes) / nodes:
            if _cylinder_volume_density(metric, float(x), float(theta)) < 0.0:
                logger.warning("Epstein map folds at log ρ=%.6g θ=%.4g", x, theta)
                raise NonEmbeddedSurfaceError(
                    f"{metric.name}: Epstein surface is not a graph over the domes at log ρ = {x:.6g}"
                )
            density = area_density_induced(metric, _point(metric, float(x), float(theta)))
            if density != 0.0:
                signs.add(density > 0.0)
    if len(signs) > 1:
        raise NonEmbeddedSurfaceError(f"{metric.name}: area density changes sign")


def _cylinder_w_volume(region: RegionSpec, cfg: QuadratureConfig, include_one_plus_h: bool,
                       ledger: LedgerConvention) -> WVolumeReport:
    metric = region.metric
    x1, x2 = region.log_rho1, region.log_rho2
    nodes = cfg.angular_nodes
    boundaries = [
        boundary_from_samples(metric, x1, region.orientations[0], nodes),
        boundary_from_samples(metric, x2, region.orientations[1], nodes),
    ]
    _check_cylinder_embedding(metric, x1, x2, nodes)

    def volume_slice(x: float, thetas: np.ndarray) -> np.ndarray:
        return np.array([_cylinder_volume_density(metric, x, float(t)) for t in thetas])

    def h_slice(x: float, thetas: np.ndarray) -> np.ndarray:
        scale = math.exp(2.0 * x)
        return np.array(
            [0.5 * h_area_density(metric, _point(metric, x, float(t))) * scale for t in thetas]
        )

    volume = integrate_cylinder(volume_slice, x1, x2, cfg)
    h_integral = integrate_cylinder(h_slice, x1, x2, cfg)
    cat_volumes = [b.orientation * caterpillar_volume(b, cfg) for b in boundaries]
    return assemble_report(
        volume=volume.value,
        h_integral=h_integral.value,
        boundaries=boundaries,
        error_estimate=volume.error + h_integral.error,
        route=VolumeRoute.CYLINDER,
        depth=max(volume.depth, h_integral.depth),
        cells=volume.cells + h_integral.cells,
        include_one_plus_h=include_one_plus_h,
        caterpillar_volumes=cat_volumes,
        ledger=ledger,
    )


def w_volume(region: RegionSpec, cfg: QuadratureConfig, include_one_plus_h: bool = False,
             ledger: LedgerConvention = LedgerConvention.INVARIANT) -> WVolumeReport:
    """Itemised W-volume of the region, by the shell or cylinder route.

    Every item is reported; `ledger` picks which of them total_W sums.
    """
    if region.is_degenerate:
        return _zero_report(region, ledger)
    metric = region.metric
    if metric.is_radial and metric.derivative_mode is DerivativeMode.ANALYTIC:
        report = _shell_w_volume(region, cfg, include_one_plus_h, ledger)
    else:
        report = _cylinder_w_volume(region, cfg, include_one_plus_h, ledger)
    logger.debug("%s: W=%.12g (±%.2g) on [%.6g, %.6g]", metric.name, report.total_W,
                 report.error_estimate, region.log_rho1, region.log_rho2)
    return report


# ── Polyakov variation ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class SurfaceField:
    """A smooth real field u(z) with optional analytic ∂u/∂z."""

    u: Callable[[complex], float]
    u_z: Optional[Callable[[complex], complex]] = None
    name: str = "field"
    fd_step: float = 1.0e-4

    def derivative(self, z: complex, scale: float) -> complex:
        if self.u_z is not None:
            return self.u_z(z)
        h = self.fd_step * scale
        u_x = (-self.u(z + 2 * h) + 8 * self.u(z + h) - 8 * self.u(z - h) + self.u(z - 2 * h)) / (12 * h)
        ih = 1j * h
        u_y = (-self.u(z + 2 * ih) + 8 * self.u(z + ih) - 8 * self.u(z - ih) + self.u(z - 2 * ih)) / (12 * h)
        return 0.5 * complex(u_x, -u_y)


Field = Union[RadialField, SurfaceField, float, int]


def _radial_polyakov(metric: ConformalMetric, u: RadialField, region: RegionSpec,
                     cfg: QuadratureConfig) -> QuadratureResult:
    profile = metric.profile
    x1, x2 = region.log_rho1, region.log_rho2

    # |∇u|² da = u'² dx dθ and 2K u da = −2σ''u dx dθ
    def density(x: float) -> float:
        du = u.du(x)
        return -0.5 * math.pi * (du * du - 2.0 * profile.sigma_xx(x) * u.u(x))

    interior = integrate_1d(density, x1, x2, cfg)
    # ∮ k u ds = 2π[u σ']_{x1}^{x2}
    boundary = -math.pi * (u.u(x2) * profile.sigma_x(x2) - u.u(x1) * profile.sigma_x(x1))
    return replace(interior, value=interior.value + boundary)


def _cylinder_polyakov(metric: ConformalMetric, u: SurfaceField, region: RegionSpec,
                       cfg: QuadratureConfig) -> QuadratureResult:
    x1, x2 = region.log_rho1, region.log_rho2
    c = metric.center

    def slice_values(x: float, thetas: np.ndarray) -> np.ndarray:
        values = []
        for theta in thetas:
            zeta = cmath.exp(complex(x, float(theta)))
            z = c + zeta
            jet = liouville_jet(metric, z)
            grad = abs(zeta * u.derivative(z, abs(zeta))) ** 2
            values.append(-0.25 * (4.0 * grad - 8.0 * jet.phi_zzbar * abs(zeta) ** 2 * u.u(z)))
        return np.array(values)

    interior = integrate_cylinder(slice_values, x1, x2, cfg)

    def boundary_mean(x: float) -> float:
        def ring(thetas: np.ndarray) -> np.ndarray:
            out = []
            for theta in thetas:
                _, sigma_x = _sigma_data(metric, x, float(theta))
                out.append(u.u(_point(metric, x, float(theta))) * sigma_x)
            return np.array(out)
        return 2.0 * math.pi * periodic_mean(ring, cfg.angular_nodes)

    boundary = -0.5 * (boundary_mean(x2) - boundary_mean(x1))
    return replace(interior, value=interior.value + boundary)


def polyakov_delta(metric: ConformalMetric, u: Field, region: RegionSpec,
                   cfg: QuadratureConfig) -> float:
    """Predicted W(e^{2u}g) − W(g) = −¼∫(|∇u|² + 2Ku)da − ½∮k u ds.

    K is the Gaussian curvature of g (2K its scalar curvature) and k the
    geodesic curvature of ∂Ω oriented as the boundary of Ω.
    """
    if region.is_degenerate:
        return 0.0
    if isinstance(u, (int, float)):
        u = RadialField.constant(float(u))
    if isinstance(u, RadialField):
        if metric.is_radial:
            return _radial_polyakov(metric, u, region, cfg).value
        radial = u
        c = metric.center
        u = SurfaceField(lambda z: radial.u(math.log(abs(z - c))),
                         lambda z: radial.du(math.log(abs(z - c))) / (2.0 * (z - c)),
                         name=radial.name)
    return _cylinder_polyakov(metric, u, region, cfg).value


def radial_w_closed_form(region: RegionSpec, cfg: QuadratureConfig) -> float:
    """Invariant W of a radial region: −(π/2)∫σ'² dx − (π/2)(x₂ − x₁)."""
    if not region.metric.is_radial:
        raise ValidationError(f"{region.metric.name}: the closed form needs a radial profile")
    if region.is_degenerate:
        return 0.0
    profile = region.metric.profile
    x1, x2 = region.log_rho1, region.log_rho2
    energy = integrate_1d(lambda x: profile.sigma_x(x) ** 2, x1, x2, cfg)
    return -0.5 * math.pi * (energy.value + (x2 - x1))


def _changed_region(region: RegionSpec, u: Field) -> RegionSpec:
    if isinstance(u, (int, float)):
        return replace(region, metric=region.metric.shifted(float(u)))
    return replace(region, metric=region.metric.with_radial_field(u))


def direct_delta(region: RegionSpec, u: Union[RadialField, float], cfg: QuadratureConfig,
                 ledger: LedgerConvention = LedgerConvention.INVARIANT) -> float:
    """W(e^{2u}g) − W(g) by two engine evaluations, run concurrently.

    A constant u rescales the metric; a surface that stops being embedded
    after the change raises NonEmbeddedSurfaceError naming the offset to use.
    """
    changed = _changed_region(region, u)
    with ThreadPoolExecutor(max_workers=2) as pool:
        base_future = pool.submit(w_volume, region, cfg, False, ledger)
        changed_future = pool.submit(w_volume, changed, cfg, False, ledger)
        base = base_future.result()
        try:
            after = changed_future.result()
        except NonEmbeddedSurfaceError as exc:
            logger.warning("%s: changed surface is not embedded", changed.metric.name)
            raise NonEmbeddedSurfaceError(
                f"{changed.metric.name}: Epstein surface of the changed metric is not embedded ({exc}); "
                "offset both metrics by a constant r (e^(2r)g) until the check passes, then compare"
            ) from exc
    return after.total_W - base.total_W


def rescale_identity_check(region: RegionSpec, r: float,
                           cfg: Optional[QuadratureConfig] = None) -> Tuple[float, float]:
    """(W(e^{2r}g) − W(g) from two engine runs, −rπχ(Ω))."""
    cfg = cfg or QuadratureConfig()
    lhs = direct_delta(region, float(r), cfg) if r != 0.0 else 0.0
    rhs = -r * math.pi * region.euler_characteristic
    return lhs, rhs
