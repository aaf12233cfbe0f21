"""
acceptance.py — Cross-Validation Suite
======================================

Eleven checks that tie the engines to their closed forms and oracles.  Each
check returns a CriterionResult row (measured value, target, pass flag,
details) so the CLI can print the suite as one table.

Checks are deterministic: random draws come from numpy Generators seeded
per check.  `AcceptanceOptions.quick()` shrinks sample counts for the unit
tests; the targets never change.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from adapted_correction import (
    collar_width,
    correction_max,
    epsilon1_expression,
    epsilon1_threshold,
    full_annulus_l1_report,
    qd_l1_on_sector,
    qd_l1_on_sector_quadrature,
    qd_linf_thick_bound,
    qd_linf_thick_sup,
    random_curve_system,
    thin_part_l1,
)
from constants import EPSILON_0, TUBE_DEFAULT_ELLS, TUBE_DEFAULT_EPS
from cusp_model import (
    LOG_RHO_MAX,
    CuspTruncation,
    boundary_term_x,
    cusp_metric,
    h_integral_x,
    renormalized_term,
    renormalized_term_eps,
    truncated_cusp_renvol,
    volume_x,
)
from epstein import epstein_flow_factor, epstein_point
from errors import WorkbenchError
from halfspace import MoebiusMap, RadialField, gaussian_curvature, hyp_distance, liouville_jet, moebius_extend
from numerics import schwarzian_derivative
from quadrature import QuadratureConfig
from tube_model import (
    TubeRoute,
    TubeSpec,
    tube_metric,
    tube_schwarzian_coefficient,
    tube_schwarzian_numeric,
    tube_study,
)
from wvolume import direct_delta, polyakov_delta, rescale_identity_check, w_volume

logger = logging.getLogger(__name__)


@dataclass
class CriterionResult:
    name: str
    value: float
    target: float
    passed: bool
    seconds: float = 0.0
    details: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "target": self.target,
            "passed": self.passed,
            "seconds": self.seconds,
            "details": self.details,
        }


@dataclass(frozen=True)
class AcceptanceOptions:
    cusp_truncations: int = 10
    schwarzian_points: int = 50
    moebius_maps: int = 20
    polyakov_fields: int = 5
    curve_systems: int = 100
    max_curves: int = 15
    curvature_grid: int = 1000
    tube_ells: tuple = TUBE_DEFAULT_ELLS
    seed: int = 20240611

    @classmethod
    def quick(cls) -> "AcceptanceOptions":
        return cls(
            cusp_truncations=3,
            schwarzian_points=10,
            moebius_maps=5,
            polyakov_fields=2,
            curve_systems=12,
            max_curves=10,
            curvature_grid=100,
        )


@dataclass
class AcceptanceReport:
    results: List[CriterionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def rows(self) -> List[dict]:
        return [
            {"name": r.name, "value": r.value, "target": r.target, "passed": r.passed, "seconds": r.seconds}
            for r in self.results
        ]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "criteria": [r.to_dict() for r in self.results]}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# ── 1-2. Cusp closed forms ──────────────────────────────────────────────────

def _random_truncations(rng: np.random.Generator, count: int) -> List[CuspTruncation]:
    lo = math.log(1e-6)
    out = []
    while len(out) < count:
        x1, x2 = sorted(rng.uniform(lo, LOG_RHO_MAX, size=2))
        if x2 - x1 > 1e-3:
            out.append(CuspTruncation(float(x1), float(x2)))
    return out


def check_cusp_h_integral(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    rng = np.random.default_rng(opts.seed + 1)
    worst = 0.0
    for truncation in _random_truncations(rng, opts.cusp_truncations):
        report = w_volume(truncation.region(), cfg)
        exact = h_integral_x(truncation.log_rho1, truncation.log_rho2)
        worst = max(worst, _rel(report.epstein_H_integral, exact))
    return CriterionResult("cusp-mean-curvature-integral", worst, 1e-6, worst <= 1e-6,
                           details={"truncations": opts.cusp_truncations})


def check_cusp_volume(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    rng = np.random.default_rng(opts.seed + 2)
    worst = 0.0
    for truncation in _random_truncations(rng, opts.cusp_truncations):
        report = w_volume(truncation.region(), cfg)
        worst = max(worst, _rel(report.volume, volume_x(truncation.log_rho1, truncation.log_rho2)))
    return CriterionResult("cusp-volume", worst, 1e-4, worst <= 1e-4,
                           details={"truncations": opts.cusp_truncations})


# ── 3. Renormalized cusp limit ──────────────────────────────────────────────

def check_cusp_renvol(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    result = truncated_cusp_renvol(cfg=cfg, strict=False)
    steps = [abs(d) for d in result.increments]
    cauchy = all(b < a for a, b in zip(steps, steps[1:]))
    outer = CuspTruncation.from_lengths(result.eps_bar, result.eps_bar).log_rho2
    form_gap = max(
        abs(renormalized_term(CuspTruncation(x, outer)) - renormalized_term_eps(CuspTruncation(x, outer)))
        for x in result.log_radii
    )
    order_gap = abs(result.rate.order - 1.0) / 1.0
    passed = cauchy and order_gap <= 0.2 and form_gap <= 1e-3
    return CriterionResult(
        "truncated-cusp-limit", order_gap, 0.2, passed,
        details={
            "order": result.rate.order,
            "limit_estimate": result.limit_estimate,
            "exact_limit": result.exact_limit,
            "cauchy": cauchy,
            "form_gap": form_gap,
        },
    )


# ── 4. Tube divergence ──────────────────────────────────────────────────────

def check_tube_divergence(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    study = tube_study(TUBE_DEFAULT_EPS, opts.tube_ells, cfg, TubeRoute.DIRECT, fit=False)
    ratio = study.residual_ratio()
    return CriterionResult(
        "tube-divergence-rate", ratio, 2.0, abs(ratio - 2.0) <= 0.6,
        details={"ells": study.ells, "residuals": study.residuals},
    )


# ── 5. Schwarzian ───────────────────────────────────────────────────────────

def _random_moebius(rng: np.random.Generator) -> MoebiusMap:
    a, b, c, d = rng.normal(size=4) + 1j * rng.normal(size=4)
    return MoebiusMap(a, b, c, d)


def check_schwarzian(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    rng = np.random.default_rng(opts.seed + 5)
    worst = 0.0
    for ell in (0.1, 1.0, 2.0 * math.pi):
        for _ in range(opts.schwarzian_points):
            z = complex(np.exp(rng.uniform(-1.0, 1.0)) * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi)))
            exact = tube_schwarzian_coefficient(ell, z)
            worst = max(worst, abs(tube_schwarzian_numeric(ell, z) - exact) / abs(exact))
    moebius_worst = 0.0
    for _ in range(opts.moebius_maps):
        m = _random_moebius(rng)
        pole = -m.d / m.c if m.c != 0 else None
        z = complex(rng.normal(), rng.normal())
        if pole is not None and abs(z - pole) < 1.0:
            z = pole + (z - pole) / max(abs(z - pole), 1e-12) * 1.5
        radius = 0.25 * abs(z - pole) if pole is not None else 0.5
        s = schwarzian_derivative(lambda w, m=m: (m.a * w + m.b) / (m.c * w + m.d), z, radius)
        moebius_worst = max(moebius_worst, abs(s))
    passed = worst <= 1e-6 and moebius_worst <= 1e-10
    return CriterionResult("schwarzian", worst, 1e-6, passed, details={"moebius_max": moebius_worst})


# ── 6. Polyakov variation ───────────────────────────────────────────────────

def _polyakov_fields(rng: np.random.Generator, count: int, x1: float, x2: float) -> List[RadialField]:
    """Interior bumps plus affine fields that are non-zero on both circles."""
    fields = []
    for _ in range(count):
        width = float(rng.uniform(1.5, 2.0))
        center = float(rng.uniform(x1 + width, x2 - width))
        amplitude = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.02, 0.1))
        fields.append(RadialField.bump(center, width, amplitude))
        fields.append(RadialField.affine(float(rng.uniform(-0.3, 0.3)), float(rng.uniform(-0.05, 0.05))))
    return fields


def check_polyakov(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    rng = np.random.default_rng(opts.seed + 6)
    region = CuspTruncation.from_radii(1e-4, 0.1).region()
    worst = 0.0
    for u in _polyakov_fields(rng, opts.polyakov_fields, region.log_rho1, region.log_rho2):
        predicted = polyakov_delta(region.metric, u, region, cfg)
        worst = max(worst, _rel(predicted, direct_delta(region, u, cfg)))
    constant_worst = 0.0
    for r in (0.25, 0.5, -0.3):
        lhs, rhs = rescale_identity_check(region, r, cfg)
        constant_worst = max(constant_worst, abs(lhs - rhs))
    passed = worst <= 1e-3 and constant_worst <= 1e-8
    return CriterionResult("polyakov", worst, 1e-3, passed, details={"constant_field_max": constant_worst})


# ── 7. Naturality and equidistant flow ──────────────────────────────────────

def check_naturality(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    rng = np.random.default_rng(opts.seed + 7)
    g = cusp_metric()
    worst = 0.0
    for _ in range(opts.moebius_maps):
        m = _random_moebius(rng)
        w = complex(np.exp(rng.uniform(-6.0, -2.0)) * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi)))
        z = m.inverse()(w)
        moved = moebius_extend(m, epstein_point(g.pullback(m), z))
        worst = max(worst, hyp_distance(moved, epstein_point(g, w)))
    factors = {r: epstein_flow_factor(g, 0.05 + 0.02j, r) for r in (0.5, 1.0, 2.0)}
    flow_gap = max(abs(f - 1.0) for f in factors.values())
    passed = worst <= 1e-9 and flow_gap <= 1e-6
    return CriterionResult(
        "moebius-naturality", worst, 1e-9, passed,
        details={"flow_factor": factors, "flow_gap": flow_gap},
    )


# ── 8. Curvature ────────────────────────────────────────────────────────────

def _curvature_deviation(metric, points) -> float:
    worst = 0.0
    for z in points:
        jet = liouville_jet(metric, z)
        from_jet = -4.0 * jet.phi_zzbar * math.exp(-2.0 * jet.phi)
        worst = max(worst, abs(gaussian_curvature(metric, z) + 1.0), abs(from_jet + 1.0))
    return worst


def _log_grid(lo: float, hi: float, count: int) -> np.ndarray:
    radial = max(2, int(round(math.sqrt(count / 10.0))))
    angular = max(1, count // radial)
    xs = np.linspace(lo, hi, radial)
    thetas = 2.0 * np.pi * (np.arange(angular) + 0.5) / angular
    return np.exp(xs[:, None] + 1j * thetas[None, :]).ravel()


def check_curvature(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    cusp = _curvature_deviation(cusp_metric(), _log_grid(math.log(1e-6), LOG_RHO_MAX, opts.curvature_grid))
    spec = TubeSpec(0.3, 1.0)
    margin = 1e-6 * abs(spec.log_inner)
    tube_points = _log_grid(spec.log_inner + margin, spec.log_outer - margin, opts.curvature_grid)
    tube = _curvature_deviation(tube_metric(spec), tube_points)
    worst = max(cusp, tube)
    return CriterionResult("curvature", worst, 1e-8, worst <= 1e-8, details={"cusp": cusp, "tube": tube})


# ── 9. Adapted correction ───────────────────────────────────────────────────

def check_adapted(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    mismatches = 0
    for k in range(opts.curve_systems):
        n = 3 + k % (opts.max_curves - 2)
        system = random_curve_system(opts.seed + 900 + k, n)
        exhaustive = correction_max(system, method="enumeration")
        pruned = correction_max(system, method="branch-and-bound", jobs=cfg.jobs)
        if exhaustive.value != pruned.value or exhaustive.families() != pruned.families():
            mismatches += 1
            logger.warning("curve system %d: enumeration and branch-and-bound disagree", k)

    ells = np.array([0.2, 0.1, 0.05, 0.02, 0.01])
    study = tube_study(TUBE_DEFAULT_EPS, ells, cfg, TubeRoute.POLYAKOV, fit=False)
    adapted = np.array(study.adapted_values)
    slope, intercept = np.polyfit(study.ells, adapted, 1)
    fit_residual = float(np.max(np.abs(adapted - (slope * np.array(study.ells) + intercept))))
    spread = float(adapted.max() - adapted.min())
    eps = TUBE_DEFAULT_EPS
    allowance = (abs(2.0 * math.pi ** 2 / eps + 2.0 * boundary_term_x(-2.0 * math.pi / eps))
                 + abs(slope) * float(ells.max() - ells.min()) + 2.0 * fit_residual)
    passed = mismatches == 0 and spread <= allowance
    return CriterionResult(
        "adapted-correction", float(mismatches), 0.0, passed,
        details={"systems": opts.curve_systems, "tube_spread": spread, "tube_allowance": allowance,
                 "tube_adapted": adapted.tolist()},
    )


# ── 10. Thresholds ──────────────────────────────────────────────────────────

def check_thresholds(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    eps1 = epsilon1_threshold(2)
    sign_change = epsilon1_expression(eps1 - 1e-6, 2) < 0.0 < epsilon1_expression(eps1 + 1e-6, 2)
    thresholds = {g: epsilon1_threshold(g) for g in range(2, 7)}
    below = all(v < EPSILON_0 for v in thresholds.values())
    collar_gap = abs(collar_width(EPSILON_0) - math.asinh(1.0))
    passed = sign_change and below and collar_gap <= 1e-12
    return CriterionResult(
        "thresholds", eps1, EPSILON_0, passed,
        details={"epsilon1": thresholds, "collar_gap": collar_gap, "sign_change": sign_change},
    )


# ── 11. Quadratic-differential norms ────────────────────────────────────────

def check_qd_norms(opts: AcceptanceOptions, cfg: QuadratureConfig) -> CriterionResult:
    sector_worst = 0.0
    for ell in (0.1, 0.5, 1.0):
        for theta_a, theta_b in ((0.0, math.pi), (0.3, 1.2), (1.0, 2.5)):
            exact = qd_l1_on_sector(ell, theta_a, theta_b)
            sector_worst = max(sector_worst, _rel(qd_l1_on_sector_quadrature(ell, theta_a, theta_b, cfg), exact))
    thin_worst = max(_rel(thin_part_l1(ell, theta), 4.0 * theta / (math.pi * ell))
                     for ell in (0.1, 0.5, 1.0) for theta in (0.2, 0.7, 1.5))
    grid = np.linspace(0.01, EPSILON_0, 50)
    linf_max = max(qd_linf_thick_bound(float(ell)) for ell in grid)
    oracle_worst = max(_rel(qd_linf_thick_sup(float(ell)), qd_linf_thick_bound(float(ell))) for ell in grid[::7])
    full = full_annulus_l1_report(0.5, cfg)
    passed = sector_worst <= 1e-8 and thin_worst <= 1e-14 and linf_max <= math.pi ** 2 and oracle_worst <= 1e-3
    return CriterionResult(
        "qd-norms", sector_worst, 1e-8, passed,
        details={"thin_part": thin_worst, "linf_max": linf_max, "linf_oracle": oracle_worst, "full_annulus": full},
    )


CRITERIA: List[Callable[[AcceptanceOptions, QuadratureConfig], CriterionResult]] = [
    check_cusp_h_integral,
    check_cusp_volume,
    check_cusp_renvol,
    check_tube_divergence,
    check_schwarzian,
    check_polyakov,
    check_naturality,
    check_curvature,
    check_adapted,
    check_thresholds,
    check_qd_norms,
]


def run_acceptance(cfg: Optional[QuadratureConfig] = None,
                   opts: Optional[AcceptanceOptions] = None) -> AcceptanceReport:
    """Run every criterion; a criterion that raises is recorded as failed."""
    cfg = cfg or QuadratureConfig()
    opts = opts or AcceptanceOptions()
    report = AcceptanceReport()
    for check in CRITERIA:
        started = time.perf_counter()
        try:
            result = check(opts, cfg)
        except WorkbenchError as exc:
            logger.error("%s failed: %s", check.__name__, exc)
            result = CriterionResult(check.__name__.replace("check_", ""), math.nan, math.nan, False,
                                     details={"error": str(exc), "error_type": type(exc).__name__})
        result.seconds = time.perf_counter() - started
        logger.info("%-30s %s (%.2fs)", result.name, "PASS" if result.passed else "FAIL", result.seconds)
        report.results.append(result)
    return report
