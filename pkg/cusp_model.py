"""
cusp_model.py — Hyperbolic Cusp Î₀ = |dz|²/(ρ² log² ρ)
======================================================

Closed forms for the Epstein surface of the cusp metric on the punctured
disk, its volume and mean-curvature integrals, the W-volume of a truncated
cusp, and the renormalized volume obtained by pushing the inner truncation
into the puncture.

In cylinder coordinates x = log ρ < 0 the cusp has σ = −log|x|, so every
quantity is a rational function of x plus the logarithmic correction

    c(ρ) = π log(1 + 2/x + 2/x²) − (π/2) log(1 + 4/x⁴)  ≈  2π/x.

Renormalization
───────────────
    s(ρ) = W(D_ρ^{ρ̄}) − (π/2) log ρ + b(ρ)  =  −(π/2)x̄ + c(ρ̄) + b(ρ̄) − c(ρ)

so the sequence converges like 1/|log ρ| and its limit is known exactly.
The ε-form W + π²/ε + b(ρ(ε)) is the same sequence, since π²/ε = −(π/2)x.
b(ρ) and s(ρ) use the itemized ledger.  In the invariant ledger the whole
W-volume is (π/2)(1/x₂ − 1/x₁) − (π/2)(x₂ − x₁).

Perturbed cusps h₀ = e^{2ν}Î₀ add the Polyakov variation of ν over each
truncated annulus; ν = O(|z|) keeps those integrals convergent.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from constants import (
    CUSP_DEFAULT_EPS_BAR,
    CUSP_RHO_MAX,
    CUSP_SCHEDULE_EXPONENTS,
    RATE_ORDER_TOL,
)
from epstein import area_density_induced
from errors import ConvergenceError, DomainError, NonEmbeddedSurfaceError, ValidationError
from halfspace import (
    AnnulusDomain,
    ConformalMetric,
    DerivativeMode,
    RadialProfile,
    radial_metric,
)
from numerics import RateFit, fit_remainder_order, linear_extrapolation, polynomial_extrapolation
from quadrature import QuadratureConfig
from wvolume import (
    BoundaryCircle,
    RegionSpec,
    SurfaceField,
    VolumeRoute,
    LedgerConvention,
    WVolumeReport,
    assemble_report,
    boundary_term,
    polyakov_delta,
    w_volume,
)

logger = logging.getLogger(__name__)

LOG_RHO_MAX = math.log(CUSP_RHO_MAX)
CUSP_PROFILE = RadialProfile(
    sigma=lambda x: -math.log(-x),
    sigma_x=lambda x: -1.0 / x,
    sigma_xx=lambda x: 1.0 / (x * x),
)


def _log_radius(rho: float) -> float:
    try:
        rho = float(rho)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"radius must be a number: {exc}") from exc
    if not (0.0 < rho < 1.0):
        raise DomainError(f"cusp radius must lie in (0, 1), got {rho}")
    return math.log(rho)


# ── ε ↔ ρ ───────────────────────────────────────────────────────────────────

def rho_from_eps(eps: float) -> float:
    """Radius e^{−2π/ε} of the horocycle of Î₀-length ε."""
    if eps <= 0.0:
        raise ValidationError("horocycle length must be positive")
    return math.exp(-2.0 * math.pi / eps)


def eps_from_rho(rho: float) -> float:
    """Î₀-length 2π/|log ρ| of the circle |z| = ρ."""
    return 2.0 * math.pi / abs(_log_radius(rho))


# ── Metric ──────────────────────────────────────────────────────────────────

def i0_liouville(z: complex) -> float:
    rho = abs(z)
    if not (0.0 < rho < 1.0):
        raise DomainError(f"Î₀ is defined on 0 < |z| < 1, got |z| = {rho}")
    return -math.log(abs(rho * math.log(rho)))


def i0_density(z: complex) -> float:
    """e^{2φ₀} = 1/(ρ² log² ρ)."""
    return math.exp(2.0 * i0_liouville(z))


def cusp_metric() -> ConformalMetric:
    """Î₀ on the punctured unit disk, with its analytic radial profile."""
    return radial_metric(CUSP_PROFILE, AnnulusDomain(0.0, 1.0), name="cusp")


def cusp_epstein_coords(rho: float):
    """(r₀, flipped, t₀) of the Epstein point over |z| = ρ.

    With A = log²ρ + 2 log ρ + 2 the point sits at radius |ρ(log²ρ − 2)/A|,
    on the opposite side of the axis when ρ ≤ e^{−√2}, at height −2ρ log ρ/A.
    """
    x = _log_radius(rho)
    a = x * x + 2.0 * x + 2.0
    return abs(rho * (x * x - 2.0) / a), x * x >= 2.0, -2.0 * rho * x / a


# ── Closed forms ────────────────────────────────────────────────────────────

def volume_correction_c(rho: float) -> float:
    return correction_c_x(_log_radius(rho))


def correction_c_x(x: float) -> float:
    return math.pi * math.log1p(2.0 / x + 2.0 / (x * x)) - 0.5 * math.pi * math.log1p(4.0 / x ** 4)


def h_integral_x(x1: float, x2: float) -> float:
    return math.pi / 12.0 * (x2 ** 3 - x1 ** 3)


def volume_x(x1: float, x2: float) -> float:
    return h_integral_x(x1, x2) - 0.5 * math.pi * (x2 - x1) + correction_c_x(x2) - correction_c_x(x1)


def _ordered(rho1: float, rho2: float):
    x1, x2 = _log_radius(rho1), _log_radius(rho2)
    if x1 > x2:
        raise ValidationError(f"cusp radii out of order: ρ₁ = {rho1} > ρ₂ = {rho2}")
    return x1, x2


def cusp_H_integral(rho1: float, rho2: float) -> float:
    """½∫H da over the surface between the two circles: (π/12)(log³ρ₂ − log³ρ₁)."""
    return h_integral_x(*_ordered(rho1, rho2))


def cusp_volume(rho1: float, rho2: float) -> float:
    """Volume between the domes through the Epstein boundary circles."""
    x1, x2 = _ordered(rho1, rho2)
    if x1 == x2:
        return 0.0
    return volume_x(x1, x2)


def cusp_boundary(x: float, orientation: int = 1) -> BoundaryCircle:
    return BoundaryCircle(x, -math.log(-x), -1.0 / x, orientation)


def boundary_term_x(x: float, ledger: LedgerConvention = LedgerConvention.ITEMIZED) -> float:
    return boundary_term(cusp_boundary(x), ledger)


def boundary_term_b(rho: float, ledger: LedgerConvention = LedgerConvention.ITEMIZED) -> float:
    """Exact b(ρ): caterpillar item plus edge item over |z| = ρ.

    The invariant ledger swaps the edge item for the caterpillar solid, which
    leaves b = O(1/log ρ).
    """
    x = _log_radius(rho)
    if x >= LOG_RHO_MAX:
        raise DomainError(f"b(ρ) needs ρ < e^(−√2), got {rho}")
    return boundary_term_x(x, ledger)


def boundary_term_asymptote(rho: float) -> float:
    """Leading part −(π²/8 + π/2) log ρ of b(ρ)."""
    return -(math.pi ** 2 / 8.0 + 0.5 * math.pi) * _log_radius(rho)


def boundary_term_asymptote_eps(eps: float) -> float:
    """Leading part π³/(4ε) + π²/ε of b(ρ(ε))."""
    return math.pi ** 3 / (4.0 * eps) + math.pi ** 2 / eps


# ── Truncations ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CuspTruncation:
    """D_{ρ₁}^{ρ₂}: the annulus ρ₁ ≤ |z| ≤ ρ₂ stored by log-radii."""

    log_rho1: float
    log_rho2: float

    def __post_init__(self) -> None:
        if not (self.log_rho1 <= self.log_rho2 < LOG_RHO_MAX):
            raise ValidationError(
                "cusp truncation needs 0 < ρ₁ ≤ ρ₂ < e^(−√2), got "
                f"log radii ({self.log_rho1:.6g}, {self.log_rho2:.6g})"
            )

    @classmethod
    def from_radii(cls, rho1: float, rho2: float) -> "CuspTruncation":
        return cls(_log_radius(rho1), _log_radius(rho2))

    @classmethod
    def from_lengths(cls, eps: float, eps_bar: float) -> "CuspTruncation":
        """Horocycle lengths ε ≤ ε̄ of the inner and outer circles."""
        if not (0.0 < eps <= eps_bar):
            raise ValidationError("horocycle lengths need 0 < ε ≤ ε̄")
        return cls(-2.0 * math.pi / eps, -2.0 * math.pi / eps_bar)

    @property
    def rho1(self) -> float:
        return math.exp(self.log_rho1)

    @property
    def rho2(self) -> float:
        return math.exp(self.log_rho2)

    @property
    def eps(self) -> float:
        return 2.0 * math.pi / abs(self.log_rho1)

    @property
    def eps_bar(self) -> float:
        return 2.0 * math.pi / abs(self.log_rho2)

    def region(self) -> RegionSpec:
        return RegionSpec(cusp_metric(), self.log_rho1, self.log_rho2)


def invariant_w_x(x1: float, x2: float) -> float:
    """Invariant-ledger W of the cusp annulus: (π/2)(1/x₂ − 1/x₁) − (π/2)(x₂ − x₁)."""
    if x1 == x2:
        return 0.0
    return 0.5 * math.pi * (1.0 / x2 - 1.0 / x1) - 0.5 * math.pi * (x2 - x1)


def cusp_w_volume_for(truncation: CuspTruncation,
                      ledger: LedgerConvention = LedgerConvention.INVARIANT) -> WVolumeReport:
    """Itemised W-volume from the closed forms and exact boundary items."""
    x1, x2 = truncation.log_rho1, truncation.log_rho2
    if x1 == x2:
        return w_volume(truncation.region(), QuadratureConfig(), ledger=ledger)
    return assemble_report(
        volume=volume_x(x1, x2),
        h_integral=h_integral_x(x1, x2),
        boundaries=[cusp_boundary(x1, 1), cusp_boundary(x2, -1)],
        error_estimate=0.0,
        route=VolumeRoute.CLOSED_FORM,
        ledger=ledger,
    )


def cusp_w_volume(rho1: float, rho2: float,
                  ledger: LedgerConvention = LedgerConvention.INVARIANT) -> WVolumeReport:
    return cusp_w_volume_for(CuspTruncation.from_radii(rho1, rho2), ledger)


def renormalized_term(truncation: CuspTruncation, report: Optional[WVolumeReport] = None) -> float:
    """W(D_ρ^{ρ̄}) − (π/2) log ρ + b(ρ) for the inner radius ρ, itemized ledger."""
    report = report or cusp_w_volume_for(truncation)
    x = truncation.log_rho1
    return report.itemized_W() - 0.5 * math.pi * x + boundary_term_x(x)


def renormalized_term_eps(truncation: CuspTruncation) -> float:
    """W + π²/ε + b(ρ(ε)) with ε the inner horocycle length."""
    report = cusp_w_volume_for(truncation)
    return report.itemized_W() + math.pi ** 2 / truncation.eps + boundary_term_x(truncation.log_rho1)


def truncated_cusp_renvol_exact(eps_bar: float) -> float:
    """Closed-form limit −(π/2)x̄ + c(ρ̄) + b(ρ̄) of the renormalized sequence."""
    x_bar = CuspTruncation.from_lengths(eps_bar, eps_bar).log_rho2
    return -0.5 * math.pi * x_bar + correction_c_x(x_bar) + boundary_term_x(x_bar)


# ── Limit sequences ─────────────────────────────────────────────────────────

def default_schedule() -> List[float]:
    return [10.0 ** (-k) for k in CUSP_SCHEDULE_EXPONENTS]


@dataclass
class RenvolResult:
    """Renormalized-volume limit with its convergence diagnostics."""

    eps_bar: float
    limit_estimate: float
    last_term: float
    linear_extrapolant: float
    rate: RateFit
    log_radii: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    exact_limit: Optional[float] = None
    converged: bool = True

    @property
    def increments(self) -> List[float]:
        return [b - a for a, b in zip(self.values, self.values[1:])]

    def rows(self) -> List[dict]:
        return [
            {"log_rho": x, "h": 1.0 / abs(x), "value": v}
            for x, v in zip(self.log_radii, self.values)
        ]

    def to_dict(self) -> dict:
        return {
            "eps_bar": self.eps_bar,
            "limit_estimate": self.limit_estimate,
            "last_term": self.last_term,
            "linear_extrapolant": self.linear_extrapolant,
            "rate": self.rate.to_dict(),
            "exact_limit": self.exact_limit,
            "converged": self.converged,
            "sequence": self.rows(),
        }


def _schedule_log_radii(schedule: Optional[Sequence[float]], x_bar: float) -> List[float]:
    radii = list(schedule) if schedule is not None else default_schedule()
    xs = sorted((_log_radius(r) for r in radii), reverse=True)
    if any(x >= x_bar for x in xs):
        raise ValidationError("every schedule radius must lie strictly inside ρ(ε̄)")
    return xs


def _fit_sequence(eps_bar: float, xs: List[float], values: List[float],
                  exact: Optional[float], strict: bool = True) -> RenvolResult:
    h = [1.0 / abs(x) for x in xs]
    rate = fit_remainder_order(h, values)
    converged = abs(rate.order - 1.0) <= RATE_ORDER_TOL
    if not converged:
        message = f"renormalized sequence converges with order {rate.order:.3f} in 1/|log ρ|, expected 1"
        if strict:
            raise ConvergenceError(message)
        logger.warning(message)
    result = RenvolResult(
        eps_bar=eps_bar,
        limit_estimate=polynomial_extrapolation(h, values),
        last_term=values[-1],
        linear_extrapolant=linear_extrapolation(h, values),
        rate=rate,
        log_radii=xs,
        values=values,
        exact_limit=exact,
        converged=converged,
    )
    logger.debug("renormalized limit ε̄=%g: %.12g (order %.3f)", eps_bar, result.limit_estimate, rate.order)
    return result


def truncated_cusp_renvol(
    eps_bar: float = CUSP_DEFAULT_EPS_BAR,
    schedule: Optional[Sequence[float]] = None,
    cfg: Optional[QuadratureConfig] = None,
    route: VolumeRoute = VolumeRoute.CLOSED_FORM,
    strict: bool = True,
) -> RenvolResult:
    """Limit of W(D_ρ^{ρ̄}) − (π/2) log ρ + b(ρ) as ρ → 0, with ρ̄ = ρ(ε̄).

    `route` selects closed forms or the shell quadrature of the engine for W;
    schedule points run in parallel when cfg.jobs > 1.
    """
    cfg = cfg or QuadratureConfig()
    outer = CuspTruncation.from_lengths(eps_bar, eps_bar).log_rho2
    xs = _schedule_log_radii(schedule, outer)

    def term(x: float) -> float:
        truncation = CuspTruncation(x, outer)
        if route is VolumeRoute.CLOSED_FORM:
            return renormalized_term(truncation)
        return renormalized_term(truncation, w_volume(truncation.region(), cfg))

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            values = list(pool.map(term, xs))
    else:
        values = [term(x) for x in xs]
    return _fit_sequence(eps_bar, xs, values, truncated_cusp_renvol_exact(eps_bar), strict)


# ── Perturbations ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CuspPerturbation:
    """Holomorphic ψ with ψ(0) = 0, given with ψ' and ψ''.

    The perturbed cusp is h₀ = e^{2ν}Î₀ with
        ν(z) = log|1 + zψ'(z)| − log(1 + Re ψ(z)/log|z|).
    """

    psi: Callable[[complex], complex]
    dpsi: Callable[[complex], complex]
    d2psi: Callable[[complex], complex]
    name: str = "psi"

    def __post_init__(self) -> None:
        if abs(self.psi(0j)) > 1e-14:
            raise ValidationError(f"{self.name}: ψ(0) must vanish")

    @classmethod
    def zero(cls) -> "CuspPerturbation":
        return cls(lambda z: 0j, lambda z: 0j, lambda z: 0j, name="zero")

    @classmethod
    def linear(cls, a: complex) -> "CuspPerturbation":
        return cls(lambda z: a * z, lambda z: a + 0j, lambda z: 0j, name=f"linear({a})")

    def nu(self, z: complex) -> float:
        return perturbation_nu(self, z)

    def nu_z(self, z: complex) -> complex:
        dpsi = self.dpsi(z)
        grow = (dpsi + z * self.d2psi(z)) / (1.0 + z * dpsi)
        log_rho = math.log(abs(z))
        h = 1.0 + self.psi(z).real / log_rho
        dh = (0.5 * dpsi * log_rho - self.psi(z).real / (2.0 * z)) / (log_rho * log_rho)
        return 0.5 * grow - dh / h

    def field(self) -> SurfaceField:
        return SurfaceField(self.nu, self.nu_z, name=f"nu[{self.name}]")

    def vanishing_ratio(self, radii: Sequence[float] = (1e-3, 1e-4, 1e-5, 1e-6), angles: int = 8) -> float:
        """max |ν(z)|/|z| over sampled small circles."""
        worst = 0.0
        for r in radii:
            for k in range(angles):
                z = r * complex(math.cos(2 * math.pi * k / angles), math.sin(2 * math.pi * k / angles))
                worst = max(worst, abs(self.nu(z)) / r)
        return worst


def perturbation_nu(pert: CuspPerturbation, z: complex) -> float:
    rho = abs(z)
    if not (0.0 < rho < 1.0):
        raise DomainError(f"ν is defined on 0 < |z| < 1, got |z| = {rho}")
    denominator = 1.0 + pert.psi(z).real / math.log(rho)
    stretch = abs(1.0 + z * pert.dpsi(z))
    if denominator <= 0.0 or stretch == 0.0:
        raise ValidationError(f"{pert.name}: perturbation too large at z = {z!r}")
    return math.log(stretch) - math.log(denominator)


def perturbed_cusp_metric(pert: CuspPerturbation) -> ConformalMetric:
    """e^{2ν}Î₀ with finite-difference jets."""
    return ConformalMetric(
        liouville=lambda z: i0_liouville(z) + perturbation_nu(pert, z),
        domain=AnnulusDomain(0.0, 1.0),
        derivative_mode=DerivativeMode.FINITE_DIFFERENCE,
        name=f"cusp*{pert.name}",
    )


def check_perturbed_embedding(pert: CuspPerturbation, x1: float, x2: float,
                              radial: int = 17, angular: int = 16) -> None:
    """Sampled check that the perturbed surface keeps the cusp's area-density sign."""
    metric = perturbed_cusp_metric(pert)
    for x in np.linspace(x1, x2, radial):
        for k in range(angular):
            z = complex(math.cos(2 * math.pi * k / angular), math.sin(2 * math.pi * k / angular)) * math.exp(x)
            if area_density_induced(metric, z) >= 0.0:
                logger.warning("%s: area density changes sign at z=%r", metric.name, z)
                raise NonEmbeddedSurfaceError(
                    f"{metric.name}: perturbation too large, Epstein surface degenerates near |z| = {abs(z):.3g}"
                )


def perturbed_cusp_renvol(
    pert: CuspPerturbation,
    eps_bar: float = CUSP_DEFAULT_EPS_BAR,
    schedule: Optional[Sequence[float]] = None,
    cfg: Optional[QuadratureConfig] = None,
    strict: bool = True,
) -> RenvolResult:
    """Renormalized volume of e^{2ν}Î₀ truncated at ρ(ε̄).

    Each schedule term is the unperturbed renormalized term plus the Polyakov
    variation of ν over the same annulus; boundary items stay those of Î₀.
    """
    cfg = cfg or QuadratureConfig()
    outer = CuspTruncation.from_lengths(eps_bar, eps_bar).log_rho2
    xs = _schedule_log_radii(schedule, outer)
    check_perturbed_embedding(pert, xs[-1], outer)
    base = cusp_metric()
    nu = pert.field()

    def term(x: float) -> float:
        truncation = CuspTruncation(x, outer)
        return renormalized_term(truncation) + polyakov_delta(base, nu, truncation.region(), cfg)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            values = list(pool.map(term, xs))
    else:
        values = [term(x) for x in xs]
    return _fit_sequence(eps_bar, xs, values, None, strict)
