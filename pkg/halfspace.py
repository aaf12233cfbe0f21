"""
halfspace.py — Upper Half-Space Model and Conformal Metrics
===========================================================

Foundational types shared by every other module:

  ComplexPoint       point of ℂ ⊂ ℂP¹ with polar accessors
  HyperbolicPoint3   point (w, t) of H³, t > 0
  PointAtInfinity    the point ∞ of ℂP¹, returned at Möbius poles
  MoebiusMap         element of SL(2, ℂ), normalised on construction
  AnnulusDomain      ρ_in ≤ |z − c| ≤ ρ_out, optionally cut to an angular sector
  RadialProfile      σ(x) = φ(c + e^{x+iθ}) + x for rotationally symmetric metrics
  ConformalMetric    g = e^{2φ}|dz|² with analytic or finite-difference jets

Conventions
───────────
• Complex derivatives: φ_z = ½(φ_x − iφ_y), φ_zz̄ = ¼Δφ, ∇φ = φ_x + iφ_y = 2φ_z̄.
• Rotationally symmetric metrics are stored in cylinder coordinates
  x = log|z − c|, where g = e^{2σ}(dx² + dθ²).  All radial quantities are
  functions of (σ, σ', σ'') only, so radii like e^{−1000} never need to be
  represented as floats.
• The Liouville field is assumed to extend smoothly a little past the closed
  domain; finite-difference stencils may sample there.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np

from constants import FD_ORDER, FD_RELATIVE_STEP, MOEBIUS_DET_TOL
from errors import DomainError, ValidationError
from numerics import central_weights

logger = logging.getLogger(__name__)


# ── Points ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ComplexPoint:
    re: float
    im: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValidationError("complex point components must be finite")

    @classmethod
    def from_complex(cls, value: complex) -> "ComplexPoint":
        return cls(float(value.real), float(value.imag))

    @classmethod
    def polar(cls, rho: float, theta: float) -> "ComplexPoint":
        return cls.from_complex(cmath.rect(rho, theta))

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def rho(self) -> float:
        return abs(self.value)

    @property
    def theta(self) -> float:
        """Argument in [0, 2π); undefined (DomainError) at the origin."""
        if self.re == 0.0 and self.im == 0.0:
            raise DomainError("polar angle undefined at z = 0")
        return math.atan2(self.im, self.re) % (2.0 * math.pi)


class PointAtInfinity:
    """The point ∞ of ℂP¹.  Use the module-level INFINITY instance."""

    _instance: Optional["PointAtInfinity"] = None

    def __new__(cls) -> "PointAtInfinity":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"


INFINITY = PointAtInfinity()

BoundaryPoint = Union[ComplexPoint, PointAtInfinity]
PointLike = Union[ComplexPoint, complex, float]


def as_complex(z: PointLike) -> complex:
    if isinstance(z, ComplexPoint):
        return z.value
    if isinstance(z, PointAtInfinity):
        raise DomainError("point at infinity has no finite coordinate")
    return complex(z)


@dataclass(frozen=True)
class HyperbolicPoint3:
    horizontal: ComplexPoint
    height: float

    def __post_init__(self) -> None:
        if not (self.height > 0.0 and math.isfinite(self.height)):
            raise ValidationError(f"height must be positive and finite, got {self.height!r}")

    @classmethod
    def of(cls, w: complex, t: float) -> "HyperbolicPoint3":
        return cls(ComplexPoint.from_complex(complex(w)), float(t))

    @property
    def w(self) -> complex:
        return self.horizontal.value

    def to_dict(self) -> dict:
        return {"re": self.horizontal.re, "im": self.horizontal.im, "height": self.height}


def hyp_distance(p: HyperbolicPoint3, q: HyperbolicPoint3) -> float:
    """Hyperbolic distance in H³.

    Evaluated as d = 2·arsinh(|p − q|_E / (2√(t_p t_q))), which is the same
    as cosh d = 1 + |p − q|²_E/(2 t_p t_q) without the cancellation near 0.
    """
    dw = p.w - q.w
    dt = p.height - q.height
    chord = math.hypot(abs(dw), dt)
    return 2.0 * math.asinh(chord / (2.0 * math.sqrt(p.height * q.height)))


# ── Möbius maps ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MoebiusMap:
    """z ↦ (az + b)/(cz + d), normalised so that ad − bc = 1."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self) -> None:
        a, b, c, d = (complex(v) for v in (self.a, self.b, self.c, self.d))
        det = a * d - b * c
        if abs(det) < MOEBIUS_DET_TOL:
            raise ValidationError("Möbius coefficients are singular (ad − bc = 0)")
        s = cmath.sqrt(det)
        object.__setattr__(self, "a", a / s)
        object.__setattr__(self, "b", b / s)
        object.__setattr__(self, "c", c / s)
        object.__setattr__(self, "d", d / s)

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1, 0, 0, 1)

    @classmethod
    def dilation(cls, k: complex) -> "MoebiusMap":
        return cls(k, 0, 0, 1)

    @classmethod
    def translation(cls, b: complex) -> "MoebiusMap":
        return cls(1, b, 0, 1)

    @classmethod
    def from_points(cls, z1: complex, z2: complex, z3: complex) -> "MoebiusMap":
        """The map sending z1, z2, z3 to 0, 1, ∞."""
        return cls(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        """self ∘ other."""
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    @property
    def pole(self) -> BoundaryPoint:
        if self.c == 0:
            return INFINITY
        return ComplexPoint.from_complex(-self.d / self.c)

    def derivative(self, z: complex) -> complex:
        return 1.0 / (self.c * z + self.d) ** 2

    def __call__(self, z: complex) -> complex:
        return (self.a * z + self.b) / (self.c * z + self.d)


def moebius_apply(m: MoebiusMap, z: Union[BoundaryPoint, complex]) -> BoundaryPoint:
    """Boundary action on ℂP¹; the pole maps to INFINITY and ∞ maps to a/c."""
    if isinstance(z, PointAtInfinity):
        if m.c == 0:
            return INFINITY
        return ComplexPoint.from_complex(m.a / m.c)
    w = as_complex(z)
    denominator = m.c * w + m.d
    if denominator == 0:
        return INFINITY
    return ComplexPoint.from_complex((m.a * w + m.b) / denominator)


def moebius_extend(m: MoebiusMap, p: HyperbolicPoint3) -> HyperbolicPoint3:
    """Poincaré extension of m to H³ (an isometry)."""
    w, t = p.w, p.height
    cw_d = m.c * w + m.d
    norm = abs(cw_d) ** 2 + abs(m.c) ** 2 * t * t
    horizontal = ((m.a * w + m.b) * cw_d.conjugate() + m.a * m.c.conjugate() * t * t) / norm
    return HyperbolicPoint3.of(horizontal, t / norm)


# ── Domains ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class AnnulusDomain:
    """ρ_in ≤ |z − center| ≤ ρ_out, optionally restricted to θ_a ≤ arg ≤ θ_b."""

    inner: float
    outer: float
    center: complex = 0j
    sector: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        if not (self.inner >= 0.0 and self.outer > 0.0 and self.inner <= self.outer):
            raise ValidationError(
                f"annulus radii must satisfy 0 ≤ inner ≤ outer, got ({self.inner}, {self.outer})"
            )
        if self.sector is not None:
            lo, hi = self.sector
            if not (0.0 <= lo < hi <= 2.0 * math.pi):
                raise ValidationError(f"sector must satisfy 0 ≤ θ_a < θ_b ≤ 2π, got {self.sector}")

    @classmethod
    def half_plane_sector(cls, inner: float, outer: float, theta_a: float = 0.0,
                          theta_b: float = math.pi) -> "AnnulusDomain":
        return cls(inner, outer, 0j, (theta_a, theta_b))

    def contains(self, z: complex) -> bool:
        r = abs(z - self.center)
        if r == 0.0 or not (self.inner <= r <= self.outer):
            return False
        if self.sector is None:
            return True
        angle = cmath.phase(z - self.center) % (2.0 * math.pi)
        return self.sector[0] <= angle <= self.sector[1]

    def log_radii(self) -> Tuple[float, float]:
        if self.inner <= 0.0:
            raise DomainError("punctured annulus has no finite inner log-radius")
        return math.log(self.inner), math.log(self.outer)


# ── Fields ──────────────────────────────────────────────────────────────────

class DerivativeMode(str, Enum):
    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class LiouvilleJet:
    """(φ, φ_z, φ_zz, φ_zz̄) at one point."""

    phi: float
    phi_z: complex
    phi_zz: complex
    phi_zzbar: float

    @property
    def gradient(self) -> complex:
        """∇φ = φ_x + iφ_y = 2·conj(φ_z)."""
        return 2.0 * self.phi_z.conjugate()

    @property
    def q(self) -> complex:
        """Coefficient of dz² in the second form at infinity: φ_zz − φ_z²."""
        return self.phi_zz - self.phi_z * self.phi_z

    def as_tuple(self) -> Tuple[float, complex, complex, float]:
        return self.phi, self.phi_z, self.phi_zz, self.phi_zzbar


@dataclass(frozen=True)
class RadialField:
    """A smooth function u(x) of x = log ρ with its first two derivatives."""

    u: Callable[[float], float]
    du: Callable[[float], float]
    d2u: Callable[[float], float]
    name: str = "field"

    @classmethod
    def constant(cls, r: float) -> "RadialField":
        return cls(lambda x: r, lambda x: 0.0, lambda x: 0.0, name=f"const({r:g})")

    @classmethod
    def affine(cls, offset: float, slope: float) -> "RadialField":
        """offset + slope·x."""
        return cls(lambda x: offset + slope * x, lambda x: slope, lambda x: 0.0,
                   name=f"affine({offset:g},{slope:g})")

    @classmethod
    def bump(cls, center: float, width: float, amplitude: float) -> "RadialField":
        """amplitude·(1 − s²)³ with s = (x − center)/width, zero outside |s| < 1.

        The bump is C² with u, u', u'' vanishing at both ends of its support.
        """
        if width <= 0.0:
            raise ValidationError("bump width must be positive")

        def u(x: float) -> float:
            s = (x - center) / width
            return amplitude * (1.0 - s * s) ** 3 if abs(s) < 1.0 else 0.0

        def du(x: float) -> float:
            s = (x - center) / width
            return -6.0 * amplitude * s * (1.0 - s * s) ** 2 / width if abs(s) < 1.0 else 0.0

        def d2u(x: float) -> float:
            s = (x - center) / width
            if abs(s) >= 1.0:
                return 0.0
            t = 1.0 - s * s
            return amplitude * (-6.0 * t * t + 24.0 * s * s * t) / (width * width)

        return cls(u, du, d2u, name=f"bump({center:g},{width:g},{amplitude:g})")

    def __call__(self, x: float) -> float:
        return self.u(x)


@dataclass(frozen=True)
class RadialProfile:
    """σ(x) = φ + x in cylinder coordinates, with σ' and σ''."""

    sigma: Callable[[float], float]
    sigma_x: Callable[[float], float]
    sigma_xx: Callable[[float], float]

    def jet(self, x: float) -> Tuple[float, float, float]:
        return self.sigma(x), self.sigma_x(x), self.sigma_xx(x)

    def shifted(self, r: float) -> "RadialProfile":
        s = self.sigma
        return RadialProfile(lambda x: s(x) + r, self.sigma_x, self.sigma_xx)

    def plus(self, f: RadialField) -> "RadialProfile":
        s, s1, s2 = self.sigma, self.sigma_x, self.sigma_xx
        return RadialProfile(
            lambda x: s(x) + f.u(x),
            lambda x: s1(x) + f.du(x),
            lambda x: s2(x) + f.d2u(x),
        )


def profile_jet(profile: RadialProfile, zc: complex) -> LiouvilleJet:
    """Cartesian 2-jet of φ = σ(log|zc|) − log|zc| at zc = z − center."""
    x = math.log(abs(zc))
    s, s1, s2 = profile.jet(x)
    m = s1 - 1.0
    return LiouvilleJet(
        phi=s - x,
        phi_z=m / (2.0 * zc),
        phi_zz=(0.25 * s2 - 0.5 * m) / (zc * zc),
        phi_zzbar=0.25 * s2 / abs(zc) ** 2,
    )


def finite_difference_jet(
    func: Callable[[complex], float],
    z: complex,
    step: float,
    order: int = FD_ORDER,
) -> LiouvilleJet:
    """Central-difference 2-jet of a real field on ℂ."""
    off1, w1 = central_weights(1, order)
    off2, w2 = central_weights(2, order)
    centre = func(z)

    def sample(dx: float, dy: float) -> float:
        if dx == 0 and dy == 0:
            return centre
        return func(z + complex(dx, dy) * step)

    phi_x = math.fsum(w * sample(o, 0) for o, w in zip(off1, w1) if w) / step
    phi_y = math.fsum(w * sample(0, o) for o, w in zip(off1, w1) if w) / step
    phi_xx = math.fsum(w * sample(o, 0) for o, w in zip(off2, w2) if w) / step ** 2
    phi_yy = math.fsum(w * sample(0, o) for o, w in zip(off2, w2) if w) / step ** 2
    phi_xy = math.fsum(
        wi * wj * sample(oi, oj)
        for oi, wi in zip(off1, w1) if wi
        for oj, wj in zip(off1, w1) if wj
    ) / step ** 2
    return LiouvilleJet(
        phi=centre,
        phi_z=0.5 * complex(phi_x, -phi_y),
        phi_zz=0.25 * complex(phi_xx - phi_yy, -2.0 * phi_xy),
        phi_zzbar=0.25 * (phi_xx + phi_yy),
    )


# ── Conformal metrics ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class ConformalMetric:
    """g = e^{2φ}|dz|² on a domain.

    Derivatives come from, in order of preference: an analytic `jet`
    callback, a radial `profile`, or central finite differences of
    `liouville`.  `fd_step` overrides the relative finite-difference step.
    """

    liouville: Callable[[complex], float]
    domain: Optional[AnnulusDomain] = None
    jet: Optional[Callable[[complex], LiouvilleJet]] = None
    profile: Optional[RadialProfile] = None
    derivative_mode: DerivativeMode = DerivativeMode.ANALYTIC
    fd_order: int = FD_ORDER
    fd_step: Optional[float] = None
    name: str = "metric"

    def __post_init__(self) -> None:
        if self.derivative_mode is DerivativeMode.ANALYTIC and self.jet is None and self.profile is None:
            object.__setattr__(self, "derivative_mode", DerivativeMode.FINITE_DIFFERENCE)

    @property
    def center(self) -> complex:
        return self.domain.center if self.domain is not None else 0j

    @property
    def is_radial(self) -> bool:
        return self.profile is not None

    def check_domain(self, z: complex) -> None:
        if self.domain is not None and not self.domain.contains(z):
            raise DomainError(f"{self.name}: point {z!r} outside the domain")

    def phi(self, z: PointLike) -> float:
        w = as_complex(z)
        self.check_domain(w)
        return float(self.liouville(w))

    def density(self, z: PointLike) -> float:
        """e^{2φ(z)}."""
        return math.exp(2.0 * self.phi(z))

    def fd_step_at(self, z: complex) -> float:
        rel = self.fd_step if self.fd_step is not None else FD_RELATIVE_STEP
        scale = abs(z - self.center)
        return rel * scale if scale > 0.0 else rel

    def with_mode(self, mode: DerivativeMode, order: Optional[int] = None,
                  step: Optional[float] = None) -> "ConformalMetric":
        return replace(
            self,
            derivative_mode=mode,
            fd_order=order if order is not None else self.fd_order,
            fd_step=step if step is not None else self.fd_step,
        )

    def with_domain(self, domain: Optional[AnnulusDomain]) -> "ConformalMetric":
        return replace(self, domain=domain)

    def shifted(self, r: float) -> "ConformalMetric":
        """The metric e^{2r}g."""
        base, jet = self.liouville, self.jet
        new_jet = None
        if jet is not None:
            def new_jet(z: complex) -> LiouvilleJet:
                j = jet(z)
                return replace(j, phi=j.phi + r)
        return replace(
            self,
            liouville=lambda z: base(z) + r,
            jet=new_jet,
            profile=self.profile.shifted(r) if self.profile is not None else None,
            name=f"{self.name}+{r:g}",
        )

    def with_radial_field(self, u: RadialField) -> "ConformalMetric":
        """The metric e^{2u}g for a radial field u(log|z − c|)."""
        if self.profile is None:
            raise ValidationError(f"{self.name}: radial fields need a radial profile")
        base, c = self.liouville, self.center
        return replace(
            self,
            liouville=lambda z: base(z) + u.u(math.log(abs(z - c))),
            jet=None,
            profile=self.profile.plus(u),
            name=f"{self.name}*{u.name}",
        )

    def pullback(self, m: MoebiusMap) -> "ConformalMetric":
        """f*g for f = m: Liouville field φ∘f + log|f'|, defined off the pole."""
        base = self.liouville

        def liouville(z: complex) -> float:
            return base(m(z)) + math.log(abs(m.derivative(z)))

        new_jet = None
        if self.derivative_mode is DerivativeMode.ANALYTIC:
            metric = self

            def new_jet(z: complex) -> LiouvilleJet:
                inner = liouville_jet(metric, m(z))
                fp = m.derivative(z)
                cz_d = m.c * z + m.d
                f2_over_f1 = -2.0 * m.c / cz_d
                f3_over_f1 = 6.0 * m.c * m.c / (cz_d * cz_d)
                f2 = f2_over_f1 * fp
                phi_z = inner.phi_z * fp + 0.5 * f2_over_f1
                phi_zz = (inner.phi_zz * fp * fp + inner.phi_z * f2
                          + 0.5 * (f3_over_f1 - f2_over_f1 * f2_over_f1))
                return LiouvilleJet(
                    phi=inner.phi + math.log(abs(fp)),
                    phi_z=phi_z,
                    phi_zz=phi_zz,
                    phi_zzbar=inner.phi_zzbar * abs(fp) ** 2,
                )

        return ConformalMetric(
            liouville=liouville,
            domain=None,
            jet=new_jet,
            derivative_mode=self.derivative_mode,
            fd_order=self.fd_order,
            fd_step=self.fd_step,
            name=f"pullback({self.name})",
        )


def liouville_jet(g: ConformalMetric, z: PointLike) -> LiouvilleJet:
    """(φ, φ_z, φ_zz, φ_zz̄) at z, analytic or by central differences."""
    w = as_complex(z)
    g.check_domain(w)
    if g.derivative_mode is DerivativeMode.ANALYTIC:
        if g.jet is not None:
            return g.jet(w)
        return profile_jet(g.profile, w - g.center)
    return finite_difference_jet(g.liouville, w, g.fd_step_at(w), g.fd_order)


def gaussian_curvature(g: ConformalMetric, z: PointLike) -> float:
    """K = −4φ_zz̄e^{−2φ}; for radial profiles evaluated as −σ''e^{−2σ}."""
    w = as_complex(z)
    if g.derivative_mode is DerivativeMode.ANALYTIC and g.jet is None and g.profile is not None:
        g.check_domain(w)
        s, _, s2 = g.profile.jet(math.log(abs(w - g.center)))
        return -s2 * math.exp(-2.0 * s)
    jet = liouville_jet(g, w)
    return -4.0 * jet.phi_zzbar * math.exp(-2.0 * jet.phi)


def finite_difference_check(
    g: ConformalMetric,
    points: Iterable[PointLike],
    order: Optional[int] = None,
    step: Optional[float] = None,
) -> float:
    """Largest deviation between analytic and finite-difference jets.

    Each deviation is measured relative to the largest jet component at that
    point (φ excluded), so log-singular fields are compared on their own scale.
    """
    if g.derivative_mode is not DerivativeMode.ANALYTIC:
        raise ValidationError(f"{g.name}: analytic derivatives are required for the cross-check")
    numeric = g.with_mode(DerivativeMode.FINITE_DIFFERENCE, order=order, step=step)
    worst = 0.0
    for z in points:
        exact = liouville_jet(g, z)
        approx = liouville_jet(numeric, z)
        scale = max(abs(exact.phi_z), abs(exact.phi_zz), abs(exact.phi_zzbar), 1e-300)
        deviation = max(
            abs(exact.phi_z - approx.phi_z),
            abs(exact.phi_zz - approx.phi_zz),
            abs(exact.phi_zzbar - approx.phi_zzbar),
        ) / scale
        worst = max(worst, deviation)
    logger.debug("%s: finite-difference deviation %.3g", g.name, worst)
    return worst


# ── Metric factories ────────────────────────────────────────────────────────

def flat_metric(c: float = 0.0, domain: Optional[AnnulusDomain] = None) -> ConformalMetric:
    """φ ≡ c."""
    return ConformalMetric(
        liouville=lambda z: c,
        domain=domain,
        jet=lambda z: LiouvilleJet(c, 0j, 0j, 0.0),
        name=f"flat({c:g})",
    )


def radial_metric(
    profile: RadialProfile,
    domain: Optional[AnnulusDomain] = None,
    name: str = "radial",
) -> ConformalMetric:
    """Metric with Liouville field φ(z) = σ(log|z − c|) − log|z − c|."""
    c = domain.center if domain is not None else 0j
    sigma = profile.sigma

    def liouville(z: complex) -> float:
        x = math.log(abs(z - c))
        return sigma(x) - x

    return ConformalMetric(liouville=liouville, domain=domain, profile=profile, name=name)


def sample_annulus(domain: AnnulusDomain, radial: int, angular: int,
                   margin: float = 0.0) -> np.ndarray:
    """Grid of points log-spaced in radius and uniform in angle."""
    lo, hi = math.log(domain.inner), math.log(domain.outer)
    xs = np.linspace(lo + margin, hi - margin, radial)
    if domain.sector is None:
        thetas = 2.0 * np.pi * (np.arange(angular) + 0.5) / angular
    else:
        a, b = domain.sector
        thetas = a + (b - a) * (np.arange(angular) + 0.5) / angular
    return (domain.center + np.exp(xs[:, None] + 1j * thetas[None, :])).ravel()
