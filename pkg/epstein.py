"""
epstein.py — Epstein Surfaces and Forms at Infinity
===================================================

For a conformal metric g = e^{2φ}|dz|² the Epstein surface is the envelope of
the horospheres H(z, e^{−φ(z)}) (horosphere centred at z whose Euclidean
diameter is e^{−φ(z)}).  Its point over z is

    Σ(z) = ( z + 2∇φ / (e^{2φ} + |∇φ|²),  2e^{φ} / (e^{2φ} + |∇φ|²) ).

Forms at infinity, in the real (x, y) basis:

    Î  = e^{2φ}·Id
    ÎI = [[4φ_zz̄ + 4Re q, −4Im q], [−4Im q, 4φ_zz̄ − 4Re q]],  q = φ_zz − φ_z²
    B̂  = Î⁻¹ÎI,   ÎII = Î(B̂·, B̂·)
    H  = (1 − det B̂)/(1 + tr B̂ + det B̂)
    da = ¼(1 + tr B̂ + det B̂)·da_Î            (signed)

The unit normal at Σ(z) is represented by its ideal endpoint z.

Rotationally symmetric metrics
──────────────────────────────
With x = log ρ and σ = φ + x the surface over the circle of radius ρ is the
circle of radius ρ|X̃| at height ρT̃, where (m = σ' − 1, S = e^{2σ} + m²)

    X̃ = (S + 2m)/S,   T̃ = 2e^{σ}/S,
    tr B̂ = 2σ''e^{−2σ},   det B̂ = e^{−4σ}(σ''² − 16κ²),
    κ = σ''/4 − m/2 − m²/4   (q = κ/z²).

These only involve (σ, σ', σ'') and are used by the volume engine.

Embedding oracles
─────────────────
`embedding_forms` rebuilds the induced metric and mean curvature directly
from finite differences of the map z ↦ Σ(z) ⊂ ℝ³, independent of the
formulas above.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from constants import DEGENERACY_TOL, EMBEDDING_SAMPLES, FD_RELATIVE_STEP
from errors import DegenerateImmersionError, NonEmbeddedSurfaceError
from halfspace import (
    ComplexPoint,
    ConformalMetric,
    HyperbolicPoint3,
    MoebiusMap,
    PointLike,
    RadialProfile,
    as_complex,
    hyp_distance,
    liouville_jet,
    moebius_extend,
)
from numerics import central_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpsteinFrame:
    base: ComplexPoint
    surface_point: HyperbolicPoint3
    normal_endpoint: ComplexPoint
    I_hat: np.ndarray
    II_hat: np.ndarray
    III_hat: np.ndarray
    B_hat: np.ndarray
    q: complex
    mean_curvature: Optional[float]

    @property
    def trace(self) -> float:
        return float(np.trace(self.B_hat))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.B_hat))

    def to_dict(self) -> dict:
        return {
            "z_re": self.base.re,
            "z_im": self.base.im,
            "w_re": self.surface_point.horizontal.re,
            "w_im": self.surface_point.horizontal.im,
            "t": self.surface_point.height,
            "q_re": self.q.real,
            "q_im": self.q.imag,
            "trace_B": self.trace,
            "det_B": self.det,
            "H": self.mean_curvature,
        }


# ── Pointwise construction ──────────────────────────────────────────────────

def _epstein_from_jet(z: complex, phi: float, phi_z: complex) -> Tuple[complex, float]:
    gradient = 2.0 * phi_z.conjugate()
    e_phi = math.exp(phi)
    denominator = e_phi * e_phi + abs(gradient) ** 2
    return z + 2.0 * gradient / denominator, 2.0 * e_phi / denominator


def epstein_point(g: ConformalMetric, z: PointLike) -> HyperbolicPoint3:
    """Point of the Epstein surface of g over z."""
    w = as_complex(z)
    jet = liouville_jet(g, w)
    horizontal, height = _epstein_from_jet(w, jet.phi, jet.phi_z)
    return HyperbolicPoint3.of(horizontal, height)


def horosphere_defect(g: ConformalMetric, z: PointLike) -> float:
    """|w − z|² + t² − 2e^{−φ}t at Σ(z), relative to 2e^{−φ}t.

    Zero exactly when Σ(z) lies on the horosphere centred at z of Euclidean
    diameter e^{−φ(z)}.
    """
    w = as_complex(z)
    point = epstein_point(g, w)
    reach = 2.0 * math.exp(-g.phi(w)) * point.height
    return (abs(point.w - w) ** 2 + point.height ** 2 - reach) / reach


def _second_form(jet_zzbar: float, q: complex) -> np.ndarray:
    return np.array(
        [
            [4.0 * jet_zzbar + 4.0 * q.real, -4.0 * q.imag],
            [-4.0 * q.imag, 4.0 * jet_zzbar - 4.0 * q.real],
        ]
    )


def _mean_curvature(trace: float, det: float) -> float:
    denominator = 1.0 + trace + det
    if abs(denominator) <= DEGENERACY_TOL * (1.0 + abs(trace) + abs(det)):
        raise DegenerateImmersionError(
            f"1 + tr B̂ + det B̂ = {denominator:.3g}: principal curvature −1"
        )
    return (1.0 - det) / denominator


def forms_at_infinity(g: ConformalMetric, z: PointLike) -> EpsteinFrame:
    """All forms at infinity at z; mean_curvature is None at degenerate points."""
    w = as_complex(z)
    jet = liouville_jet(g, w)
    e2phi = math.exp(2.0 * jet.phi)
    q = jet.q
    I_hat = e2phi * np.eye(2)
    II_hat = _second_form(jet.phi_zzbar, q)
    B_hat = II_hat / e2phi
    III_hat = B_hat.T @ I_hat @ B_hat
    trace = float(np.trace(B_hat))
    det = float(np.linalg.det(B_hat))
    try:
        mean_curvature: Optional[float] = _mean_curvature(trace, det)
    except DegenerateImmersionError:
        mean_curvature = None
    horizontal, height = _epstein_from_jet(w, jet.phi, jet.phi_z)
    base = ComplexPoint.from_complex(w)
    return EpsteinFrame(
        base=base,
        surface_point=HyperbolicPoint3.of(horizontal, height),
        normal_endpoint=base,
        I_hat=I_hat,
        II_hat=II_hat,
        III_hat=III_hat,
        B_hat=B_hat,
        q=q,
        mean_curvature=mean_curvature,
    )


def mean_curvature_at(g: ConformalMetric, z: PointLike) -> float:
    """H = (1 − det B̂)/(1 + tr B̂ + det B̂); raises at degenerate points."""
    frame = forms_at_infinity(g, z)
    return _mean_curvature(frame.trace, frame.det)


def area_density_induced(g: ConformalMetric, z: PointLike) -> float:
    """Signed factor ¼(1 + tr B̂ + det B̂)e^{2φ} from dx dy to the induced area."""
    frame = forms_at_infinity(g, z)
    return 0.25 * (1.0 + frame.trace + frame.det) * frame.I_hat[0, 0]


def h_area_density(g: ConformalMetric, z: PointLike) -> float:
    """H times the induced area factor: ¼(1 − det B̂)e^{2φ}, finite everywhere."""
    frame = forms_at_infinity(g, z)
    return 0.25 * (1.0 - frame.det) * frame.I_hat[0, 0]


def equidistant_offset(g: ConformalMetric, z: PointLike, r: float) -> HyperbolicPoint3:
    """Point over z of the Epstein surface of e^{2r}g."""
    if r == 0.0:
        return epstein_point(g, z)
    return epstein_point(g.shifted(r), z)


def normal_flow(point: HyperbolicPoint3, endpoint: PointLike, distance: float) -> HyperbolicPoint3:
    """Move `distance` along the geodesic from `point` towards the ideal `endpoint`."""
    z = as_complex(endpoint)
    to_infinity = MoebiusMap(0, 1, 1, -z)
    p = moebius_extend(to_infinity, point)
    lifted = HyperbolicPoint3.of(p.w, p.height * math.exp(distance))
    return moebius_extend(to_infinity.inverse(), lifted)


def epstein_flow_factor(g: ConformalMetric, z: PointLike, r: float) -> float:
    """Distance between Σ(g) and Σ(e^{2r}g) over z, divided by r."""
    if r == 0.0:
        raise ValueError("flow factor needs r ≠ 0")
    return hyp_distance(epstein_point(g, z), equidistant_offset(g, z, r)) / abs(r)


def epstein_differential(g: ConformalMetric, z: PointLike) -> Tuple[complex, complex, complex, complex]:
    """(∂w/∂z, ∂w/∂z̄, ∂t/∂z, ∂t/∂z̄) of the Epstein map, from the 2-jet of φ."""
    zc = as_complex(z)
    jet = liouville_jet(g, zc)
    pz, pzz, pzzbar = jet.phi_z, jet.phi_zz, jet.phi_zzbar
    pzbar = pz.conjugate()
    pzbarzbar = pzz.conjugate()
    e = math.exp(2.0 * jet.phi)
    d = e + 4.0 * abs(pz) ** 2
    # ∂D = 2φ_z·E + 4(φ_zz φ_z̄ + φ_z φ_zz̄), ∂̄D its conjugate
    dd_z = 2.0 * pz * e + 4.0 * (pzz * pzbar + pz * pzzbar)
    dd_zbar = dd_z.conjugate()
    # w = z + 4φ_z̄ / D
    dw_z = 1.0 + 4.0 * pzzbar / d - 4.0 * pzbar * dd_z / (d * d)
    dw_zbar = 4.0 * pzbarzbar / d - 4.0 * pzbar * dd_zbar / (d * d)
    # t = 2e^φ / D
    t = 2.0 * math.exp(jet.phi) / d
    dt_z = t * (pz - dd_z / d)
    dt_zbar = dt_z.conjugate()
    return dw_z, dw_zbar, dt_z, dt_zbar


# ── Rotationally symmetric metrics ──────────────────────────────────────────

@dataclass(frozen=True)
class RadialForms:
    """Forms at infinity of a radial metric over the circle x = log ρ.

    `density` and `h_density` are the induced area and H·area per dx dθ.
    """

    trace: float
    det: float
    kappa: float
    density: float
    h_density: float

    @property
    def mean_curvature(self) -> float:
        return _mean_curvature(self.trace, self.det)


def radial_forms(profile: RadialProfile, x: float) -> RadialForms:
    s, s1, s2 = profile.jet(x)
    m = s1 - 1.0
    kappa = 0.25 * s2 - 0.5 * m - 0.25 * m * m
    e2 = math.exp(2.0 * s)
    trace = 2.0 * s2 / e2
    det = (s2 * s2 - 16.0 * kappa * kappa) / (e2 * e2)
    return RadialForms(
        trace=trace,
        det=det,
        kappa=kappa,
        density=0.25 * (1.0 + trace + det) * e2,
        h_density=0.25 * (1.0 - det) * e2,
    )


def epstein_meridian(profile: RadialProfile, x: float) -> Tuple[float, float]:
    """Scaled meridian point (X̃, T̃): Σ(ρe^{iθ}) = (ρX̃e^{iθ}, ρT̃)."""
    s, s1, _ = profile.jet(x)
    m = s1 - 1.0
    e_s = math.exp(s)
    big_s = e_s * e_s + m * m
    return (big_s + 2.0 * m) / big_s, 2.0 * e_s / big_s


def meridian_log_radius_rate(profile: RadialProfile, x: float) -> float:
    """d log R / dx for R = ρ·√(X̃² + T̃²)."""
    s, s1, s2 = profile.jet(x)
    m = s1 - 1.0
    e2 = math.exp(2.0 * s)
    big_s = e2 + m * m
    ds = 2.0 * s1 * e2 + 2.0 * m * s2
    x_t = (big_s + 2.0 * m) / big_s
    t_t = 2.0 * math.sqrt(e2) / big_s
    dx_t = 2.0 * (s2 * big_s - m * ds) / (big_s * big_s)
    dt_t = t_t * (s1 - ds / big_s)
    return 1.0 + (x_t * dx_t + t_t * dt_t) / (x_t * x_t + t_t * t_t)


def cone_volume_density(profile: RadialProfile, x: float) -> float:
    """π·(X̃/T̃)²·d log R/dx: volume per dx of the region above the surface."""
    x_t, t_t = epstein_meridian(profile, x)
    return math.pi * (x_t / t_t) ** 2 * meridian_log_radius_rate(profile, x)


def check_radial_embedding(
    profile: RadialProfile,
    x_lo: float,
    x_hi: float,
    samples: int = EMBEDDING_SAMPLES,
) -> None:
    """Sampled embeddedness check of the surface over x_lo ≤ x ≤ x_hi.

    Requires the meridian to move monotonically outward (d log R/dx > 0) and
    the signed area density not to change sign.
    """
    if x_hi <= x_lo:
        return
    signs = set()
    for x in np.linspace(x_lo, x_hi, samples):
        rate = meridian_log_radius_rate(profile, float(x))
        if not (rate > 0.0 and math.isfinite(rate)):
            logger.warning("meridian folds back at x=%.6g (d log R/dx = %.3g)", x, rate)
            raise NonEmbeddedSurfaceError(
                f"Epstein meridian is not monotone at log ρ = {x:.6g}; offset the metric by e^(2r)"
            )
        density = radial_forms(profile, float(x)).density
        if density != 0.0:
            signs.add(density > 0.0)
    if len(signs) > 1:
        logger.warning("area density changes sign on [%.6g, %.6g]", x_lo, x_hi)
        raise NonEmbeddedSurfaceError(
            "area density changes sign: the surface passes a degenerate circle"
        )


# ── Embedding oracles ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class EmbeddingForms:
    induced_metric: np.ndarray
    area_density: float
    mean_curvature: float


def _embedding(g: ConformalMetric, z: complex) -> np.ndarray:
    p = epstein_point(g, z)
    return np.array([p.w.real, p.w.imag, p.height])


def embedding_forms(g: ConformalMetric, z: PointLike, step: Optional[float] = None) -> EmbeddingForms:
    """Induced metric, area density and mean curvature from the map z ↦ Σ(z) ⊂ ℝ³.

    Uses 4th-order central differences of the embedding; the normal is the
    one pointing away from the ideal endpoint z, the orientation in which the
    horizontal plane of a constant metric has H = 1.  The hyperbolic mean
    curvature follows from the Euclidean one by H = t·H_E + n_t.
    """
    zc = as_complex(z)
    h = step if step is not None else FD_RELATIVE_STEP * max(abs(zc - g.center), 1e-300)
    off1, w1 = central_weights(1, 4)
    off2, w2 = central_weights(2, 4)

    def r(dx: float, dy: float) -> np.ndarray:
        return _embedding(g, zc + complex(dx, dy) * h)

    centre = r(0, 0)
    r_x = sum(w * r(o, 0) for o, w in zip(off1, w1) if w) / h
    r_y = sum(w * r(0, o) for o, w in zip(off1, w1) if w) / h
    r_xx = sum(w * (centre if o == 0 else r(o, 0)) for o, w in zip(off2, w2) if w) / h ** 2
    r_yy = sum(w * (centre if o == 0 else r(0, o)) for o, w in zip(off2, w2) if w) / h ** 2
    r_xy = sum(
        wi * wj * r(oi, oj)
        for oi, wi in zip(off1, w1) if wi
        for oj, wj in zip(off1, w1) if wj
    ) / h ** 2

    e_, f_, g_ = r_x @ r_x, r_x @ r_y, r_y @ r_y
    normal = np.cross(r_x, r_y)
    normal /= np.linalg.norm(normal)
    chord = np.array([zc.real - centre[0], zc.imag - centre[1], -centre[2]])
    if normal @ chord > 0.0:
        normal = -normal
    l_, m_, n_ = r_xx @ normal, r_xy @ normal, r_yy @ normal
    gram = e_ * g_ - f_ * f_
    h_euclid = (e_ * n_ - 2.0 * f_ * m_ + g_ * l_) / (2.0 * gram)
    t = centre[2]
    induced = np.array([[e_, f_], [f_, g_]]) / (t * t)
    return EmbeddingForms(
        induced_metric=induced,
        area_density=math.sqrt(gram) / (t * t),
        mean_curvature=t * h_euclid + normal[2],
    )


def offset_forms_defect(g: ConformalMetric, z: PointLike, t: float) -> float:
    """‖4e^{−2t}I_t − Î‖/‖Î‖ for the t-offset surface, I_t from the embedding."""
    zc = as_complex(z)
    induced = embedding_forms(g.shifted(t), zc).induced_metric
    i_hat = math.exp(2.0 * g.phi(zc)) * np.eye(2)
    return float(np.linalg.norm(4.0 * math.exp(-2.0 * t) * induced - i_hat) / np.linalg.norm(i_hat))
