"""
adapted_correction.py — Multicurve Correction and Collar Geometry
=================================================================

Surface-side quantities behind the adapted renormalized volume:

    Ṽ_R(X) = V_R(X) + max_m L(X, m),     L(X, m) = π³ Σ_{γ ∈ m} 1/ℓ_γ(X)

where m runs over multicurves of compressible curves.  A multicurve is a set
of pairwise disjoint curves, so the maximization is a maximum-weight
independent set in the intersection graph with weights π³/ℓ, capped at
3g − 3 components.

Search
──────
• enumeration       exhaustive DFS over independent sets (≤ 20 curves)
• branch-and-bound  curves ordered by weight; a subtree is pruned when
                    π³·min(slots, remaining)·(largest remaining 1/ℓ) cannot
                    reach the incumbent.  Subtrees rooted at each first
                    member run in parallel; merging is deterministic.

Both searches return every optimum (ties within TIE_REL_TOL relative),
sorted by member ids.  Values are formed with math.fsum, which is exactly
rounded, so both searches produce bit-identical values.

The module also carries the collar width, ε₁(g), and the L¹/L∞ norms of
dz²/z² on the annulus cover used in the gradient bounds.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from constants import BRUTE_FORCE_MAX_CURVES, EPSILON1_XTOL, EPSILON_0, TIE_REL_TOL
from errors import CurveSystemError, ValidationError
from quadrature import QuadratureConfig, integrate_1d, integrate_rectangle

logger = logging.getLogger(__name__)

PI3 = math.pi ** 3


# ── Curve systems ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Curve:
    id: Hashable
    length: float
    compressible: bool = True

    @property
    def weight(self) -> float:
        """π³/ℓ, the contribution of the curve to L(X, m)."""
        return PI3 / self.length


def _id_key(curve_id: Hashable) -> Tuple[int, str]:
    # integers before strings, each in natural order
    if isinstance(curve_id, (int, np.integer)):
        return 0, f"{int(curve_id):020d}"
    return 1, str(curve_id)


@dataclass
class CurveSystem:
    """Curves on a genus-g boundary with a boolean intersection matrix.

    Collar compatibility of intersecting pairs is only enforced when
    `check_collars` is set; plain construction accepts any symmetric pattern.
    """

    genus_sum: int
    curves: List[Curve]
    intersections: np.ndarray
    check_collars: bool = False

    def __post_init__(self) -> None:
        self.intersections = np.asarray(self.intersections, dtype=bool)
        self.validate()

    @property
    def size(self) -> int:
        return len(self.curves)

    @property
    def slots(self) -> int:
        """3g − 3: the most components a multicurve can have."""
        return 3 * self.genus_sum - 3

    def index_of(self, curve_id: Hashable) -> int:
        for i, curve in enumerate(self.curves):
            if curve.id == curve_id:
                return i
        raise CurveSystemError(f"unknown curve id {curve_id!r}")

    def disjoint(self, i: int, j: int) -> bool:
        return not self.intersections[i, j]

    def validate(self) -> None:
        if not isinstance(self.genus_sum, (int, np.integer)) or self.genus_sum < 2:
            raise CurveSystemError(f"genus_sum must be an integer ≥ 2, got {self.genus_sum!r}")
        ids = [c.id for c in self.curves]
        if len(set(ids)) != len(ids):
            raise CurveSystemError("curve ids must be unique")
        for curve in self.curves:
            if not (math.isfinite(curve.length) and curve.length > 0.0):
                raise CurveSystemError(f"curve {curve.id!r}: length must be positive, got {curve.length}")
        n = self.size
        matrix = self.intersections
        if matrix.shape != (n, n):
            raise CurveSystemError(f"intersection matrix must be {n}×{n}, got {matrix.shape}")
        if not np.array_equal(matrix, matrix.T):
            raise CurveSystemError("intersection matrix must be symmetric")
        if n and matrix.diagonal().any():
            raise CurveSystemError("a curve cannot intersect itself")
        if self.check_collars:
            self.validate_collars()
        largest = max_disjoint_family(self)
        if largest > self.slots:
            raise CurveSystemError(
                f"system admits {largest} pairwise disjoint curves, more than 3g−3 = {self.slots}"
            )

    def validate_collars(self) -> None:
        """Reject intersecting pairs too short to cross each other's collar."""
        for i, j in zip(*np.nonzero(np.triu(self.intersections))):
            a, b = self.curves[i], self.curves[j]
            if math.sinh(a.length / 2.0) * math.sinh(b.length / 2.0) < 1.0:
                raise CurveSystemError(
                    f"curves {a.id!r} and {b.id!r} intersect but are too short to cross each other's collar"
                )

    def to_dict(self) -> dict:
        pairs = [
            [_plain(self.curves[i].id), _plain(self.curves[j].id)]
            for i, j in zip(*np.nonzero(np.triu(self.intersections)))
        ]
        return {
            "genus_sum": int(self.genus_sum),
            "curves": [
                {"id": _plain(c.id), "length": c.length, "compressible": c.compressible}
                for c in self.curves
            ],
            "intersections": pairs,
        }


def _plain(value: Hashable):
    return int(value) if isinstance(value, np.integer) else value


def max_disjoint_family(system: CurveSystem) -> int:
    """Size of the largest set of pairwise disjoint curves (all curves count)."""
    n = system.size
    neighbours = [set(np.nonzero(system.intersections[i])[0].tolist()) for i in range(n)]
    best = 0

    def grow(candidates: List[int], size: int) -> None:
        nonlocal best
        if size + len(candidates) <= best:
            return
        if not candidates:
            best = size
            return
        first, rest = candidates[0], candidates[1:]
        grow([c for c in rest if c not in neighbours[first]], size + 1)
        grow(rest, size)

    grow(list(range(n)), 0)
    return best


def curve_system_from_dict(data: dict) -> CurveSystem:
    """Build a system from {genus_sum, curves: [{id, length, compressible}], intersections: [[i, j]]}."""
    if not isinstance(data, dict):
        raise CurveSystemError("curve system must be a JSON object")
    try:
        genus = data["genus_sum"]
        raw_curves = data["curves"]
    except KeyError as exc:
        raise CurveSystemError(f"curve system is missing {exc.args[0]!r}") from exc
    if isinstance(genus, bool) or not isinstance(genus, int):
        raise CurveSystemError(f"genus_sum must be an integer, got {genus!r}")
    if not isinstance(raw_curves, list):
        raise CurveSystemError("curves must be a list")

    curves = []
    for entry in raw_curves:
        if not isinstance(entry, dict) or "id" not in entry or "length" not in entry:
            raise CurveSystemError(f"curve entry needs id and length: {entry!r}")
        try:
            length = float(entry["length"])
        except (TypeError, ValueError) as exc:
            raise CurveSystemError(f"curve {entry['id']!r}: bad length {entry['length']!r}") from exc
        compressible = entry.get("compressible", True)
        if not isinstance(compressible, bool):
            raise CurveSystemError(f"curve {entry['id']!r}: compressible must be true or false")
        curves.append(Curve(entry["id"], length, compressible))

    index = {}
    for i, curve in enumerate(curves):
        if curve.id in index:
            raise CurveSystemError(f"duplicate curve id {curve.id!r}")
        index[curve.id] = i
    matrix = np.zeros((len(curves), len(curves)), dtype=bool)
    for pair in data.get("intersections", []):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise CurveSystemError(f"intersection entries are [id, id] pairs, got {pair!r}")
        try:
            i, j = index[pair[0]], index[pair[1]]
        except (KeyError, TypeError) as exc:
            raise CurveSystemError(f"intersection refers to unknown curve {pair!r}") from exc
        if i == j:
            raise CurveSystemError(f"curve {pair[0]!r} cannot intersect itself")
        matrix[i, j] = matrix[j, i] = True
    return CurveSystem(genus, curves, matrix)


def load_curve_system(path: Union[str, Path]) -> CurveSystem:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read curve system {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CurveSystemError(f"{path}: invalid JSON ({exc})") from exc
    return curve_system_from_dict(data)


def random_curve_system(
    seed: int,
    n: int,
    genus: Optional[int] = None,
    length_range: Tuple[float, float] = (0.05, 4.0),
    density: float = 0.3,
    compressible_fraction: float = 0.7,
) -> CurveSystem:
    """Random realizable system: intersections only between collar-compatible pairs.

    The default genus leaves 3g − 3 ≥ n, so the component cap never binds.
    """
    rng = np.random.default_rng(seed)
    genus = genus if genus is not None else max(2, math.ceil((n + 3) / 3))
    lengths = rng.uniform(*length_range, size=n)
    compressible = rng.random(n) < compressible_fraction
    matrix = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if math.sinh(lengths[i] / 2.0) * math.sinh(lengths[j] / 2.0) >= 1.0 and rng.random() < density:
                matrix[i, j] = matrix[j, i] = True
    curves = [Curve(i, float(lengths[i]), bool(compressible[i])) for i in range(n)]
    return CurveSystem(genus, curves, matrix, check_collars=True)


# ── Maximization ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MulticurveSelection:
    members: Tuple[Hashable, ...]
    value: float

    def to_dict(self) -> dict:
        return {"members": [_plain(m) for m in self.members], "value": self.value}


@dataclass
class CorrectionResult:
    """All optimal multicurves of a system, ties included."""

    value: float
    optima: List[MulticurveSelection] = field(default_factory=list)
    method: str = "enumeration"
    nodes: int = 0

    @property
    def selection(self) -> MulticurveSelection:
        return self.optima[0]

    @property
    def is_tie(self) -> bool:
        return len(self.optima) > 1

    def families(self) -> List[Tuple[Hashable, ...]]:
        return [s.members for s in self.optima]

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "nodes": self.nodes,
            "tie": self.is_tie,
            "optima": [s.to_dict() for s in self.optima],
        }


def multicurve_value(lengths: Iterable[float]) -> float:
    """L = π³ Σ 1/ℓ."""
    return PI3 * math.fsum(1.0 / ell for ell in lengths)


def _candidates(system: CurveSystem) -> List[int]:
    """Compressible curves, heaviest first, ties broken by id."""
    picks = [i for i, c in enumerate(system.curves) if c.compressible]
    return sorted(picks, key=lambda i: (system.curves[i].length, _id_key(system.curves[i].id)))


def _selection(system: CurveSystem, members: Sequence[int]) -> MulticurveSelection:
    curves = sorted((system.curves[i] for i in members), key=lambda c: _id_key(c.id))
    return MulticurveSelection(tuple(c.id for c in curves), multicurve_value(c.length for c in curves))


def _finalize(system: CurveSystem, found: Dict[Tuple[int, ...], float], method: str, nodes: int) -> CorrectionResult:
    if not found:
        return CorrectionResult(0.0, [MulticurveSelection((), 0.0)], method, nodes)
    best = max(found.values())
    threshold = best * (1.0 - TIE_REL_TOL)
    optima = sorted(
        (_selection(system, members) for members, value in found.items() if value >= threshold),
        key=lambda s: [_id_key(m) for m in s.members],
    )
    return CorrectionResult(best, optima, method, nodes)


def _enumerate(system: CurveSystem) -> CorrectionResult:
    order = _candidates(system)
    lengths = [system.curves[i].length for i in range(system.size)]
    found: Dict[Tuple[int, ...], float] = {}
    best = 0.0
    nodes = 0

    def visit(position: int, chosen: List[int]) -> None:
        nonlocal best, nodes
        nodes += 1
        if position == len(order):
            if chosen:
                value = multicurve_value(lengths[i] for i in chosen)
                if value >= best * (1.0 - TIE_REL_TOL):
                    found[tuple(sorted(chosen))] = value
                    best = max(best, value)
            return
        i = order[position]
        if len(chosen) < system.slots and all(system.disjoint(i, j) for j in chosen):
            chosen.append(i)
            visit(position + 1, chosen)
            chosen.pop()
        visit(position + 1, chosen)

    visit(0, [])
    return _finalize(system, found, "enumeration", nodes)


def _greedy_incumbent(system: CurveSystem, order: List[int]) -> float:
    chosen: List[int] = []
    for i in order:
        if len(chosen) < system.slots and all(system.disjoint(i, j) for j in chosen):
            chosen.append(i)
    return multicurve_value(system.curves[i].length for i in chosen) if chosen else 0.0


def _subtree(system: CurveSystem, order: List[int], root: int, incumbent: float):
    """Branch and bound over selections whose heaviest member is order[root]."""
    lengths = [system.curves[i].length for i in range(system.size)]
    found: Dict[Tuple[int, ...], float] = {}
    best = incumbent
    nodes = 0

    def bound(position: int, chosen: List[int]) -> float:
        slots = min(system.slots - len(chosen), len(order) - position)
        if slots <= 0 or position >= len(order):
            return multicurve_value(lengths[i] for i in chosen)
        return multicurve_value(lengths[i] for i in chosen) + PI3 * slots / lengths[order[position]]

    def visit(position: int, chosen: List[int]) -> None:
        nonlocal best, nodes
        nodes += 1
        if bound(position, chosen) < best * (1.0 - TIE_REL_TOL):
            return
        if position == len(order) or len(chosen) == system.slots:
            value = multicurve_value(lengths[i] for i in chosen)
            if value >= best * (1.0 - TIE_REL_TOL):
                found[tuple(sorted(chosen))] = value
                best = max(best, value)
            return
        i = order[position]
        if all(system.disjoint(i, j) for j in chosen):
            chosen.append(i)
            visit(position + 1, chosen)
            chosen.pop()
        visit(position + 1, chosen)

    visit(root + 1, [order[root]])
    return found, nodes


def _branch_and_bound(system: CurveSystem, jobs: int) -> CorrectionResult:
    order = _candidates(system)
    if not order:
        return _finalize(system, {}, "branch-and-bound", 0)
    incumbent = _greedy_incumbent(system, order)
    roots = list(range(len(order)))

    def work(root: int):
        return _subtree(system, order, root, incumbent)

    if jobs > 1 and len(roots) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, roots))
    else:
        results = [work(root) for root in roots]

    found: Dict[Tuple[int, ...], float] = {}
    nodes = 0
    for subtree_found, subtree_nodes in results:
        found.update(subtree_found)
        nodes += subtree_nodes
    return _finalize(system, found, "branch-and-bound", nodes)


def correction_max(system: CurveSystem, method: str = "auto", jobs: int = 1) -> CorrectionResult:
    """max_m π³Σ1/ℓ over multicurves of compressible curves, with every optimum."""
    if method == "auto":
        method = "enumeration" if len(_candidates(system)) <= BRUTE_FORCE_MAX_CURVES else "branch-and-bound"
    if method == "enumeration":
        result = _enumerate(system)
    elif method == "branch-and-bound":
        result = _branch_and_bound(system, jobs)
    else:
        raise ValidationError(f"unknown maximization method {method!r}")
    logger.debug("correction max %.12g via %s (%d nodes, %d optima)",
                 result.value, result.method, result.nodes, len(result.optima))
    return result


def marginal_values(system: CurveSystem) -> Dict[Hashable, float]:
    """Contribution π³/ℓ of each curve; zero for incompressible curves."""
    return {c.id: (c.weight if c.compressible else 0.0) for c in system.curves}


def complete_maximal(system: CurveSystem, selection: MulticurveSelection) -> MulticurveSelection:
    """Extend a selection by disjoint zero-marginal curves, in id order, up to 3g − 3."""
    members = [system.index_of(m) for m in selection.members]
    extras = sorted(
        (i for i, c in enumerate(system.curves) if not c.compressible and i not in members),
        key=lambda i: _id_key(system.curves[i].id),
    )
    for i in extras:
        if len(members) >= system.slots:
            break
        if all(system.disjoint(i, j) for j in members):
            members.append(i)
    ids = tuple(sorted((system.curves[i].id for i in members), key=_id_key))
    return MulticurveSelection(ids, selection.value)


def adapted_value(base_vr: float, system: CurveSystem, jobs: int = 1) -> float:
    """Ṽ_R = V_R + max_m L(X, m)."""
    try:
        base_vr = float(base_vr)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"base renormalized volume must be a number: {exc}") from exc
    if not math.isfinite(base_vr):
        raise ValidationError("base renormalized volume must be finite")
    return base_vr + correction_max(system, jobs=jobs).value


# ── Thresholds and collars ──────────────────────────────────────────────────

def collar_width(ell: float) -> float:
    """Half-width arsinh(1/sinh(ℓ/2)) of the embedded collar."""
    if ell <= 0.0:
        raise ValidationError(f"geodesic length must be positive, got {ell}")
    return math.asinh(1.0 / math.sinh(ell / 2.0))


def collar_width_numeric(ell: float) -> float:
    """Collar half-width from 1/cosh²L = tanh²(ℓ/2), solved by brentq."""
    target = math.tanh(ell / 2.0) ** 2
    hi = 1.0
    while 1.0 / math.cosh(hi) ** 2 > target:
        hi *= 2.0
    return optimize.brentq(lambda w: 1.0 / math.cosh(w) ** 2 - target, 0.0, hi, xtol=1e-14, rtol=1e-15)


def collar_boundary_length(ell: float) -> float:
    """ℓ·cosh(L): length of each boundary circle of the collar."""
    return ell * math.cosh(collar_width(ell))


def collar_boundary_length_quadrature(ell: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """Line integral of dρ² + (ℓ/2π)²cosh²ρ dθ² along ρ = L."""
    cfg = cfg or QuadratureConfig()
    width = collar_width(ell)
    speed = ell / (2.0 * math.pi) * math.cosh(width)
    return integrate_1d(lambda theta: speed, 0.0, 2.0 * math.pi, cfg).value


def epsilon1_expression(eps: float, genus: int) -> float:
    """−π³/ε + π³(3g − 3)/arsinh(1/sinh(ε/2))."""
    return -PI3 / eps + PI3 * (3 * genus - 3) / collar_width(eps)


def epsilon1_threshold(genus: int) -> float:
    """Root of the ε₁ expression on (0, ε₀); it is negative below the root."""
    if not isinstance(genus, (int, np.integer)) or genus < 2:
        raise ValidationError(f"genus must be an integer ≥ 2, got {genus!r}")
    lo, hi = 1e-6, EPSILON_0
    if not (epsilon1_expression(lo, genus) < 0.0 < epsilon1_expression(hi, genus)):
        raise ValidationError(f"ε₁ bracket does not change sign for g = {genus}")
    root = optimize.bisect(epsilon1_expression, lo, hi, args=(genus,), xtol=EPSILON1_XTOL)
    logger.debug("ε₁(%d) = %.12f", genus, root)
    return float(root)


def short_curve_inclusion_check(system: CurveSystem, eps: float, jobs: int = 1) -> bool:
    """Every optimum contains every compressible curve shorter than ε."""
    if eps > epsilon1_threshold(system.genus_sum):
        raise ValidationError("ε must not exceed ε₁(g)")
    system.validate_collars()
    short = {c.id for c in system.curves if c.compressible and c.length < eps}
    result = correction_max(system, jobs=jobs)
    return all(short <= set(s.members) for s in result.optima)


# ── Quadratic-differential norms of dz²/z² ──────────────────────────────────

def qd_l1_on_sector(ell: float, theta_a: float, theta_b: float) -> float:
    """∫∫|dz²/z²| over {1 ≤ |z| ≤ e^ℓ, θ_a ≤ arg z ≤ θ_b}: (θ_b − θ_a)·ℓ."""
    if ell <= 0.0:
        raise ValidationError("ℓ must be positive")
    if not (0.0 <= theta_a <= theta_b <= math.pi):
        raise ValidationError(f"sector must satisfy 0 ≤ θ_a ≤ θ_b ≤ π, got ({theta_a}, {theta_b})")
    return (theta_b - theta_a) * ell


def qd_l1_on_sector_quadrature(ell: float, theta_a: float, theta_b: float,
                               cfg: Optional[QuadratureConfig] = None) -> float:
    qd_l1_on_sector(ell, theta_a, theta_b)
    if theta_a == theta_b:
        return 0.0
    cfg = cfg or QuadratureConfig()
    # |z|^{-2} times the polar area element r dr dθ
    result = integrate_rectangle(lambda r, theta: 1.0 / r, (1.0, math.exp(ell)), (theta_a, theta_b), cfg)
    return result.value


def thin_part_l1(ell: float, theta: float) -> float:
    """(2/(πℓ²))·‖dz²/z²‖₁ on a sector of half-width θ about the core: 4θ/(πℓ)."""
    return 2.0 / (math.pi * ell * ell) * qd_l1_on_sector(ell, 0.5 * math.pi - theta, 0.5 * math.pi + theta)


def full_annulus_l1_report(ell: float, cfg: Optional[QuadratureConfig] = None) -> dict:
    """‖2dz²/(πz²)‖₁ on the full half-annulus, against the stated 4ℓ."""
    closed = 2.0 / math.pi * qd_l1_on_sector(ell, 0.0, math.pi)
    quadrature = 2.0 / math.pi * qd_l1_on_sector_quadrature(ell, 0.0, math.pi, cfg)
    stated = 4.0 * ell
    return {
        "ell": ell,
        "closed_form": closed,
        "quadrature": quadrature,
        "stated": stated,
        "stated_over_computed": stated / quadrature,
    }


def qd_linf_thick_bound(ell: float) -> float:
    """(2π²/ℓ²)·tanh²(ℓ/2): sup of (2π²/ℓ²)‖dz²/z²‖ off the collar."""
    if not (0.0 < ell <= EPSILON_0):
        raise ValidationError(f"ℓ must lie in (0, ε₀], got {ell}")
    return 2.0 * math.pi ** 2 / ell ** 2 * math.tanh(ell / 2.0) ** 2


def qd_linf_thick_sup(ell: float, samples: int = 20001) -> float:
    """Grid oracle for qd_linf_thick_bound.

    In the upper half-plane ‖dz²/z²‖ = sin²θ, and the collar about the
    imaginary axis is sin θ ≥ 1/cosh L.  Both thick wedges next to the real
    axis are sampled up to their edge.
    """
    edge = math.asin(1.0 / math.cosh(collar_width(ell)))
    theta = np.concatenate([np.linspace(0.0, edge, samples), np.linspace(math.pi - edge, math.pi, samples)])
    return 2.0 * math.pi ** 2 / ell ** 2 * float(np.max(np.sin(theta) ** 2))


def qd_linf_full(samples: int = 20001) -> float:
    """Unrestricted sup of ‖dz²/z²‖ = sin²θ over the half-annulus."""
    theta = np.linspace(0.0, math.pi, samples)
    return float(np.max(np.sin(theta) ** 2))
