"""
constants.py — Epstein Workbench Numerical Vocabulary
=====================================================

Single source of truth for every tolerance, threshold, default schedule and
exit code used across the workbench.

Design rules
────────────
• Every group has a docstring explaining the *geometry*, not just the number.
• Modules import from here; they never hard-code a tolerance inline.
• Names are SCREAMING_SNAKE_CASE; values are plain floats/ints/tuples so the
  module has no imports beyond math.
• The CLI reads its defaults from here and echoes them into every report.
"""

from __future__ import annotations

import math

WORKBENCH_VERSION = "1.0.0"
REPORT_SCHEMA_VERSION = 1


# ── 1. MODEL THRESHOLDS ──────────────────────────────────────────────────────

EPSILON_0: float = 2.0 * math.asinh(1.0)
"""
Margulis-type constant ε₀ = 2·arsinh(1) ≈ 1.7627.

A closed geodesic of length ℓ ≤ ε₀ has an embedded collar of half-width
arsinh(1/sinh(ℓ/2)); at ℓ = ε₀ the half-width equals arsinh(1) = ε₀/2.
Tube parameters ε are capped here and the ε₁(g) bisection bracket ends here.
"""

CUSP_RHO_MAX: float = math.exp(-math.sqrt(2.0))
"""
Upper bound e^{−√2} ≈ 0.2431 for cusp truncation radii.

At ρ = e^{−√2} the numerator log²ρ − 2 of the Epstein radial coordinate
vanishes: the surface crosses the vertical axis and its meridian flips side.
Truncations are required to stay strictly below this radius.
"""


# ── 2. FINITE DIFFERENCES ────────────────────────────────────────────────────

FD_RELATIVE_STEP: float = 2.0e-3
"""
Step for central-difference Liouville jets, relative to |z − center|.

Fields like φ₀ = log 2 − log|z| − log|log|z|²| vary on the scale |z|, so the
step has to shrink with |z|.  With a 4th-order stencil the truncation error is
O(h⁴) ≈ 1e-11 relative while cancellation in the second differences stays
near 1e-9 of the largest jet component.  At the center itself the step is
the bare relative value.
"""

FD_ORDER: int = 4
"""Default accuracy order of the central stencils (2 or 4)."""

FD_CONVERGENCE_ORDER_TOL: float = 0.20
"""
Relative tolerance on a fitted convergence order.

A 2nd-order stencil halved repeatedly should show error ratios of 4; the
fitted order has to land within 20% of the nominal order.
"""

CONTOUR_SAMPLES: int = 64
"""
Number of samples on the Cauchy circle for FFT Taylor coefficients.

The trapezoidal rule on a circle converges geometrically for analytic
integrands, so 64 points recover the first three derivatives to ~1e-12
relative when the circle stays well inside the domain of analyticity.
"""

CONTOUR_RADIUS_FRACTION: float = 0.5
"""Cauchy-circle radius as a fraction of the distance to the nearest singularity."""


# ── 3. QUADRATURE ────────────────────────────────────────────────────────────

QUAD_REL_TOL: float = 1.0e-10
"""Default relative tolerance handed to every cell integral."""

QUAD_ABS_TOL: float = 1.0e-13
"""Default absolute tolerance handed to every cell integral."""

QUAD_MAX_SUBDIVISIONS: int = 200
"""Subdivision cap per cell integral (scipy quad `limit`)."""

QUAD_CELLS: int = 8
"""
Initial number of cells in the cell tree.

Each cell is integrated independently, which lets the engine evaluate cells
in parallel while still summing them in a fixed order with math.fsum.
"""

QUAD_MAX_DEPTH: int = 6
"""Maximum bisection depth of a cell before non-convergence is declared."""

QUAD_ORDER: int = 21
"""Gauss–Kronrod rule order reported in quadrature metadata (QUADPACK QAGS)."""

QUAD_ROUNDOFF_FACTOR: float = 64.0
"""Multiple of machine epsilon times the integral scale added to error estimates."""


# ── 4. GEOMETRIC CHECKS ──────────────────────────────────────────────────────

EMBEDDING_SAMPLES: int = 257
"""
Number of meridian samples for the sampled embeddedness check.

The check is sampled, not proven: consecutive Epstein meridian points must
move monotonically away from the vertical axis and the signed area density
must not change sign.
"""

DEGENERACY_TOL: float = 1.0e-14
"""|1 + tr B̂ + det B̂| below this (relative) is a degenerate immersion."""

MOEBIUS_DET_TOL: float = 1.0e-300
"""|ad − bc| below this cannot be normalized to SL(2, ℂ)."""


# ── 5. LIMIT STUDIES ─────────────────────────────────────────────────────────

CUSP_SCHEDULE_EXPONENTS: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
"""
Default inner-radius schedule ρ = 10^{−k} for the renormalized cusp limit.

The remainder of the renormalized sequence is O(1/|log ρ|), so the exponents
are spaced linearly: 1/|log ρ| then decays like 1/k, the rate the limit fit
assumes.
"""

CUSP_DEFAULT_EPS_BAR: float = 2.0
"""
Default outer horocycle length ε̄ for the truncated cusp.

ρ(ε̄) = e^{−2π/ε̄} = e^{−π} ≈ 0.0432 sits below e^{−√2} and above every
inner radius of the default schedule.
"""

TUBE_DEFAULT_EPS: float = 0.5
"""Default boundary length ε of the symmetric tube A_ℓ(ε)."""

TUBE_DEFAULT_ELLS: tuple[float, ...] = (0.2, 0.1, 0.05)
"""Core lengths used for the tube divergence and residual-ratio studies."""

RATE_FIT_MIN_POINTS: int = 3
"""Minimum number of schedule points before a rate fit is attempted."""

RATE_ORDER_TOL: float = 0.20
"""Fitted remainder order must land within 20% of the expected order."""


# ── 6. ADAPTED CORRECTION ────────────────────────────────────────────────────

BRUTE_FORCE_MAX_CURVES: int = 20
"""
Largest curve system solved by exhaustive enumeration.

Beyond this the maximization switches to branch-and-bound; both must agree
wherever both run.
"""

TIE_REL_TOL: float = 1.0e-12
"""Selections whose value is within this relative gap of the optimum are ties."""

EPSILON1_XTOL: float = 1.0e-12
"""Bisection tolerance for the ε₁(g) threshold."""


# ── 7. CLI ───────────────────────────────────────────────────────────────────

EXIT_OK: int = 0
EXIT_VALIDATION: int = 2
EXIT_NONCONVERGENCE: int = 3
"""
Process exit codes.

0 success, 2 validation error (bad parameters, schema violation, domain
violation), 3 numerical non-convergence (quadrature cap, failed rate fit,
degenerate or non-embedded surface).
"""

CSV_FLOAT_FORMAT: str = "%.17g"
"""CSV floats carry 17 significant digits so cross-run diffs are meaningful."""

DEFAULT_JOBS: int = 1
"""Default parallelism degree for quadrature cells and enumeration subtrees."""
