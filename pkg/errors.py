"""Exception hierarchy shared by the geometry modules and the CLI."""

from __future__ import annotations

from constants import EXIT_NONCONVERGENCE, EXIT_VALIDATION


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""

    exit_code: int = EXIT_NONCONVERGENCE
    kind: str = "workbench_error"


class ValidationError(WorkbenchError, ValueError):
    """Parameters violate a precondition (ordering, ranges, schema)."""

    exit_code = EXIT_VALIDATION
    kind = "validation_error"


class DomainError(ValidationError):
    """A point lies outside the domain of a metric or map."""

    kind = "domain_error"


class CurveSystemError(ValidationError):
    """A curve system is malformed or not realizable on a surface."""

    kind = "curve_system_error"


class DegenerateImmersionError(WorkbenchError):
    """1 + tr B̂ + det B̂ vanishes: a principal curvature equals −1."""

    kind = "degenerate_immersion"


class NonEmbeddedSurfaceError(WorkbenchError):
    """The sampled embeddedness check of an Epstein surface failed.

    Offsetting the metric by a constant (e^{2r}g) moves the surface along
    its normal and is the standard way out.
    """

    kind = "non_embedded_surface"


class QuadratureError(WorkbenchError):
    """An integral did not reach tolerance within the subdivision cap."""

    kind = "quadrature_nonconvergence"


class ConvergenceError(WorkbenchError):
    """A limit sequence or rate fit did not behave as required."""

    kind = "convergence_failure"
