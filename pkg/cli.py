"""
cli.py — Command-Line Front Door
================================

    epstein-workbench epstein      --metric cusp --grid 0.05,0.2,10,10
    epstein-workbench wvol         --model cusp --rho1 1.8e-2 --rho2 0.135 --route both
    epstein-workbench wvol         --model tube --ell 0.1 --eps 0.5 --asymptote
    epstein-workbench renvol-limit --model cusp --eps-bar 2 --schedule 1e-2,1e-3,1e-4
    epstein-workbench adapted      system.json
    epstein-workbench check        [--quick]

Every command emits JSON (default) or CSV via --format, to stdout or --out.
Failures print a JSON error object on stderr and exit with 2 (validation)
or 3 (numerical non-convergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd

from acceptance import AcceptanceOptions, run_acceptance
from adapted_correction import (
    adapted_value,
    complete_maximal,
    correction_max,
    epsilon1_threshold,
    load_curve_system,
    marginal_values,
)
from constants import (
    CSV_FLOAT_FORMAT,
    CUSP_DEFAULT_EPS_BAR,
    DEFAULT_JOBS,
    EXIT_NONCONVERGENCE,
    EXIT_OK,
    QUAD_REL_TOL,
    TUBE_DEFAULT_ELLS,
    TUBE_DEFAULT_EPS,
    WORKBENCH_VERSION,
)
from cusp_model import (
    CuspPerturbation,
    CuspTruncation,
    cusp_metric,
    cusp_w_volume_for,
    perturbed_cusp_metric,
    truncated_cusp_renvol,
)
from epstein import epstein_point, mean_curvature_at
from errors import ConvergenceError, ValidationError, WorkbenchError
from halfspace import ConformalMetric, flat_metric, gaussian_curvature, liouville_jet
from numerics import fit_remainder_order
from quadrature import QuadratureConfig
from tube_model import (
    TubeRoute,
    TubeSpec,
    compare_routes,
    tube_metric,
    tube_study,
    tube_w_volume,
    tube_wvol_asymptote,
    tube_wvol_asymptote_boundary,
)
from wvolume import LedgerConvention, w_volume

logger = logging.getLogger(__name__)

TOOL_NAME = "epstein-workbench"
EPSTEIN_COLUMNS = ["z_re", "z_im", "w_re", "w_im", "t", "H", "q_re", "q_im", "K"]


@dataclass(frozen=True)
class RunConfig:
    """Validated command parameters shared by every subcommand."""

    command: str
    params: Dict[str, object] = field(default_factory=dict)
    out: Optional[Path] = None
    fmt: str = "json"
    jobs: int = DEFAULT_JOBS
    tol: float = QUAD_REL_TOL

    def __post_init__(self) -> None:
        if self.fmt not in ("json", "csv"):
            raise ValidationError(f"unknown output format {self.fmt!r}")
        if self.jobs < 1:
            raise ValidationError("--jobs must be at least 1")
        if not (self.tol > 0.0 and math.isfinite(self.tol)):
            raise ValidationError("--tol must be a positive number")

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        skip = {"command", "out", "format", "jobs", "tol", "verbose", "handler"}
        params = {k: v for k, v in vars(ns).items() if k not in skip}
        return cls(ns.command, params, ns.out, ns.format, ns.jobs, ns.tol)

    @property
    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(rel_tol=self.tol, jobs=self.jobs)


@dataclass
class CommandOutput:
    """JSON payload plus the table written in CSV mode."""

    payload: dict
    rows: List[dict] = field(default_factory=list)
    exit_code: int = EXIT_OK
    columns: Optional[List[str]] = None


# ── Parsing helpers ─────────────────────────────────────────────────────────

def parse_float_list(text: Optional[str]) -> Optional[List[float]]:
    if text is None or text.strip() == "":
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ValidationError(f"schedule must be a comma-separated list of numbers: {text!r}") from exc


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError as exc:
        raise ValidationError(f"not a complex number: {text!r}") from exc


def parse_grid(text: str) -> tuple:
    """'rho_min,rho_max,radial,angular' with radial·angular points."""
    parts = text.split(",")
    if len(parts) != 4:
        raise ValidationError(f"--grid expects rho_min,rho_max,radial,angular; got {text!r}")
    try:
        rho_min, rho_max = float(parts[0]), float(parts[1])
        radial, angular = int(parts[2]), int(parts[3])
    except ValueError as exc:
        raise ValidationError(f"--grid has a malformed entry: {text!r}") from exc
    if radial < 0 or angular < 0:
        raise ValidationError("--grid point counts must be non-negative")
    if not (0.0 < rho_min <= rho_max):
        raise ValidationError(f"--grid radii must satisfy 0 < rho_min ≤ rho_max, got ({rho_min}, {rho_max})")
    return rho_min, rho_max, radial, angular


def check_monotone(values: Sequence[float], what: str) -> None:
    steps = [b - a for a, b in zip(values, values[1:])]
    if not (all(s < 0 for s in steps) or all(s > 0 for s in steps)):
        raise ValidationError(f"{what} must be strictly monotone")


# ── Commands ────────────────────────────────────────────────────────────────

def _epstein_metric(cfg: RunConfig) -> ConformalMetric:
    choice = cfg.params["metric"]
    if choice == "cusp":
        return cusp_metric()
    if choice == "tube":
        return tube_metric(TubeSpec(cfg.params["ell"], cfg.params["eps"]))
    if choice == "flat":
        return flat_metric()
    return perturbed_cusp_metric(CuspPerturbation.linear(parse_complex(cfg.params["psi"])))


def cmd_epstein(cfg: RunConfig) -> CommandOutput:
    metric = _epstein_metric(cfg)
    rho_min, rho_max, radial, angular = parse_grid(cfg.params["grid"])
    rows = []
    if radial and angular:
        radii = [rho_min] if radial == 1 else [
            math.exp(math.log(rho_min) + k * (math.log(rho_max) - math.log(rho_min)) / (radial - 1))
            for k in range(radial)
        ]
        for rho in radii:
            for j in range(angular):
                z = rho * complex(math.cos(2 * math.pi * (j + 0.5) / angular),
                                  math.sin(2 * math.pi * (j + 0.5) / angular))
                metric.check_domain(z)
                point = epstein_point(metric, z)
                q = liouville_jet(metric, z).q
                rows.append({
                    "z_re": z.real, "z_im": z.imag,
                    "w_re": point.w.real, "w_im": point.w.imag, "t": point.height,
                    "H": mean_curvature_at(metric, z),
                    "q_re": q.real, "q_im": q.imag,
                    "K": gaussian_curvature(metric, z),
                })
    return CommandOutput({"metric": metric.name, "points": rows}, rows, columns=EPSTEIN_COLUMNS)


def _cusp_wvol(cfg: RunConfig) -> CommandOutput:
    rho1, rho2 = cfg.params["rho1"], cfg.params["rho2"]
    if rho1 is None or rho2 is None:
        raise ValidationError("cusp W-volume needs --rho1 and --rho2")
    truncation = CuspTruncation.from_radii(rho1, rho2)
    route = cfg.params["route"]
    ledger = LedgerConvention(cfg.params.get("ledger") or LedgerConvention.INVARIANT.value)
    if route == "polyakov":
        raise ValidationError("the cusp W-volume has routes direct and closed-form")
    reports = {}
    if route in ("closed-form", "both"):
        reports["closed-form"] = cusp_w_volume_for(truncation, ledger)
    if route in ("direct", "both"):
        reports["direct"] = w_volume(truncation.region(), cfg.quadrature, ledger=ledger)
    payload = {"model": "cusp", "rho1": rho1, "rho2": rho2, "ledger": ledger.value,
               "reports": {k: r.to_dict() for k, r in reports.items()}}
    if len(reports) == 2:
        a, b = reports["direct"].total_W, reports["closed-form"].total_W
        payload["delta"] = a - b
        payload["relative_delta"] = abs(a - b) / max(abs(b), 1e-300)
    rows = [{"route": k, "volume": r.volume, "H_integral": r.epstein_H_integral, "W": r.total_W,
             "error_estimate": r.error_estimate} for k, r in reports.items()]
    return CommandOutput(payload, rows)


def _tube_wvol(cfg: RunConfig) -> CommandOutput:
    if cfg.params["ell"] is None:
        raise ValidationError("tube W-volume needs --ell")
    spec = TubeSpec(cfg.params["ell"], cfg.params["eps"])
    route = cfg.params["route"]
    ledger = LedgerConvention(cfg.params.get("ledger") or LedgerConvention.INVARIANT.value)
    if route == "closed-form":
        raise ValidationError("the tube W-volume has routes direct and polyakov")
    if route == "both":
        comparison = compare_routes(spec, cfg.quadrature, ledger)
        reports = {"polyakov": comparison.polyakov, "direct": comparison.direct}
        payload = comparison.to_dict()
    else:
        report = tube_w_volume(spec, cfg.quadrature, TubeRoute(route), ledger)
        reports = {route: report}
        payload = {"tube": spec.to_dict(), route: report.to_dict()}
    rows = [{"route": k, "volume": r.volume, "H_integral": r.epstein_H_integral, "W": r.total_W,
             "error_estimate": r.error_estimate} for k, r in reports.items()]
    if cfg.params.get("asymptote"):
        # b(ε) in the asymptote is itemized, whatever ledger total_W uses
        asymptote = tube_wvol_asymptote(spec)
        payload["asymptote"] = asymptote
        payload["asymptote_boundary"] = tube_wvol_asymptote_boundary(spec)
        payload["residual"] = {k: r.itemized_W() - asymptote for k, r in reports.items()}
        for row, r in zip(rows, reports.values()):
            row["asymptote"] = asymptote
            row["residual"] = r.itemized_W() - asymptote
    return CommandOutput(payload, rows)


def cmd_wvol(cfg: RunConfig) -> CommandOutput:
    return _cusp_wvol(cfg) if cfg.params["model"] == "cusp" else _tube_wvol(cfg)


def cmd_renvol_limit(cfg: RunConfig) -> CommandOutput:
    schedule = parse_float_list(cfg.params.get("schedule"))
    if schedule is not None:
        check_monotone(schedule, "--schedule")
    if cfg.params["model"] == "cusp":
        result = truncated_cusp_renvol(cfg.params["eps_bar"], schedule, cfg.quadrature, strict=False)
        increments = [math.nan] + result.increments
        rows = [dict(row, increment=inc) for row, inc in zip(result.rows(), increments)]
        code = EXIT_OK if result.converged else EXIT_NONCONVERGENCE
        return CommandOutput(result.to_dict(), rows, code)

    study = tube_study(cfg.params["eps"], schedule or TUBE_DEFAULT_ELLS, cfg.quadrature, fit=False)
    payload = study.to_dict()
    code = EXIT_OK
    try:
        payload["rate"] = fit_remainder_order(study.ells, study.residuals).to_dict()
    except ConvergenceError as exc:
        logger.warning("tube residual fit failed: %s", exc)
        payload["rate"] = None
        payload["rate_error"] = str(exc)
        code = EXIT_NONCONVERGENCE
    return CommandOutput(payload, study.rows(), code)


def cmd_adapted(cfg: RunConfig) -> CommandOutput:
    system = load_curve_system(cfg.params["system"])
    result = correction_max(system, jobs=cfg.jobs)
    payload = {
        "genus_sum": system.genus_sum,
        "correction": result.to_dict(),
        "completed": complete_maximal(system, result.selection).to_dict(),
        "epsilon1": epsilon1_threshold(system.genus_sum),
        "marginal_values": {str(k): v for k, v in marginal_values(system).items()},
    }
    if cfg.params.get("base_vr") is not None:
        payload["adapted_value"] = adapted_value(cfg.params["base_vr"], system, jobs=cfg.jobs)
    rows = [{"optimum": i, "members": " ".join(str(m) for m in s.members), "value": s.value}
            for i, s in enumerate(result.optima)]
    return CommandOutput(payload, rows)


def cmd_check(cfg: RunConfig) -> CommandOutput:
    opts = AcceptanceOptions.quick() if cfg.params.get("quick") else AcceptanceOptions()
    report = run_acceptance(cfg.quadrature, opts)
    return CommandOutput(report.to_dict(), report.rows(), EXIT_OK if report.passed else EXIT_NONCONVERGENCE)


# ── Output ──────────────────────────────────────────────────────────────────

def render(output: CommandOutput, fmt: str) -> str:
    if fmt == "csv":
        frame = pd.DataFrame(output.rows, columns=output.columns)
        return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT)
    return json.dumps(output.payload, indent=2, sort_keys=True, default=str) + "\n"


def emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot write {out}: {exc}") from exc
    logger.info("wrote %s", out)


def report_error(exc: WorkbenchError) -> int:
    error = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    sys.stderr.write(json.dumps(error, sort_keys=True) + "\n")
    return exc.exit_code


# ── Parser ──────────────────────────────────────────────────────────────────

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=QUAD_REL_TOL, help="Relative quadrature tolerance.")
    p.add_argument("--out", type=Path, help="Write the report here instead of stdout.")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="Parallelism for cells and subtrees.")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Epstein surfaces, W-volumes and renormalized-volume studies.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {WORKBENCH_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    ep = sub.add_parser("epstein", help="Sample an Epstein surface on a polar grid.")
    ep.add_argument("--metric", choices=("cusp", "tube", "flat", "perturbed"), default="cusp")
    ep.add_argument("--ell", type=float, default=0.5)
    ep.add_argument("--eps", type=float, default=1.0)
    ep.add_argument("--psi", default="0.1", help="Coefficient a of ψ(z) = a·z for --metric perturbed.")
    ep.add_argument("--grid", default="0.05,0.2,10,10", help="rho_min,rho_max,radial,angular")
    _common(ep)
    ep.set_defaults(handler=cmd_epstein)

    wv = sub.add_parser("wvol", help="Itemised W-volume of a cusp or tube annulus.")
    wv.add_argument("--model", choices=("cusp", "tube"), default="cusp")
    wv.add_argument("--rho1", type=float)
    wv.add_argument("--rho2", type=float)
    wv.add_argument("--ell", type=float)
    wv.add_argument("--eps", type=float, default=TUBE_DEFAULT_EPS)
    wv.add_argument("--route", choices=("direct", "closed-form", "polyakov", "both"), default="direct")
    wv.add_argument("--asymptote", action="store_true", help="Report the residual against the tube asymptote.")
    wv.add_argument("--ledger", choices=[c.value for c in LedgerConvention], default=LedgerConvention.INVARIANT.value,
                    help="Items summed into total_W: the rescale-invariant ledger or the edge-itemized one.")
    _common(wv)
    wv.set_defaults(handler=cmd_wvol)

    rl = sub.add_parser("renvol-limit", help="Convergence table for a renormalized-volume limit.")
    rl.add_argument("--model", choices=("cusp", "tube"), default="cusp")
    rl.add_argument("--eps-bar", type=float, default=CUSP_DEFAULT_EPS_BAR)
    rl.add_argument("--eps", type=float, default=TUBE_DEFAULT_EPS)
    rl.add_argument("--schedule", help="Comma-separated radii (cusp) or core lengths (tube).")
    _common(rl)
    rl.set_defaults(handler=cmd_renvol_limit)

    ad = sub.add_parser("adapted", help="Maximize the multicurve correction of a curve system.")
    ad.add_argument("system", type=Path, help="CurveSystem JSON file.")
    ad.add_argument("--base-vr", type=float, help="Renormalized volume to correct.")
    _common(ad)
    ad.set_defaults(handler=cmd_adapted)

    ck = sub.add_parser("check", help="Run the acceptance suite.")
    ck.add_argument("--quick", action="store_true", help="Reduced sample counts.")
    _common(ck)
    ck.set_defaults(handler=cmd_check)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    _configure_logging(ns.verbose)
    handler: Callable[[RunConfig], CommandOutput] = ns.handler
    try:
        cfg = RunConfig.from_namespace(ns)
        output = handler(cfg)
        emit(render(output, cfg.fmt), cfg.out)
    except WorkbenchError as exc:
        return report_error(exc)
    return output.exit_code


if __name__ == "__main__":
    sys.exit(main())
