import contextlib
import csv
import io
import json
import math
import os
import tempfile
import unittest
from dataclasses import replace
from unittest import mock

import acceptance
import cli
from acceptance import CriterionResult
from cusp_model import cusp_w_volume, truncated_cusp_renvol
from tube_model import TubeSpec, tube_wvol_asymptote
from wvolume import LedgerConvention, WVolumeReport


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(list(argv))
    return code, out.getvalue(), err.getvalue()


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class EpsteinCommandTests(unittest.TestCase):
    def test_flat_metric_grid(self):
        code, out, _ = _run("epstein", "--metric", "flat", "--grid", "0.5,1.0,2,3")
        self.assertEqual(code, 0)
        points = json.loads(out)["points"]
        self.assertEqual(len(points), 6)
        for p in points:
            self.assertAlmostEqual(p["t"], 2.0, places=12)
            self.assertAlmostEqual(p["H"], 1.0, places=12)

    def test_empty_grid_gives_header_only(self):
        code, out, _ = _run("epstein", "--grid", "0.05,0.1,0,4", "--format", "csv")
        self.assertEqual(code, 0)
        lines = out.strip().splitlines()
        self.assertEqual(lines, [",".join(cli.EPSTEIN_COLUMNS)])

    def test_zero_radius_is_a_validation_error(self):
        code, out, err = _run("epstein", "--grid", "0,0.1,3,3")
        self.assertEqual(code, 2)
        self.assertEqual(out, "")
        error = json.loads(err.strip().splitlines()[-1])
        self.assertEqual(error["error"], "ValidationError")
        self.assertEqual(error["exit_code"], 2)

    def test_points_outside_the_cusp_are_rejected(self):
        code, _, err = _run("epstein", "--metric", "cusp", "--grid", "0.5,1.5,2,2")
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "DomainError")


class WvolCommandTests(unittest.TestCase):
    def test_cusp_routes_agree(self):
        code, out, _ = _run("wvol", "--model", "cusp", "--rho1", "1e-4", "--rho2", "0.1", "--route", "both")
        self.assertEqual(code, 0)
        payload = json.loads(out)
        self.assertEqual(sorted(payload["reports"]), ["closed-form", "direct"])
        self.assertLess(payload["relative_delta"], 1e-6)

    def test_csv_keeps_full_precision(self):
        code, out, _ = _run("wvol", "--model", "cusp", "--rho1", "1e-4", "--rho2", "0.1",
                            "--route", "closed-form", "--format", "csv")
        self.assertEqual(code, 0)
        rows = _csv_rows(out)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["route"], "closed-form")
        self.assertEqual(float(rows[0]["W"]), cusp_w_volume(1e-4, 0.1).total_W)

    def test_invalid_cusp_requests(self):
        for argv in (
            ("wvol", "--model", "cusp", "--rho1", "1e-4"),
            ("wvol", "--model", "cusp", "--rho1", "0.1", "--rho2", "1e-4"),
            ("wvol", "--model", "cusp", "--rho1", "1e-4", "--rho2", "0.1", "--route", "polyakov"),
            ("wvol", "--model", "tube", "--ell", "0.1", "--route", "closed-form"),
            ("wvol", "--model", "tube", "--ell", "0.8", "--eps", "0.5"),
        ):
            self.assertEqual(_run(*argv)[0], 2, argv)

    def test_tube_asymptote_residual(self):
        code, out, _ = _run("wvol", "--model", "tube", "--ell", "0.1", "--eps", "0.5",
                            "--route", "polyakov", "--asymptote")
        self.assertEqual(code, 0)
        payload = json.loads(out)
        report = WVolumeReport.from_dict(payload["polyakov"])
        self.assertEqual(report.ledger, "invariant")
        self.assertAlmostEqual(payload["residual"]["polyakov"], report.itemized_W() - payload["asymptote"], places=9)
        self.assertAlmostEqual(payload["asymptote"], tube_wvol_asymptote(TubeSpec(0.1, 0.5)), places=12)
        self.assertIn("asymptote_boundary", payload)

    def test_ledger_option(self):
        base = ("wvol", "--model", "cusp", "--rho1", "1e-4", "--rho2", "0.1", "--route", "closed-form")
        code, out, _ = _run(*base, "--ledger", "itemized")
        self.assertEqual(code, 0)
        payload = json.loads(out)
        self.assertEqual(payload["ledger"], "itemized")
        itemized = cusp_w_volume(1e-4, 0.1, LedgerConvention.ITEMIZED).total_W
        self.assertAlmostEqual(payload["reports"]["closed-form"]["total_W"], itemized, places=12)
        self.assertEqual(json.loads(_run(*base)[1])["ledger"], "invariant")
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                cli.main([*base, "--ledger", "mixed"])


class RenvolCommandTests(unittest.TestCase):
    def test_cusp_table(self):
        code, out, _ = _run("renvol-limit", "--model", "cusp", "--format", "csv")
        self.assertEqual(code, 0)
        rows = _csv_rows(out)
        self.assertEqual(len(rows), 7)
        self.assertEqual(rows[0]["increment"], "")
        self.assertIn("value", rows[0])

    def test_schedule_must_be_monotone(self):
        code, _, _ = _run("renvol-limit", "--schedule", "1e-3,1e-2,1e-4")
        self.assertEqual(code, 2)

    def test_unfittable_schedule_is_non_convergence(self):
        code, _, err = _run("renvol-limit", "--schedule", "1e-3,1e-4")
        self.assertEqual(code, 3)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "ConvergenceError")

    def test_slow_sequence_still_emits_its_table(self):
        stalled = replace(truncated_cusp_renvol(2.0), converged=False)
        with mock.patch.object(cli, "truncated_cusp_renvol", return_value=stalled):
            code, out, _ = _run("renvol-limit")
        self.assertEqual(code, 3)
        self.assertFalse(json.loads(out)["converged"])


class AdaptedCommandTests(unittest.TestCase):
    SYSTEM = {
        "genus_sum": 2,
        "curves": [
            {"id": "a", "length": 2.0},
            {"id": "b", "length": 2.5},
            {"id": "c", "length": 0.3},
            {"id": "d", "length": 3.0, "compressible": False},
        ],
        "intersections": [["a", "b"], ["b", "d"]],
    }

    def test_report_written_to_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            system = os.path.join(tmp, "system.json")
            target = os.path.join(tmp, "reports", "adapted.json")
            with open(system, "w", encoding="utf-8") as handle:
                json.dump(self.SYSTEM, handle)
            code, out, _ = _run("adapted", system, "--base-vr", "1.5", "--out", target)
            self.assertEqual(code, 0)
            self.assertEqual(out, "")
            with open(target, encoding="utf-8") as handle:
                payload = json.load(handle)
        self.assertEqual(payload["correction"]["optima"][0]["members"], ["a", "c"])
        self.assertEqual(payload["completed"]["members"], ["a", "c", "d"])
        self.assertAlmostEqual(payload["adapted_value"], 1.5 + payload["correction"]["value"], places=9)
        self.assertEqual(payload["marginal_values"]["d"], 0.0)

    def test_short_crossing_system_from_file(self):
        system = {
            "genus_sum": 2,
            "curves": [{"id": 1, "length": 0.1}, {"id": 2, "length": 0.2}, {"id": 3, "length": 0.5}],
            "intersections": [[1, 2]],
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "system.json")
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(system, handle)
            code, out, _ = _run("adapted", path)
        self.assertEqual(code, 0)
        payload = json.loads(out)
        self.assertEqual(payload["correction"]["optima"][0]["members"], [1, 3])
        self.assertAlmostEqual(payload["correction"]["value"], 12.0 * math.pi ** 3, places=9)
        self.assertAlmostEqual(payload["marginal_values"]["1"], 10.0 * math.pi ** 3, places=9)

    def test_missing_system_file(self):
        code, _, _ = _run("adapted", os.path.join(tempfile.gettempdir(), "no-such-system.json"))
        self.assertEqual(code, 2)


class CheckCommandTests(unittest.TestCase):
    def test_exit_code_follows_suite(self):
        passing = lambda opts, cfg: CriterionResult("ok", 0.0, 1.0, True)
        failing = lambda opts, cfg: CriterionResult("bad", 2.0, 1.0, False)
        with mock.patch.object(acceptance, "CRITERIA", [passing]):
            self.assertEqual(_run("check", "--quick")[0], 0)
        with mock.patch.object(acceptance, "CRITERIA", [passing, failing]):
            code, out, _ = _run("check", "--quick", "--format", "csv")
        self.assertEqual(code, 3)
        self.assertEqual([r["passed"] for r in _csv_rows(out)], ["True", "False"])


class OptionTests(unittest.TestCase):
    def test_common_option_validation(self):
        self.assertEqual(_run("epstein", "--jobs", "0")[0], 2)
        self.assertEqual(_run("epstein", "--tol", "-1")[0], 2)

    def test_unknown_format_is_a_usage_error(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                cli.main(["epstein", "--format", "xml"])
        self.assertEqual(ctx.exception.code, 2)

    def test_parse_helpers(self):
        self.assertEqual(cli.parse_float_list("1e-2, 1e-3"), [1e-2, 1e-3])
        self.assertIsNone(cli.parse_float_list(""))
        self.assertEqual(cli.parse_complex("0.1 + 0.2j"), 0.1 + 0.2j)
        with self.assertRaises(cli.ValidationError):
            cli.parse_grid("0.1,0.2,3")


if __name__ == "__main__":
    unittest.main()
