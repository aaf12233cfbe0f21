import math
import unittest

from cusp_model import (
    LOG_RHO_MAX,
    CuspPerturbation,
    CuspTruncation,
    boundary_term_b,
    boundary_term_x,
    correction_c_x,
    cusp_epstein_coords,
    cusp_H_integral,
    cusp_volume,
    cusp_w_volume,
    eps_from_rho,
    i0_density,
    invariant_w_x,
    perturbed_cusp_renvol,
    renormalized_term,
    renormalized_term_eps,
    rho_from_eps,
    truncated_cusp_renvol,
    truncated_cusp_renvol_exact,
)
from errors import ConvergenceError, DomainError, ValidationError
from quadrature import QuadratureConfig
from wvolume import LedgerConvention, VolumeRoute, w_volume


class ConversionTests(unittest.TestCase):
    def test_length_and_radius_are_inverse(self):
        for eps in (0.1, 1.0, 3.0):
            self.assertAlmostEqual(eps_from_rho(rho_from_eps(eps)), eps, places=12)

    def test_density(self):
        rho = 0.1
        self.assertAlmostEqual(i0_density(rho * 1j), 1.0 / (rho * math.log(rho)) ** 2, places=8)
        with self.assertRaises(DomainError):
            i0_density(1.5)

    def test_epstein_point_crosses_axis_at_degenerate_circle(self):
        _, flipped_inside, _ = cusp_epstein_coords(1e-3)
        _, flipped_outside, _ = cusp_epstein_coords(0.5)
        self.assertTrue(flipped_inside)
        self.assertFalse(flipped_outside)


class ClosedFormTests(unittest.TestCase):
    def test_h_integral_value(self):
        # (π/12)(log³ρ₂ − log³ρ₁) with log radii −2 and −1
        self.assertAlmostEqual(cusp_H_integral(math.exp(-2), math.exp(-1)), 7 * math.pi / 12, places=12)
        self.assertEqual(cusp_H_integral(0.01, 0.01), 0.0)

    def test_radii_out_of_order(self):
        with self.assertRaises(ValidationError):
            cusp_volume(0.1, 0.01)

    def test_correction_decays_like_two_pi_over_x(self):
        x = -1e4
        self.assertAlmostEqual(correction_c_x(x) / (2 * math.pi / x), 1.0, places=6)

    def test_engine_matches_closed_forms(self):
        cfg = QuadratureConfig()
        for rho1, rho2 in ((1e-6, 0.05), (1e-3, 0.2), (1e-9, 1e-4)):
            region = CuspTruncation.from_radii(rho1, rho2).region()
            report = w_volume(region, cfg)
            self.assertLess(abs(report.volume / cusp_volume(rho1, rho2) - 1.0), 1e-6)
            self.assertLess(abs(report.epstein_H_integral / cusp_H_integral(rho1, rho2) - 1.0), 1e-7)

    def test_closed_form_report_matches_engine_total(self):
        closed = cusp_w_volume(1e-4, 0.1)
        numeric = w_volume(CuspTruncation.from_radii(1e-4, 0.1).region(), QuadratureConfig())
        self.assertEqual(closed.route, VolumeRoute.CLOSED_FORM.value)
        self.assertAlmostEqual(closed.total_W / numeric.total_W, 1.0, places=6)
        self.assertEqual(closed.total_W, closed.ledger_total())

    def test_invariant_total_is_closed_form(self):
        for rho1, rho2 in ((1e-4, 0.1), (1e-9, 1e-4), (1e-30, 1e-3)):
            total = cusp_w_volume(rho1, rho2).total_W
            expected = invariant_w_x(math.log(rho1), math.log(rho2))
            self.assertAlmostEqual(total, expected, delta=1e-9 * max(1.0, abs(expected)))
        self.assertEqual(invariant_w_x(-3.0, -3.0), 0.0)

    def test_itemized_report_matches_engine(self):
        itemized = LedgerConvention.ITEMIZED
        closed = cusp_w_volume(1e-4, 0.1, itemized)
        numeric = w_volume(CuspTruncation.from_radii(1e-4, 0.1).region(), QuadratureConfig(), ledger=itemized)
        self.assertEqual(closed.ledger, "itemized")
        self.assertAlmostEqual(closed.total_W / numeric.total_W, 1.0, places=6)
        self.assertEqual(closed.total_W, closed.itemized_W())

    def test_invariant_boundary_items_decay(self):
        # ½∫H da + Vol(P) = −(3π/2)/log ρ + O(log⁻³ ρ)
        rho = 1e-30
        scaled = boundary_term_b(rho, LedgerConvention.INVARIANT) * math.log(rho)
        self.assertAlmostEqual(scaled, -1.5 * math.pi, delta=1e-2)
        for small in (1e-3, 1e-6):
            self.assertLess(abs(boundary_term_b(small, LedgerConvention.INVARIANT)),
                            abs(boundary_term_b(small)) / 10.0)

    def test_boundary_term_domain(self):
        self.assertEqual(boundary_term_b(0.01), boundary_term_x(math.log(0.01)))
        with self.assertRaises(DomainError):
            boundary_term_b(0.5)


class TruncationTests(unittest.TestCase):
    def test_from_lengths(self):
        t = CuspTruncation.from_lengths(0.5, 2.0)
        self.assertAlmostEqual(t.eps, 0.5, places=12)
        self.assertAlmostEqual(t.eps_bar, 2.0, places=12)
        self.assertLess(t.rho1, t.rho2)

    def test_invalid_truncations(self):
        with self.assertRaises(ValidationError):
            CuspTruncation.from_lengths(2.0, 1.0)
        with self.assertRaises(ValidationError):
            CuspTruncation(-5.0, LOG_RHO_MAX + 0.1)
        with self.assertRaises(DomainError):
            CuspTruncation.from_radii(0.0, 0.1)

    def test_radius_and_length_forms_agree(self):
        for eps in (0.5, 0.1, 0.01):
            t = CuspTruncation.from_lengths(eps, 2.0)
            self.assertAlmostEqual(renormalized_term(t), renormalized_term_eps(t), places=8)


class RenvolLimitTests(unittest.TestCase):
    def test_sequence_converges_to_closed_form(self):
        result = truncated_cusp_renvol(2.0)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.rate.order, 1.0, delta=0.2)
        self.assertAlmostEqual(result.limit_estimate, result.exact_limit, delta=1e-3)
        self.assertEqual(result.exact_limit, truncated_cusp_renvol_exact(2.0))

    def test_increments_shrink(self):
        result = truncated_cusp_renvol(2.0)
        increments = [abs(d) for d in result.increments]
        self.assertTrue(all(b < a for a, b in zip(increments, increments[1:])))

    def test_shell_route_agrees_with_closed_forms(self):
        schedule = [1e-2, 1e-3, 1e-4]
        closed = truncated_cusp_renvol(2.0, schedule, strict=False)
        numeric = truncated_cusp_renvol(2.0, schedule, route=VolumeRoute.SHELL, strict=False)
        for a, b in zip(closed.values, numeric.values):
            self.assertAlmostEqual(a, b, delta=1e-5 * max(1.0, abs(a)))

    def test_parallel_schedule_matches_serial(self):
        serial = truncated_cusp_renvol(2.0)
        parallel = truncated_cusp_renvol(2.0, cfg=QuadratureConfig(jobs=3))
        self.assertEqual(serial.values, parallel.values)

    def test_schedule_outside_outer_circle_rejected(self):
        with self.assertRaises(ValidationError):
            truncated_cusp_renvol(2.0, schedule=[0.1, 1e-3, 1e-4])

    def test_short_schedule_cannot_be_fitted(self):
        with self.assertRaises(ConvergenceError):
            truncated_cusp_renvol(2.0, schedule=[1e-3, 1e-4])


class PerturbationTests(unittest.TestCase):
    def test_psi_must_vanish_at_origin(self):
        with self.assertRaises(ValidationError):
            CuspPerturbation(lambda z: 1 + z, lambda z: 1 + 0j, lambda z: 0j)

    def test_nu_vanishes_linearly(self):
        ratio = CuspPerturbation.linear(0.1).vanishing_ratio()
        self.assertGreater(ratio, 0.0)
        self.assertLess(ratio, 0.2)
        self.assertEqual(CuspPerturbation.zero().nu(0.01), 0.0)

    def test_zero_perturbation_reproduces_cusp(self):
        schedule = [1e-3, 1e-4, 1e-5, 1e-6]
        base = truncated_cusp_renvol(2.0, schedule)
        perturbed = perturbed_cusp_renvol(CuspPerturbation.zero(), 2.0, schedule)
        for a, b in zip(base.values, perturbed.values):
            self.assertAlmostEqual(a, b, places=10)

    def test_small_perturbation_has_finite_limit(self):
        schedule = [1e-3, 1e-4, 1e-5, 1e-6]
        base = truncated_cusp_renvol(2.0, schedule)
        perturbed = perturbed_cusp_renvol(CuspPerturbation.linear(0.05), 2.0, schedule, strict=False)
        self.assertTrue(math.isfinite(perturbed.limit_estimate))
        self.assertLess(abs(perturbed.limit_estimate - base.limit_estimate), 0.5)


if __name__ == "__main__":
    unittest.main()
