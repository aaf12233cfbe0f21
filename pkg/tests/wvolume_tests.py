import math
import unittest
from dataclasses import replace

from cusp_model import CUSP_PROFILE, CuspTruncation, cusp_metric
from errors import NonEmbeddedSurfaceError, ValidationError
from halfspace import AnnulusDomain, ConformalMetric, RadialField, profile_jet
from quadrature import QuadratureConfig
from wvolume import (
    BoundaryCircle,
    LedgerConvention,
    RegionSpec,
    VolumeRoute,
    WVolumeReport,
    boundary_from_samples,
    boundary_term,
    caterpillar_H_integral,
    caterpillar_H_integral_quadrature,
    caterpillar_half_h_integral,
    caterpillar_meeting_angle,
    caterpillar_point,
    caterpillar_volume,
    caterpillar_volume_exact,
    direct_delta,
    edge_length,
    edge_length_from_caterpillar,
    edge_term,
    polyakov_delta,
    radial_w_closed_form,
    rescale_identity_check,
    w_volume,
)


def _cusp_region(rho1=1e-4, rho2=0.1):
    return CuspTruncation.from_radii(rho1, rho2).region()


class BoundaryItemTests(unittest.TestCase):
    def setUp(self):
        self.boundary = BoundaryCircle(math.log(0.05), -math.log(-math.log(0.05)), -1.0 / math.log(0.05))

    def test_caterpillar_integral_matches_quadrature(self):
        cfg = QuadratureConfig()
        for b in (self.boundary, self.boundary.reversed()):
            self.assertAlmostEqual(
                caterpillar_H_integral(b) / caterpillar_H_integral_quadrature(b, cfg), 1.0, places=9
            )

    def test_orientation_flips_sign(self):
        self.assertEqual(caterpillar_H_integral(self.boundary), -caterpillar_H_integral(self.boundary.reversed()))

    def test_edge_length_from_caterpillar(self):
        self.assertAlmostEqual(edge_length(self.boundary) / edge_length_from_caterpillar(self.boundary), 1.0,
                               places=12)

    def test_edge_term_validation(self):
        self.assertAlmostEqual(edge_term(math.pi / 2, 4.0), math.pi / 2)
        self.assertEqual(edge_term(math.pi, 0.0), 0.0)
        with self.assertRaises(ValidationError):
            edge_term(0.0, 1.0)
        with self.assertRaises(ValidationError):
            edge_term(1.0, -1.0)

    def test_boundary_term_is_sum_of_items(self):
        expected = caterpillar_half_h_integral(self.boundary) + edge_term(math.pi / 2, edge_length(self.boundary))
        self.assertEqual(boundary_term(self.boundary), expected)
        invariant = caterpillar_half_h_integral(self.boundary) + caterpillar_volume_exact(self.boundary)
        self.assertEqual(boundary_term(self.boundary, LedgerConvention.INVARIANT), invariant)

    def test_caterpillar_volume_closed_form(self):
        cfg = QuadratureConfig(rel_tol=1e-11)
        for b in (self.boundary, BoundaryCircle(0.3, 0.2, 0.4), BoundaryCircle(-1.0, -0.5, -0.3)):
            exact = caterpillar_volume_exact(b)
            self.assertAlmostEqual(exact, caterpillar_volume(b, cfg), delta=1e-9 * max(1.0, abs(exact)))

    def test_caterpillar_reaches_dome_at_right_angle(self):
        self.assertAlmostEqual(caterpillar_meeting_angle(self.boundary), math.pi / 2, places=9)

    def test_caterpillar_parameter_range(self):
        p = caterpillar_point(self.boundary, 0.0, self.boundary.v_plane)
        self.assertGreater(p.height, 0.0)
        with self.assertRaises(ValidationError):
            caterpillar_point(self.boundary, 0.0, 10.0 * max(self.boundary.v_plane, self.boundary.v_surface))

    def test_orientation_flag_validated(self):
        with self.assertRaises(ValidationError):
            BoundaryCircle(0.0, 0.0, 0.0, orientation=0)


class RegionTests(unittest.TestCase):
    def test_radii_order(self):
        with self.assertRaises(ValidationError):
            RegionSpec.annulus(cusp_metric(), 0.1, 0.01)
        with self.assertRaises(ValidationError):
            RegionSpec.annulus(cusp_metric(), 0.0, 0.01)

    def test_annulus_euler_characteristic(self):
        with self.assertRaises(ValidationError):
            RegionSpec(cusp_metric(), -5.0, -3.0, euler_characteristic=1)

    def test_degenerate_region_has_zero_report(self):
        region = RegionSpec(cusp_metric(), -4.0, -4.0)
        report = w_volume(region, QuadratureConfig())
        self.assertEqual(report.total_W, 0.0)
        self.assertEqual(report.volume, 0.0)


class EngineTests(unittest.TestCase):
    def setUp(self):
        self.cfg = QuadratureConfig()

    def test_ledger_closes(self):
        report = w_volume(_cusp_region(), self.cfg)
        self.assertEqual(report.route, VolumeRoute.SHELL.value)
        self.assertEqual(report.total_W, report.ledger_total())
        self.assertEqual(len(report.caterpillar_terms), 2)
        gap = math.fsum(report.caterpillar_volumes) - math.fsum(report.edge_terms)
        self.assertAlmostEqual(report.itemized_W() - report.invariant_W(), gap, places=9)
        itemized = report.with_ledger(LedgerConvention.ITEMIZED)
        self.assertEqual(itemized.ledger, "itemized")
        self.assertEqual(itemized.total_W, report.itemized_W())
        self.assertEqual(w_volume(_cusp_region(), self.cfg, ledger=LedgerConvention.ITEMIZED).total_W,
                         itemized.total_W)

    def test_invariant_total_matches_closed_form(self):
        for region in (_cusp_region(), _cusp_region(1e-3, 0.05)):
            total = w_volume(region, self.cfg).total_W
            self.assertAlmostEqual(total, radial_w_closed_form(region, self.cfg), delta=1e-7 * max(1.0, abs(total)))
        with self.assertRaises(ValidationError):
            radial_w_closed_form(RegionSpec(ConformalMetric(liouville=lambda z: z.real, name="tilted"), -2.0, -1.0),
                                 self.cfg)

    def test_split_telescopes(self):
        region = _cusp_region()
        inner, outer = region.split(math.log(3e-3))
        for ledger in LedgerConvention:
            whole = w_volume(region, self.cfg, ledger=ledger).total_W
            parts = w_volume(inner, self.cfg, ledger=ledger).total_W + w_volume(outer, self.cfg, ledger=ledger).total_W
            self.assertAlmostEqual(whole, parts, delta=1e-8 * max(1.0, abs(whole)))

    def test_one_plus_h_terms_are_optional(self):
        region = _cusp_region()
        plain = w_volume(region, self.cfg)
        full = w_volume(region, self.cfg, include_one_plus_h=True)
        self.assertAlmostEqual(plain.total_W - full.total_W, math.fsum(full.one_plus_h_terms), places=9)

    def test_report_dict_roundtrip(self):
        report = w_volume(_cusp_region(), self.cfg)
        self.assertEqual(WVolumeReport.from_dict(report.to_dict()), report)

    def test_cylinder_route_matches_shell_route(self):
        region = _cusp_region(1e-3, 0.1)
        general = ConformalMetric(
            liouville=cusp_metric().liouville,
            domain=AnnulusDomain(0.0, 1.0),
            jet=lambda z: profile_jet(CUSP_PROFILE, z),
            name="cusp-cartesian",
        )
        cylinder = w_volume(replace(region, metric=general), QuadratureConfig(rel_tol=1e-9))
        shell = w_volume(region, self.cfg)
        self.assertEqual(cylinder.route, VolumeRoute.CYLINDER.value)
        self.assertAlmostEqual(cylinder.total_W / shell.total_W, 1.0, places=6)

    def test_region_across_degenerate_circle_is_rejected(self):
        with self.assertRaises(NonEmbeddedSurfaceError):
            w_volume(RegionSpec(cusp_metric(), -3.0, -1.0), self.cfg)

    def test_rotationally_varying_boundary_data_rejected(self):
        metric = ConformalMetric(liouville=lambda z: z.real, name="tilted")
        with self.assertRaises(ValidationError):
            boundary_from_samples(metric, 0.0, 1, 16)


class PolyakovTests(unittest.TestCase):
    def setUp(self):
        self.cfg = QuadratureConfig()
        self.region = _cusp_region()

    def test_interior_bump_matches_direct_difference(self):
        u = RadialField.bump(-5.5, 1.8, 0.08)
        predicted = polyakov_delta(self.region.metric, u, self.region, self.cfg)
        direct = direct_delta(self.region, u, self.cfg)
        self.assertLess(abs(predicted - direct), 1e-3 * abs(direct))

    def test_constant_rescale_on_annulus(self):
        for r in (0.25, 0.5, -0.3, -1.0):
            lhs, rhs = rescale_identity_check(self.region, r, self.cfg)
            self.assertEqual(rhs, 0.0)
            self.assertLess(abs(lhs), 1e-8)
        self.assertEqual(rescale_identity_check(self.region, 0.0, self.cfg), (0.0, 0.0))

    def test_rescale_past_degenerate_circle_asks_for_offset(self):
        with self.assertRaises(NonEmbeddedSurfaceError) as ctx:
            rescale_identity_check(self.region, 1.0, self.cfg)
        self.assertIn("offset both metrics", str(ctx.exception))

    def test_itemized_rescale_moves_only_boundary_items(self):
        itemized = LedgerConvention.ITEMIZED
        shift = direct_delta(self.region, 0.5, self.cfg, itemized)
        base = w_volume(self.region, self.cfg, ledger=itemized)
        after = w_volume(replace(self.region, metric=self.region.metric.shifted(0.5)), self.cfg, ledger=itemized)

        def items(report):
            return math.fsum(report.caterpillar_volumes) - math.fsum(report.edge_terms)

        self.assertGreater(abs(shift), 1e-3)
        self.assertAlmostEqual(shift, items(after) - items(base), delta=1e-8)

    def test_affine_field_matches_direct_difference(self):
        for u in (RadialField.affine(0.2, 0.03), RadialField.affine(-0.25, -0.04)):
            predicted = polyakov_delta(self.region.metric, u, self.region, self.cfg)
            direct = direct_delta(self.region, u, self.cfg)
            self.assertLess(abs(predicted - direct), 1e-3 * abs(direct))

    def test_degenerate_region_has_no_variation(self):
        region = RegionSpec(cusp_metric(), -4.0, -4.0)
        self.assertEqual(polyakov_delta(cusp_metric(), 1.0, region, self.cfg), 0.0)


if __name__ == "__main__":
    unittest.main()
