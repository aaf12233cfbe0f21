import math
import unittest

from errors import DomainError, ValidationError
from halfspace import (
    INFINITY,
    AnnulusDomain,
    ComplexPoint,
    DerivativeMode,
    HyperbolicPoint3,
    MoebiusMap,
    RadialField,
    RadialProfile,
    finite_difference_check,
    flat_metric,
    gaussian_curvature,
    hyp_distance,
    liouville_jet,
    moebius_apply,
    moebius_extend,
    radial_metric,
    sample_annulus,
)
from numerics import central_difference


def _cusp_profile():
    return RadialProfile(
        sigma=lambda x: -math.log(-x),
        sigma_x=lambda x: -1.0 / x,
        sigma_xx=lambda x: 1.0 / (x * x),
    )


class PointTests(unittest.TestCase):
    def test_polar_roundtrip(self):
        p = ComplexPoint.polar(2.0, 0.75)
        self.assertAlmostEqual(p.rho, 2.0, places=14)
        self.assertAlmostEqual(p.theta, 0.75, places=14)

    def test_angle_undefined_at_origin(self):
        with self.assertRaises(DomainError):
            ComplexPoint(0.0, 0.0).theta

    def test_height_must_be_positive(self):
        with self.assertRaises(ValidationError):
            HyperbolicPoint3.of(0j, 0.0)

    def test_vertical_distance_is_log_ratio(self):
        d = hyp_distance(HyperbolicPoint3.of(1j, 1.0), HyperbolicPoint3.of(1j, math.e))
        self.assertAlmostEqual(d, 1.0, places=14)

    def test_distance_symmetric_and_zero_on_diagonal(self):
        p, q = HyperbolicPoint3.of(0.3 + 0.1j, 0.5), HyperbolicPoint3.of(-1 + 2j, 3.0)
        self.assertEqual(hyp_distance(p, p), 0.0)
        self.assertAlmostEqual(hyp_distance(p, q), hyp_distance(q, p), places=14)


class MoebiusTests(unittest.TestCase):
    def test_normalised_to_unit_determinant(self):
        m = MoebiusMap(2, 3, 1, 4)
        self.assertAlmostEqual(abs(m.a * m.d - m.b * m.c - 1), 0.0, places=14)

    def test_singular_coefficients_rejected(self):
        with self.assertRaises(ValidationError):
            MoebiusMap(1, 2, 2, 4)

    def test_inverse_and_compose(self):
        m = MoebiusMap(1 + 1j, 2, 0.5j, 1)
        ident = m.compose(m.inverse())
        z = 0.3 - 0.7j
        self.assertAlmostEqual(abs(ident(z) - z), 0.0, places=12)

    def test_from_points(self):
        m = MoebiusMap.from_points(1j, 2.0, -1.0)
        self.assertAlmostEqual(abs(m(1j)), 0.0, places=12)
        self.assertAlmostEqual(abs(m(2.0) - 1.0), 0.0, places=12)
        self.assertIs(moebius_apply(m, -1.0), INFINITY)

    def test_infinity_maps_to_a_over_c(self):
        m = MoebiusMap(2, 1, 1, 1)
        image = moebius_apply(m, INFINITY)
        self.assertAlmostEqual(abs(image.value - 2.0), 0.0, places=12)
        self.assertIs(moebius_apply(MoebiusMap.translation(3), INFINITY), INFINITY)

    def test_extension_is_an_isometry(self):
        m = MoebiusMap(1 + 2j, -0.5, 0.3 - 1j, 2)
        p, q = HyperbolicPoint3.of(0.2 + 0.4j, 0.7), HyperbolicPoint3.of(-1.1 + 0.3j, 2.5)
        before = hyp_distance(p, q)
        after = hyp_distance(moebius_extend(m, p), moebius_extend(m, q))
        self.assertAlmostEqual(before, after, places=10)

    def test_extension_of_dilation_scales_height(self):
        p = moebius_extend(MoebiusMap.dilation(4.0), HyperbolicPoint3.of(1 + 1j, 0.5))
        self.assertAlmostEqual(abs(p.w - (4 + 4j)), 0.0, places=12)
        self.assertAlmostEqual(p.height, 2.0, places=12)


class DomainTests(unittest.TestCase):
    def test_contains_and_sector(self):
        annulus = AnnulusDomain(0.5, 2.0)
        self.assertTrue(annulus.contains(1j))
        self.assertFalse(annulus.contains(3.0))
        half = AnnulusDomain.half_plane_sector(0.5, 2.0)
        self.assertTrue(half.contains(1j))
        self.assertFalse(half.contains(-1j))

    def test_invalid_radii_rejected(self):
        with self.assertRaises(ValidationError):
            AnnulusDomain(2.0, 1.0)

    def test_punctured_annulus_has_no_inner_log_radius(self):
        with self.assertRaises(DomainError):
            AnnulusDomain(0.0, 1.0).log_radii()

    def test_sample_grid_lies_inside(self):
        domain = AnnulusDomain(0.1, 0.5)
        points = sample_annulus(domain, 5, 8, margin=1e-9)
        self.assertEqual(len(points), 40)
        self.assertTrue(all(domain.contains(complex(z)) for z in points))


class FieldTests(unittest.TestCase):
    def test_bump_derivatives(self):
        bump = RadialField.bump(-3.0, 1.5, 0.1)
        for x in (-4.0, -3.2, -2.1):
            self.assertAlmostEqual(bump.du(x), central_difference(bump.u, x, 1e-4), places=7)
            self.assertAlmostEqual(bump.d2u(x), central_difference(bump.u, x, 1e-3, derivative=2), places=5)
        self.assertEqual(bump(-5.0), 0.0)

    def test_affine_field(self):
        field = RadialField.affine(0.2, -0.03)
        for x in (-9.0, -4.0, -2.3):
            self.assertAlmostEqual(field(x), 0.2 - 0.03 * x, places=12)
            self.assertEqual(field.du(x), -0.03)
            self.assertEqual(field.d2u(x), 0.0)

    def test_bump_width_must_be_positive(self):
        with self.assertRaises(ValidationError):
            RadialField.bump(0.0, 0.0, 1.0)


class MetricTests(unittest.TestCase):
    def setUp(self):
        self.cusp = radial_metric(_cusp_profile(), AnnulusDomain(0.0, 1.0), name="cusp")

    def test_cusp_curvature_is_minus_one(self):
        for z in (0.1, 0.01j, 1e-5 * (1 + 1j), 0.2 - 0.1j):
            self.assertAlmostEqual(gaussian_curvature(self.cusp, z), -1.0, places=10)
            jet = liouville_jet(self.cusp, z)
            self.assertAlmostEqual(-4.0 * jet.phi_zzbar * math.exp(-2.0 * jet.phi), -1.0, places=10)

    def test_finite_differences_match_analytic_jets(self):
        points = [0.1, 0.02j, 0.05 * (1 - 1j)]
        self.assertLess(finite_difference_check(self.cusp, points), 1e-6)

    def test_finite_difference_mode_curvature(self):
        numeric = self.cusp.with_mode(DerivativeMode.FINITE_DIFFERENCE)
        self.assertAlmostEqual(gaussian_curvature(numeric, 0.05 + 0.05j), -1.0, places=5)

    def test_outside_domain_rejected(self):
        with self.assertRaises(DomainError):
            self.cusp.phi(1.5)

    def test_flat_metric(self):
        g = flat_metric(0.3)
        jet = liouville_jet(g, 1 + 1j)
        self.assertEqual(jet.q, 0j)
        self.assertEqual(gaussian_curvature(g, 2.0), 0.0)
        self.assertAlmostEqual(g.density(0.5), math.exp(0.6), places=14)

    def test_shift_adds_constant(self):
        shifted = self.cusp.shifted(0.5)
        self.assertAlmostEqual(shifted.phi(0.1) - self.cusp.phi(0.1), 0.5, places=14)
        self.assertAlmostEqual(gaussian_curvature(shifted, 0.1), -math.exp(-1.0), places=10)

    def test_pullback_by_dilation(self):
        g = flat_metric(0.0).pullback(MoebiusMap.dilation(2.0))
        self.assertAlmostEqual(g.phi(0.3 + 0.2j), math.log(2.0), places=12)

    def test_radial_field_requires_profile(self):
        with self.assertRaises(ValidationError):
            flat_metric().with_radial_field(RadialField.constant(1.0))


if __name__ == "__main__":
    unittest.main()
