import math
import unittest

import numpy as np

from errors import QuadratureError, ValidationError
from quadrature import (
    QuadratureConfig,
    cell_edges,
    integrate_1d,
    integrate_cylinder,
    integrate_rectangle,
    periodic_mean,
)


class QuadratureConfigTests(unittest.TestCase):
    def test_invalid_settings_rejected(self):
        with self.assertRaises(ValidationError):
            QuadratureConfig(rel_tol=0.0)
        with self.assertRaises(ValidationError):
            QuadratureConfig(jobs=0)
        with self.assertRaises(ValidationError):
            QuadratureConfig(angular_nodes=2)

    def test_halved_tightens_only_rel_tol(self):
        cfg = QuadratureConfig(rel_tol=1e-6, cells=3)
        tighter = cfg.halved()
        self.assertEqual(tighter.rel_tol, 5e-7)
        self.assertEqual(tighter.cells, 3)


class Integrate1dTests(unittest.TestCase):
    def test_polynomial(self):
        result = integrate_1d(lambda x: x ** 3, 0.0, 2.0, QuadratureConfig())
        self.assertAlmostEqual(result.value, 4.0, places=12)
        self.assertLess(result.error, 1e-9)

    def test_empty_and_reversed_intervals(self):
        cfg = QuadratureConfig()
        self.assertEqual(integrate_1d(math.exp, 1.0, 1.0, cfg).value, 0.0)
        forward = integrate_1d(math.exp, 0.0, 1.0, cfg).value
        backward = integrate_1d(math.exp, 1.0, 0.0, cfg).value
        self.assertAlmostEqual(forward, -backward, places=14)

    def test_breakpoints_are_merged(self):
        edges = cell_edges(0.0, 1.0, 2, breakpoints=(0.25, 2.0))
        self.assertEqual(edges, [0.0, 0.25, 0.5, 1.0])

    def test_parallel_total_is_bit_identical(self):
        func = lambda x: math.sin(3 * x) * math.exp(-x)
        serial = integrate_1d(func, 0.0, 5.0, QuadratureConfig(jobs=1))
        parallel = integrate_1d(func, 0.0, 5.0, QuadratureConfig(jobs=4))
        self.assertEqual(serial.value, parallel.value)

    def test_non_finite_integrand_raises(self):
        cfg = QuadratureConfig(max_depth=1)
        with self.assertRaises(QuadratureError):
            integrate_1d(lambda x: float("nan"), 0.0, 1.0, cfg)


class PeriodicTests(unittest.TestCase):
    def test_trapezoid_is_exact_for_trigonometric_polynomials(self):
        mean = periodic_mean(lambda t: 1.0 + np.cos(t) ** 2, 16)
        self.assertAlmostEqual(mean, 1.5, places=14)

    def test_cylinder_integral(self):
        # ∫_0^1 ∫_0^{2π} x(1 + sin θ) dθ dx = π
        result = integrate_cylinder(lambda x, t: x * (1.0 + np.sin(t)), 0.0, 1.0, QuadratureConfig())
        self.assertAlmostEqual(result.value, math.pi, places=10)

    def test_rectangle_integral(self):
        result = integrate_rectangle(lambda x, y: x * y, (0.0, 1.0), (0.0, 2.0), QuadratureConfig())
        self.assertAlmostEqual(result.value, 1.0, places=10)


if __name__ == "__main__":
    unittest.main()
