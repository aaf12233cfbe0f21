import math
import unittest

import numpy as np

from errors import ConvergenceError, ValidationError
from numerics import (
    central_difference,
    central_weights,
    complex_derivatives,
    convergence_order,
    fit_remainder_order,
    linear_extrapolation,
    polynomial_extrapolation,
    schwarzian_derivative,
    successive_ratio,
    taylor_coefficients,
)


class FiniteDifferenceTests(unittest.TestCase):
    def test_first_derivative_stencil_is_exact_on_cubics(self):
        value = central_difference(lambda x: x ** 3 - 2 * x, 1.5, 0.1, derivative=1, order=4)
        self.assertAlmostEqual(value, 3 * 1.5 ** 2 - 2, places=10)

    def test_second_derivative_of_sine(self):
        value = central_difference(math.sin, 0.7, 1e-3, derivative=2, order=4)
        self.assertAlmostEqual(value, -math.sin(0.7), places=6)

    def test_weights_sum_to_zero(self):
        _, weights = central_weights(1, 6)
        self.assertAlmostEqual(sum(weights), 0.0, places=12)

    def test_unsupported_stencil_rejected(self):
        with self.assertRaises(ValidationError):
            central_weights(1, 3)

    def test_observed_order_of_fourth_order_stencil(self):
        steps = [0.1, 0.05, 0.025]
        errors = [abs(central_difference(math.exp, 0.3, h, 1, 4) - math.exp(0.3)) for h in steps]
        self.assertAlmostEqual(convergence_order(steps, errors), 4.0, delta=0.2)


class ContourDerivativeTests(unittest.TestCase):
    def test_taylor_coefficients_of_exponential(self):
        coeffs = taylor_coefficients(np.exp, 0.0, 1.0, count=5)
        for k, c in enumerate(coeffs):
            self.assertAlmostEqual(abs(c - 1.0 / math.factorial(k)), 0.0, places=12)

    def test_derivatives_of_log(self):
        z0 = 2.0 + 1.0j
        d = complex_derivatives(np.log, z0, 0.5, count=4)
        self.assertAlmostEqual(abs(d[1] - 1 / z0), 0.0, places=10)
        self.assertAlmostEqual(abs(d[2] + 1 / z0 ** 2), 0.0, places=10)
        self.assertAlmostEqual(abs(d[3] - 2 / z0 ** 3), 0.0, places=10)

    def test_schwarzian_of_power(self):
        # S(z^α) = (1 − α²)/(2z²)
        alpha, z0 = 3.0, 1.0 + 0.5j
        s = schwarzian_derivative(lambda w: np.exp(alpha * np.log(w)), z0, 0.3)
        expected = (1 - alpha ** 2) / (2 * z0 ** 2)
        self.assertLess(abs(s - expected) / abs(expected), 1e-9)

    def test_schwarzian_of_moebius_vanishes(self):
        s = schwarzian_derivative(lambda w: (2 * w + 1) / (w + 3), 0.5j, 0.5)
        self.assertLess(abs(s), 1e-10)

    def test_non_positive_radius_rejected(self):
        with self.assertRaises(ValidationError):
            taylor_coefficients(np.exp, 0.0, 0.0)


class LimitTests(unittest.TestCase):
    def test_fit_recovers_linear_remainder(self):
        h = [0.5, 0.25, 0.125, 0.0625, 0.03125]
        values = [3.0 + 2.0 * x for x in h]
        fit = fit_remainder_order(h, values)
        self.assertAlmostEqual(fit.limit, 3.0, places=6)
        self.assertAlmostEqual(fit.order, 1.0, delta=0.05)

    def test_fit_recovers_quadratic_remainder(self):
        h = [0.4, 0.2, 0.1, 0.05, 0.025]
        values = [-1.0 + 5.0 * x * x for x in h]
        fit = fit_remainder_order(h, values)
        self.assertAlmostEqual(fit.order, 2.0, delta=0.05)
        self.assertAlmostEqual(fit.limit, -1.0, places=6)

    def test_fit_needs_three_points(self):
        with self.assertRaises(ConvergenceError):
            fit_remainder_order([0.1, 0.05], [1.0, 1.1])

    def test_fit_rejects_non_finite_values(self):
        with self.assertRaises(ConvergenceError):
            fit_remainder_order([0.3, 0.2, 0.1], [1.0, float("nan"), 1.1])

    def test_extrapolants(self):
        h = [0.4, 0.2, 0.1, 0.05]
        values = [1.0 + x - x ** 2 for x in h]
        self.assertAlmostEqual(polynomial_extrapolation(h, values), 1.0, places=10)
        self.assertLess(abs(linear_extrapolation(h, values) - 1.0), 0.05)

    def test_successive_ratio_of_geometric_tail(self):
        self.assertAlmostEqual(successive_ratio([1.0, 0.5, 0.25]), 2.0)
        with self.assertRaises(ConvergenceError):
            successive_ratio([1.0, 1.0, 1.0])
        with self.assertRaises(ConvergenceError):
            successive_ratio([1.0, 2.0])


if __name__ == "__main__":
    unittest.main()
