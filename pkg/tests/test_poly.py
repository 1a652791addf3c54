import math

import numpy as np
from django.test import SimpleTestCase

from closures import poly
from closures.poly import Polynomial


def power_sum(coeffs, x):
    return sum(c * x ** k for k, c in enumerate(coeffs))


class PolynomialEvaluationTest(SimpleTestCase):
    """Horner evaluation against direct examples and a power-sum oracle"""

    def test_linear(self):
        """Test evaluating a linear polynomial"""
        self.assertEqual(poly.evaluate(Polynomial([1, 1]), 2.0), 3.0)

    def test_zero_polynomial(self):
        self.assertEqual(poly.evaluate(Polynomial([0]), 7.5), 0.0)
        self.assertEqual(Polynomial([]).coeffs, (0.0,))

    def test_root_of_beta_3(self):
        beta3 = Polynomial([1.0, 1.0, 1.0 / 3.0, 1.0 / 27.0])
        self.assertAlmostEqual(poly.evaluate(beta3, -3.0), 0.0, places=12)

    def test_array_input(self):
        values = poly.evaluate(Polynomial([1, 0, 1]), np.array([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(values, [1.0, 2.0, 5.0])

    def test_non_finite_propagates(self):
        self.assertTrue(math.isnan(poly.evaluate(Polynomial([1, 1]), math.nan)))

    def test_matches_power_sum(self):
        """Test Horner evaluation against a direct power sum for degrees up to 25"""
        rng = np.random.default_rng(7)
        for _ in range(50):
            degree = int(rng.integers(0, 26))
            coeffs = rng.normal(size=degree + 1)
            x = float(rng.uniform(-20, 20))
            scale = power_sum(np.abs(coeffs), abs(x))
            self.assertLessEqual(abs(poly.evaluate(Polynomial(coeffs), x) - power_sum(coeffs, x)), 1e-12 * scale)


class PolynomialArithmeticTest(SimpleTestCase):
    """Derivative, antiderivative and ring operations"""

    def test_derivative_of_constant(self):
        self.assertEqual(poly.derivative(Polynomial([5])).coeffs, (0.0,))

    def test_derivative_of_square(self):
        self.assertEqual(poly.derivative(Polynomial([0, 0, 1])).coeffs, (0.0, 2.0))

    def test_antiderivative(self):
        self.assertEqual(poly.antiderivative(Polynomial([1]), 0).coeffs, (0.0, 1.0))
        self.assertEqual(poly.antiderivative(Polynomial([0, 2]), 5).coeffs, (5.0, 0.0, 1.0))

    def test_multiply_and_add(self):
        self.assertEqual(poly.multiply(Polynomial([0, 1]), Polynomial([0, 1])).coeffs, (0.0, 0.0, 1.0))
        self.assertEqual(poly.add(Polynomial([1]), Polynomial([-1])).coeffs, (0.0,))
        a0, a1 = 1.5, -2.0
        square = Polynomial([a0, a1]) * Polynomial([a0, a1])
        self.assertEqual(square.coeffs, (a0 * a0, 2 * a0 * a1, a1 * a1))

    def test_operators(self):
        p = Polynomial([1, 2])
        q = Polynomial([0, 0, 3])
        self.assertEqual((p + q).coeffs, (1.0, 2.0, 3.0))
        self.assertEqual((q - p).coeffs, (-1.0, -2.0, 3.0))
        self.assertEqual((2 * p).coeffs, (2.0, 4.0))
        self.assertEqual(p(1.0), 3.0)

    def test_round_trip_through_derivative(self):
        """Test that integrating the derivative recovers the polynomial"""
        rng = np.random.default_rng(11)
        for _ in range(20):
            p = Polynomial(rng.normal(size=int(rng.integers(1, 26))))
            back = poly.antiderivative(poly.derivative(p), poly.evaluate(p, 0.0))
            np.testing.assert_allclose(back.array, p.array, rtol=1e-12, atol=1e-15)

    def test_multiply_matches_pointwise_product(self):
        rng = np.random.default_rng(3)
        p = Polynomial(rng.normal(size=8))
        q = Polynomial(rng.normal(size=6))
        x = rng.uniform(-2, 2, size=50)
        product = poly.evaluate(poly.multiply(p, q), x)
        scale = poly.evaluate(Polynomial(np.abs(p.array)), np.abs(x)) * poly.evaluate(Polynomial(np.abs(q.array)), np.abs(x))
        self.assertTrue(np.all(np.abs(product - p(x) * q(x)) <= 1e-10 * scale))

    def test_from_shifted(self):
        p = poly.from_shifted([1.0, 2.0, 3.0], 1.0)
        for x in (-2.0, 0.0, 0.5, 3.0):
            self.assertAlmostEqual(p(x), 1 + 2 * (x - 1) + 3 * (x - 1) ** 2, places=12)

    def test_compose_affine(self):
        p = Polynomial([0.0, 0.0, 1.0])
        composed = poly.compose_affine(p, 1.0, 2.0)
        np.testing.assert_allclose(composed.array, [1.0, 4.0, 4.0])

    def test_trim_only_drops_exact_zeros(self):
        self.assertEqual(poly.trim(Polynomial([1, 2, 0, 0])).coeffs, (1.0, 2.0))
        self.assertEqual(poly.trim(Polynomial([1, 1e-300])).coeffs, (1.0, 1e-300))
        self.assertEqual(poly.trim(Polynomial([0, 0])).coeffs, (0.0,))
