import math

import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import quad

from closures import special
from closures.exceptions import DomainError, SpecialFunctionOverflow


class IncompleteGammaTest(SimpleTestCase):
    """Gamma(s, x) at integer order"""

    def test_known_values(self):
        self.assertAlmostEqual(special.upper_incomplete_gamma(1, 0.0), 1.0, places=15)
        self.assertAlmostEqual(special.upper_incomplete_gamma(1, -2.0) / math.exp(2.0), 1.0, places=14)

    def test_against_adaptive_quadrature(self):
        reference, _ = quad(lambda t: t ** 3 * math.exp(-t), 1.5, np.inf, epsabs=0.0, epsrel=1e-13)
        self.assertLess(abs(special.upper_incomplete_gamma(4, 1.5) / reference - 1.0), 1e-10)

    def test_recurrence(self):
        """Test Gamma(s+1, x) = s Gamma(s, x) + x^s e^-x"""
        rng = np.random.default_rng(5)
        for _ in range(100):
            s = int(rng.integers(1, 11))
            x = float(rng.uniform(-10, 10))
            lhs = special.upper_incomplete_gamma(s + 1, x)
            first = s * special.upper_incomplete_gamma(s, x)
            second = x ** s * math.exp(-x)
            self.assertLessEqual(abs(lhs - first - second), 1e-10 * (abs(first) + abs(second)))

    def test_positive_for_non_negative_argument(self):
        for s in range(1, 10):
            for x in (0.0, 0.5, 3.0, 20.0):
                self.assertGreater(special.upper_incomplete_gamma(s, x), 0.0)

    def test_rejects_bad_order(self):
        with self.assertRaises(DomainError):
            special.upper_incomplete_gamma(0, 1.0)
        with self.assertRaises(DomainError):
            special.upper_incomplete_gamma(1.5, 1.0)

    def test_overflow_is_loud(self):
        """Test that exp overflow raises instead of returning inf"""
        with self.assertRaises(SpecialFunctionOverflow):
            special.upper_incomplete_gamma(3, -800.0)
        with self.assertRaises(OverflowError):
            special.upper_incomplete_gamma(1, -710.0)


class PolylogTest(SimpleTestCase):
    """Li_s(z) for integer s >= 1 and 0 < z < 1"""

    def test_order_one_is_closed_form(self):
        self.assertAlmostEqual(special.polylog(1, 0.5), math.log(2.0), places=15)

    def test_small_argument(self):
        self.assertLess(abs(special.polylog(2, 1e-8) / 1e-8 - 1.0), 1e-7)

    def test_against_series(self):
        z = math.exp(-1.0)
        reference = sum(z ** n / n ** 3 for n in range(1, 201))
        self.assertLess(abs(special.polylog(3, z) / reference - 1.0), 1e-12)

    def test_derivative_identity(self):
        h = 1e-6
        for s in (2, 3, 4):
            for z in (0.1, 0.5, 0.9):
                slope = (special.polylog(s, z + h) - special.polylog(s, z - h)) / (2 * h)
                self.assertLess(abs(z * slope / special.polylog(s - 1, z) - 1.0), 1e-6)

    def test_positive(self):
        for s in (1, 2, 5, 14):
            for z in (1e-6, 0.3, 0.99):
                self.assertGreater(special.polylog(s, z), 0.0)

    def test_rejects_out_of_domain(self):
        for z in (0.0, 1.0, -0.5, 2.0):
            with self.assertRaises(DomainError):
                special.polylog(2, z)
        with self.assertRaises(DomainError):
            special.polylog(0, 0.5)
