import math

import numpy as np
from django.test import SimpleTestCase

from closures import poly, renorm
from closures.exceptions import CertificationError, DomainError, MomentRangeError
from closures.poly import Polynomial
from closures.renorm import MapFamily, RenormalizationMap, TargetFunction


def be(x):
    return 1.0 / (math.exp(-x) - 1.0)


class TargetFunctionTest(SimpleTestCase):

    def test_parse_aliases(self):
        self.assertIs(TargetFunction.parse('bs'), TargetFunction.BOLTZMANN_SHANNON)
        self.assertIs(TargetFunction.parse('Bose-Einstein'), TargetFunction.BOSE_EINSTEIN)
        with self.assertRaises(DomainError):
            TargetFunction.parse('FD')

    def test_bose_einstein_domain(self):
        with self.assertRaises(DomainError):
            TargetFunction.BOSE_EINSTEIN.check_domain(np.array([-1.0, 0.0]))
        self.assertAlmostEqual(float(TargetFunction.BOSE_EINSTEIN.value(-2.0)), be(-2.0), places=15)


class BetaMapTest(SimpleTestCase):
    """beta_K(x) = (1 + x/K)^K"""

    def test_beta_1(self):
        self.assertEqual(renorm.build_beta_K(1).p.coeffs, (1.0, 1.0))

    def test_beta_3_root(self):
        self.assertAlmostEqual(renorm.build_beta_K(3)(-3.0), 0.0, places=12)

    def test_normalised_at_zero(self):
        for K in range(1, 14, 2):
            rmap = renorm.build_beta_K(K)
            self.assertAlmostEqual(rmap(0.0), 1.0, places=14)
            self.assertAlmostEqual(renorm.eval_map_derivative(rmap, 0.0), 1.0, places=14)

    def test_even_K_rejected(self):
        for K in (0, 2, 4):
            with self.assertRaises(DomainError):
                renorm.build_beta_K(K)

    def test_pointwise_convergence_to_exponential(self):
        for x in (-2.0, -1.0, 0.5, 2.0):
            errors = [abs(renorm.build_beta_K(K)(x) - math.exp(x)) for K in range(1, 14, 2)]
            self.assertTrue(all(b < a for a, b in zip(errors, errors[1:])), errors)


class EntropyTest(SimpleTestCase):
    """eta_K and its Legendre duality with beta_K"""

    def test_examples(self):
        self.assertAlmostEqual(renorm.eta_K(1, 1.0), -0.5, places=15)
        self.assertAlmostEqual(renorm.eta_K(3, 8.0), 12.0, places=12)
        self.assertLess(abs(renorm.eta_K(5, 1e-12)), 1e-10)

    def test_requires_positive_intensity(self):
        with self.assertRaises(DomainError):
            renorm.eta_K(3, 0.0)
        with self.assertRaises(DomainError):
            renorm.entropy_density(3, np.array([1.0, -1.0]))

    def test_derivative_inverts_beta(self):
        """Test eta_K'(beta_K(x)) = x"""
        rng = np.random.default_rng(2)
        for K in (1, 3, 5, 7):
            rmap = renorm.build_beta_K(K)
            for x in rng.uniform(-K + 0.5, 5.0, size=20):
                recovered = renorm.eta_K_derivative(K, rmap(x))
                self.assertLessEqual(abs(recovered - x), 1e-9 * max(1.0, abs(x)))

    def test_entropy_density_matches_scalar(self):
        values = np.array([0.5, 1.0, 2.0])
        expected = [renorm.eta_K(3, v) for v in values]
        np.testing.assert_allclose(renorm.entropy_density(3, values), expected, rtol=1e-14)


class BoseEinsteinDerivativeTest(SimpleTestCase):

    def test_first_polynomials(self):
        self.assertEqual(renorm.target_derivatives_BE(0).coeffs, (0.0, 1.0))
        self.assertEqual(renorm.target_derivatives_BE(1).coeffs, (0.0, 1.0, 1.0))
        self.assertEqual(renorm.target_derivatives_BE(2).coeffs, (0.0, 1.0, 3.0, 2.0))

    def test_second_derivative_by_finite_differences(self):
        x, h = -2.0, 1e-4
        numeric = (be(x + h) - 2 * be(x) + be(x - h)) / (h * h)
        exact = renorm.target_derivatives_BE(2)(be(x))
        self.assertLess(abs(numeric / exact - 1.0), 1e-6)


class TaylorMapTest(SimpleTestCase):

    def test_exponential_at_origin(self):
        np.testing.assert_allclose(renorm.build_taylor('BS', 0, 0.0).p.array, [1.0, 1.0])
        rmap = renorm.build_taylor('BS', 2, 0.0)
        np.testing.assert_allclose(rmap.p.array, [1, 1, 1 / 2, 1 / 6, 1 / 24, 1 / 120], rtol=1e-15)
        self.assertAlmostEqual(rmap(1.0), 1 + 1 + 1 / 2 + 1 / 6 + 1 / 24 + 1 / 120, places=14)

    def test_bose_einstein_matches_derivatives_at_center(self):
        x0 = -3.08333
        rmap = renorm.build_taylor('BE', 1, x0)
        u = be(x0)
        p = rmap.p
        for n in range(4):
            exact = renorm.target_derivatives_BE(n)(u)
            self.assertLess(abs(p(x0) / exact - 1.0), 1e-9)
            p = poly.derivative(p)

    def test_bose_einstein_rejects_non_negative_center(self):
        with self.assertRaises(DomainError):
            renorm.build_taylor('BE', 1, 0.0)

    def test_exponential_maps_are_monotone(self):
        x = np.random.default_rng(4).uniform(-50, 50, size=10000)
        for K in range(7):
            rmap = renorm.build_taylor('BS', K, 0.0)
            slope = renorm.eval_map_derivative(rmap, x)
            bound = poly.evaluate(Polynomial(np.abs(rmap.dp.array)), np.abs(x))
            self.assertTrue(np.all(slope >= -1e-12 * (1.0 + bound)))

    def test_bose_einstein_maps_are_monotone(self):
        """Test Planckian Taylor maps for global monotonicity across expansion points"""
        x = np.random.default_rng(5).uniform(-50, 50, size=10000)
        for x0 in np.linspace(-5.5, -0.5, 11):
            for K in range(7):
                rmap = renorm.build_taylor('BE', K, x0)
                renorm.certify_monotone(rmap, points=20001)
                slope = renorm.eval_map_derivative(rmap, x)
                bound = poly.evaluate(Polynomial(np.abs(rmap.dp.array)), np.abs(x))
                self.assertTrue(np.all(slope >= -1e-12 * (1.0 + bound)), msg=f"K={K} x0={x0}")

    def test_bose_einstein_series_diverges_beyond_radius(self):
        """Test that Taylor errors grow with K outside the radius of convergence"""
        x0, x = -3.0, -10.0
        errors = []
        for K in range(5):
            degree = 2 * K + 1
            shifted = [float(TargetFunction.BOSE_EINSTEIN.nth_derivative(k, x0)) / math.factorial(k)
                       for k in range(degree + 1)]
            errors.append(abs(poly.from_shifted(shifted, x0)(x) - be(x)))
        self.assertTrue(all(b > a for a, b in zip(errors, errors[1:])), errors)

    def test_validity_intervals(self):
        self.assertEqual(renorm.build_taylor('BE', 1, -3.0).validity_interval, (-6.0, 0.0))
        self.assertEqual(renorm.build_taylor('BS', 1, 0.0).validity_interval, (-5.0, 5.0))
        self.assertEqual(renorm.build_beta_K(5).validity_interval, (-5.0, 5.0))


class CertificationTest(SimpleTestCase):

    def _map(self, coeffs):
        p = Polynomial(coeffs)
        return RenormalizationMap(p=p, dp=poly.derivative(p), family=MapFamily.OPTIMIZED,
                                  target=TargetFunction.BOLTZMANN_SHANNON, params={'interval': (-1.0, 1.0)})

    def test_even_degree_rejected(self):
        with self.assertRaises(CertificationError):
            renorm.certify_monotone(self._map([1.0, 1.0, 1.0]))

    def test_decreasing_region_rejected(self):
        with self.assertRaises(CertificationError):
            renorm.certify_monotone(self._map([0.0, -3.0, 0.0, 1.0]))

    def test_monotone_cubic_accepted(self):
        renorm.certify_monotone(self._map([0.0, 1.0, 0.0, 1.0]))


class MapRecordTest(SimpleTestCase):

    def test_labels(self):
        self.assertEqual(renorm.build_beta_K(5).label(3), 'beta_3_5')
        self.assertEqual(renorm.build_taylor('BS', 2, -5.0).label(3), 'T_3_5(x0=-5)')
        self.assertEqual(renorm.build_taylor('BS', 2, 0.0).label(), 'T_5(x0=0)')

    def test_dict_round_trip(self):
        rmap = renorm.build_taylor('BE', 1, -2.5)
        restored = RenormalizationMap.from_dict(rmap.to_dict())
        self.assertEqual(restored.p.coeffs, rmap.p.coeffs)
        self.assertEqual(restored.label(1), rmap.label(1))
        self.assertIs(restored.target, TargetFunction.BOSE_EINSTEIN)


class InversionOfMapTest(SimpleTestCase):

    def test_inverts_beta(self):
        rmap = renorm.build_beta_K(5)
        self.assertAlmostEqual(renorm.invert_map(rmap, 1.0), 0.0, places=12)
        x = renorm.invert_map(rmap, 0.25)
        self.assertAlmostEqual(rmap(x), 0.25, places=12)

    def test_out_of_range(self):
        with self.assertRaises(MomentRangeError):
            renorm.invert_map(renorm.build_beta_K(5), -1e9)


class L2ErrorTest(SimpleTestCase):

    def test_high_order_taylor_is_accurate_near_center(self):
        self.assertLess(renorm.l2_error(renorm.build_taylor('BS', 6, 0.0), (-1.0, 1.0)), 1e-6)

    def test_linear_map_error(self):
        # int_0^1 (1 + x - e^x)^2 dx
        exact = 7 / 3 - 2 * math.e + (math.e ** 2 - 1) / 2
        self.assertAlmostEqual(renorm.l2_error(renorm.build_taylor('BS', 0, 0.0), (0.0, 1.0)), math.sqrt(exact), places=12)
