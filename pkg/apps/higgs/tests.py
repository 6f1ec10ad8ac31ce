import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import bisect

from apps.core.exceptions import OutOfBranchError

from .branch import (
    F,
    F_inverse,
    RelativisticModel,
    get_model,
    nonlinearity,
    nonlinearity_derivative,
)


class FTests(SimpleTestCase):

    def test_values(self):
        self.assertEqual(F(0.0), 0.0)
        self.assertAlmostEqual(F(-1.0), -np.exp(-1.0), places=12)
        self.assertAlmostEqual(F(-50.0), -49.0, delta=1e-12)

    def test_rejects_positive_v(self):
        with self.assertRaises(OutOfBranchError):
            F(0.1)

    def test_strictly_increasing(self):
        v = -np.logspace(-8, 2, 500)[::-1]
        self.assertTrue(np.all(np.diff(F(v)) > 0))


class FInverseTests(SimpleTestCase):

    def test_values(self):
        self.assertEqual(F_inverse(0.0), 0.0)
        self.assertAlmostEqual(F_inverse(F(-3.0)), -3.0, delta=1e-12)

    def test_matches_bisection(self):
        expected = bisect(lambda v: 1 + v - np.exp(v) + 10.0, -12.0, -10.0, xtol=1e-15)
        self.assertAlmostEqual(F_inverse(-10.0), expected, delta=1e-12)
        self.assertAlmostEqual(F_inverse(-10.0), -10.99998328, delta=1e-8)

    def test_bisection_oracle_on_many_points(self):
        u = -np.logspace(-6, 2, 200)
        v = F_inverse(u)
        for ui, vi in zip(u, v):
            ref = bisect(lambda t: 1 + t - np.exp(t) - ui, ui - 1.0, min(ui, 0.0), xtol=1e-15, rtol=1e-15)
            self.assertAlmostEqual(vi, ref, delta=1e-12)

    def test_round_trip_and_monotone(self):
        u = -np.logspace(-12, 6, 10_000)[::-1]
        v = F_inverse(u)
        self.assertTrue(np.all(v <= 0))
        defect = np.abs(F(v) - u) / (1 + np.abs(u))
        self.assertLess(defect.max(), 1e-13)
        self.assertTrue(np.all(np.diff(v) > 0))

    def test_asymptotics(self):
        u = -50.0
        self.assertLessEqual(abs(F_inverse(u) - (u - 1)), 2 * np.exp(-50.0))
        for u in [-1e-3, -1e-5, -1e-7]:
            ratio = (F_inverse(u) + np.sqrt(-2 * u)) / u
            self.assertAlmostEqual(ratio, 1 / 3, delta=0.05)

    def test_rejects_positive_u(self):
        with self.assertRaises(OutOfBranchError) as ctx:
            F_inverse(np.array([-1.0, 0.5, -2.0]))
        self.assertEqual(ctx.exception.worst_value, 0.5)


class NonlinearityTests(SimpleTestCase):

    def test_values(self):
        self.assertEqual(nonlinearity(0.0, 0.3), 0.0)
        self.assertLessEqual(nonlinearity(-100.0, 0.5), np.exp(-99.0) / 0.25)
        u = 1 - np.log(2) - 0.5
        self.assertAlmostEqual(nonlinearity(u, 1.0), 1 / 8, places=12)

    def test_derivative_limits(self):
        eps = 0.2
        self.assertAlmostEqual(nonlinearity_derivative(-1e-14, eps), -2 / eps ** 2, delta=1e-4)
        self.assertAlmostEqual(nonlinearity_derivative(0.0, eps), -2 / eps ** 2, places=10)
        v = F_inverse(-100.0)
        self.assertAlmostEqual(nonlinearity_derivative(-100.0, 1.0) / np.exp(v), 1.0, places=12)

    def test_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        u = -np.exp(rng.uniform(np.log(1e-6), np.log(20.0), 200))
        u = u[u < -1e-4]
        h = 1e-6
        for eps in (1.0, 0.1):
            fd = (nonlinearity(u + h, eps) - nonlinearity(u - h, eps)) / (2 * h)
            exact = nonlinearity_derivative(u, eps)
            scale = np.maximum(np.abs(exact), 1e-8 / eps ** 2)
            self.assertLess(np.max(np.abs(fd - exact) / scale), 1e-5)

    def test_relativistic_model_differs_at_cubic_order(self):
        generalized = get_model('generalized')
        relativistic = RelativisticModel()
        u = np.array([-8.0, -10.0, -12.0])
        s = u - 1
        gap = np.abs(generalized(u, 1.0) - relativistic(u, 1.0))
        self.assertTrue(np.all(gap <= 5 * np.exp(3 * s)))
        self.assertTrue(np.all(gap >= 0.1 * np.exp(3 * s)))
