import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import InvalidConfigurationError, SingularPointError
from apps.torus.spectral import laplacian, make_domain

from .ewald import (
    GreenEvaluator,
    gamma_eval,
    grad_gamma,
    grad_green,
    green_eval,
    green_mean,
    make_green,
    u0_eval,
    u0_field,
    u0_mean,
    u0_smooth_part,
)
from .vortices import make_vortex_config


def mixed_series_green(r, periods, modes=20000):
    """
    Independent oracle: Fourier series in the first variable summed in
    closed form over the second (cosh representation).
    """
    L1, L2 = periods
    area = L1 * L2
    t = np.mod(r[1], L2)
    s = t / L2
    value = (L2 ** 2 / 2) * (s ** 2 - s + 1 / 6)
    m = np.arange(1, modes + 1)
    k1 = 2 * np.pi * m / L1
    # cosh(k(L/2 - t)) / sinh(kL/2) without overflow
    ratio = (np.exp(-k1 * t) + np.exp(-k1 * (L2 - t))) / (1 - np.exp(-k1 * L2))
    value += np.sum(2 * np.cos(k1 * r[0]) * L2 / (2 * k1) * ratio)
    return value / area


FIXTURE_POINTS = [(0.25, 0.5), (0.75, 0.5)]


class VortexConfigTests(SimpleTestCase):

    def test_total_and_half(self):
        cfg = make_vortex_config(FIXTURE_POINTS, [1, 3])
        self.assertEqual(cfg.N, 4)
        self.assertEqual(cfg.k, 2)

    def test_rejects_coincident_points_after_reduction(self):
        with self.assertRaises(InvalidConfigurationError):
            make_vortex_config([(0.25, 0.5), (1.25, 0.5)])

    def test_rejects_odd_total(self):
        with self.assertRaises(InvalidConfigurationError):
            make_vortex_config([(0.25, 0.5)])


class GreenEvalTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.rng = np.random.default_rng(11)

    def test_symmetry(self):
        x = self.rng.random((100, 2))
        y = self.rng.random((100, 2))
        np.testing.assert_allclose(self.g.green(x, y), self.g.green(y, x), atol=1e-11)

    def test_zero_mean(self):
        domain = make_domain(1, 1, 128)
        self.assertLess(abs(green_mean(self.g, domain, [(0.3, 0.71)])), 1e-8)

    def test_split_independence(self):
        other = GreenEvaluator((1.0, 1.0), ewald_split=2.5)
        x = self.rng.random((50, 2))
        y = self.rng.random((50, 2))
        np.testing.assert_allclose(self.g.green(x, y), other.green(x, y), atol=1e-10)
        np.testing.assert_allclose(self.g.gamma(x, y), other.gamma(x, y), atol=1e-10)

    def test_matches_mixed_series_oracle(self):
        for periods in [(1.0, 1.0), (2.0, 0.5)]:
            g = GreenEvaluator(periods)
            for _ in range(50):
                r = np.array([self.rng.uniform(0, periods[0]),
                              self.rng.uniform(0.1, 0.9) * periods[1]])
                expected = mixed_series_green(r, periods)
                self.assertAlmostEqual(green_eval(g, r, [0.0, 0.0]), expected, delta=1e-8)

    def test_coincident_points_are_singular(self):
        with self.assertRaises(SingularPointError):
            green_eval(self.g, [0.2, 0.3], [1.2, 0.3])

    def test_log_law_converges_to_gamma(self):
        y = np.array([0.4, 0.6])
        target = gamma_eval(self.g, y, y)
        for h in [1e-2, 1e-3, 1e-4]:
            x = y + h * np.array([0.6, 0.8])
            value = green_eval(self.g, x, y) + np.log(h) / (2 * np.pi)
            self.assertLess(abs(value - target), 2 * h ** 2)


class GammaEvalTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))

    def test_diagonal_is_translation_invariant(self):
        rng = np.random.default_rng(5)
        y = rng.random((20, 2))
        values = self.g.gamma(y, y)
        self.assertLess(np.ptp(values), 1e-10)

    def test_definition(self):
        x, y = np.array([0.3, 0.4]), np.array([0.3, 0.5])
        expected = green_eval(self.g, x, y) + np.log(0.1) / (2 * np.pi)
        self.assertAlmostEqual(gamma_eval(self.g, x, y), expected, delta=1e-11)

    def test_diagonal_matches_theta_closed_form(self):
        # Square torus: -(ln 2pi - pi/4 + 2S) / 2pi - 1/24, S = sum ln(1 - e^{-2 pi n})
        S = np.sum(np.log1p(-np.exp(-2 * np.pi * np.arange(1, 20))))
        expected = -(np.log(2 * np.pi) - np.pi / 4 + 2 * S) / (2 * np.pi) - 1 / 24
        self.assertAlmostEqual(gamma_eval(self.g, [0.7, 0.1], [0.7, 0.1]), expected, delta=1e-9)
        self.assertAlmostEqual(expected, -0.2085771, delta=1e-6)

    def test_diagonal_matches_oracle(self):
        t = 1e-3
        near = [mixed_series_green(np.array([0.0, h]), (1.0, 1.0), modes=40000) + np.log(h) / (2 * np.pi)
                for h in (t, 2 * t)]
        expected = (4 * near[0] - near[1]) / 3
        self.assertAlmostEqual(gamma_eval(self.g, [0.1, 0.2], [0.1, 0.2]), expected, delta=1e-8)


class GradientTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))

    def _central(self, fn, x, y, h=1e-5):
        out = np.zeros(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            out[i] = (fn(self.g, x + e, y) - fn(self.g, x - e, y)) / (2 * h)
        return out

    def test_gamma_gradient_vanishes_at_centre(self):
        c = np.array([0.5, 0.5])
        np.testing.assert_allclose(grad_gamma(self.g, c, c), [0, 0], atol=1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            y = rng.random(2)
            x = y + rng.uniform(-0.3, 0.3, size=2)
            if np.linalg.norm(x - y) < 0.1:
                continue
            np.testing.assert_allclose(
                grad_green(self.g, x, y), self._central(green_eval, x, y), atol=1e-7)
            np.testing.assert_allclose(
                grad_gamma(self.g, x, y), self._central(gamma_eval, x, y), atol=1e-7)

    def test_exchange_parity(self):
        x, y = np.array([0.1, 0.2]), np.array([0.6, 0.45])
        np.testing.assert_allclose(grad_green(self.g, x, y), -grad_green(self.g, y, x), atol=1e-12)

    def test_hessian_matches_gradient_differences(self):
        x, y = np.array([0.3, 0.35]), np.array([0.6, 0.5])
        h = 1e-5
        hess = self.g.hess_green(x, y)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            column = (self.g.grad_green(x + e, y) - self.g.grad_green(x - e, y)) / (2 * h)
            np.testing.assert_allclose(hess[:, j], column, atol=1e-6)
        self.assertAlmostEqual(np.trace(hess), 1.0, delta=1e-8)


class U0Tests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(FIXTURE_POINTS)

    def test_mean_zero(self):
        domain = make_domain(1, 1, 128)
        self.assertLess(abs(u0_mean(self.g, self.cfg, domain)), 1e-8)

    def test_log_law_near_vortex(self):
        p = np.array(FIXTURE_POINTS[0])
        values = []
        for h in [1e-2, 1e-3, 1e-4]:
            x = p + h * np.array([0.0, 1.0])
            values.append(u0_eval(self.g, self.cfg, x) - 2 * np.log(h))
        self.assertLess(abs(values[1] - values[2]), 1e-4)

    def test_empty_configuration(self):
        cfg = make_vortex_config([])
        domain = make_domain(1, 1, 32)
        self.assertEqual(u0_field(self.g, cfg, domain).sup_norm(), 0.0)

    def test_vortex_on_node_is_singular(self):
        domain = make_domain(1, 1, 32, (0.0, 0.0))
        with self.assertRaises(SingularPointError):
            u0_field(self.g, self.cfg, domain)

    def test_desingularized_laplacian(self):
        domain = make_domain(1, 1, 128)
        g = make_green(domain)
        smooth, remainder = u0_smooth_part(g, self.cfg, domain)
        source = -4 * np.pi * self.cfg.N / domain.area
        total = laplacian(smooth).values + remainder
        self.assertAlmostEqual(total.mean(), source, delta=1e-8 * abs(source))
        self.assertLess(np.max(np.abs(total - source)), 1e-3 * abs(source))
