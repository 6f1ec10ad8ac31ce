import warnings

import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import quad

from apps.ansatz.bubbles import rho_weights
from apps.core.exceptions import InvalidConfigurationError
from apps.green.ewald import GreenEvaluator, u0_eval
from apps.green.vortices import make_vortex_config

from .dq import d_of_q, make_reduced_config, richardson
from .quadrature import (
    cell_integral,
    outside_cell_tail,
    outside_disk_tail,
    ring_integral,
    voronoi_partition,
)
from .reduced import (
    find_critical_point,
    f_profile,
    g_star,
    grad_g_star,
    hessian_g_star,
)

VORTICES = [(0.25, 0.5), (0.75, 0.5)]


def two_scale_gradient(fn, q, h=1e-4):
    """Central differences at h and h/2 combined by Richardson"""
    q = np.asarray(q, dtype=float).ravel()

    def central(step):
        out = np.zeros_like(q)
        for n in range(len(q)):
            e = np.zeros_like(q)
            e[n] = step
            out[n] = (fn(q + e) - fn(q - e)) / (2 * step)
        return out

    return (4 * central(h / 2) - central(h)) / 3


class GStarTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)
        self.cfg2 = make_vortex_config(VORTICES, [2, 2])

    def test_single_point_is_u0(self):
        q = [(0.4, 0.1)]
        self.assertAlmostEqual(g_star(self.g, self.cfg, q), u0_eval(self.g, self.cfg, q[0]), places=12)

    def test_permutation_invariance(self):
        q = np.array([(0.4, 0.1), (0.6, 0.8)])
        self.assertAlmostEqual(g_star(self.g, self.cfg2, q), g_star(self.g, self.cfg2, q[::-1]), places=12)

    def test_diverges_at_vortex(self):
        values = [g_star(self.g, self.cfg, [(0.25, 0.5 + h)]) for h in (1e-2, 1e-3, 1e-4, 1e-5)]
        self.assertTrue(np.all(np.diff(values) < 0))
        self.assertLess(values[-1], -20.0)

    def test_rejects_inadmissible(self):
        with self.assertRaises(InvalidConfigurationError):
            g_star(self.g, self.cfg, [VORTICES[0]])
        with self.assertRaises(InvalidConfigurationError):
            g_star(self.g, self.cfg2, [(0.1, 0.1), (1.1, 0.1)])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        checked = 0
        while checked < 20:
            q = rng.random((2, 2))
            points = np.vstack([q, np.array(VORTICES)])
            gaps = [np.linalg.norm(a - b) for n, a in enumerate(points) for b in points[n + 1:]]
            if min(gaps) < 0.15:
                continue
            fd = two_scale_gradient(lambda x: g_star(self.g, self.cfg2, x.reshape(-1, 2)), q)
            np.testing.assert_allclose(grad_g_star(self.g, self.cfg2, q), fd, atol=1e-6)
            checked += 1

    def test_hessian_is_symmetric_and_consistent(self):
        q = np.array([(0.45, 0.15), (0.6, 0.8)])
        H = hessian_g_star(self.g, self.cfg2, q)
        self.assertLess(np.max(np.abs(H - H.T)), 1e-8)
        fd = np.column_stack([
            two_scale_gradient(lambda x, n=n: grad_g_star(self.g, self.cfg2, x.reshape(-1, 2))[n], q)
            for n in range(4)
        ])
        np.testing.assert_allclose(H, fd, atol=1e-5)

    def test_symmetric_configuration_is_critical(self):
        np.testing.assert_allclose(grad_g_star(self.g, self.cfg, [(0.5, 0.5)]), 0.0, atol=1e-8)


class CriticalPointTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)

    def test_converges_to_symmetry_point(self):
        q, certificate = find_critical_point(self.g, self.cfg, [(0.5, 0.25)])
        self.assertAlmostEqual(q[0, 0], 0.5, delta=1e-9)
        self.assertAlmostEqual(min(abs(q[0, 1]), abs(q[0, 1] - 0.5), abs(q[0, 1] - 1.0)), 0.0, delta=1e-7)
        self.assertLessEqual(certificate.gradient_norm, 1e-9)
        self.assertTrue(certificate.nondegenerate)
        # local shape along the Hessian eigenvectors agrees with the spectrum
        H = hessian_g_star(self.g, self.cfg, q)
        values, vectors = np.linalg.eigh(H)
        base = g_star(self.g, self.cfg, q)
        for lam, v in zip(values, vectors.T):
            change = g_star(self.g, self.cfg, q + 0.01 * v.reshape(q.shape)) - base
            self.assertEqual(np.sign(change), np.sign(lam))

    def test_seed_at_critical_point(self):
        _, certificate = find_critical_point(self.g, self.cfg, [(0.5, 0.5)])
        self.assertEqual(certificate.iterations, 0)

    def test_seed_on_vortex(self):
        with self.assertRaises(InvalidConfigurationError):
            find_critical_point(self.g, self.cfg, [VORTICES[0]])

    def test_certificate_reports_spectrum(self):
        with warnings.catch_warnings():
            warnings.simplefilter('error')
            _, certificate = find_critical_point(self.g, self.cfg, [(0.5, 0.5)])
        self.assertEqual(len(certificate.eigenvalues), 2)
        self.assertGreater(certificate.min_abs_eigenvalue, 0)


class FProfileTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)

    def test_vanishes_at_center(self):
        q = [(0.5, 0.1)]
        self.assertEqual(f_profile(self.g, self.cfg, q, 0, q[0]), 0.0)

    def test_log_law_at_vortex(self):
        q = [(0.5, 0.1)]
        p = np.array(VORTICES[1])
        values = [f_profile(self.g, self.cfg, q, 0, p + h * np.array([0.0, 1.0])) - 2 * np.log(h)
                  for h in (1e-3, 1e-4)]
        self.assertLess(abs(values[0] - values[1]), 1e-3)

    def test_without_vortices(self):
        empty = make_vortex_config([])
        q = np.array([0.3, 0.3])
        y = np.array([0.45, 0.2])
        expected = 8 * np.pi * (self.g.gamma(y, q) - self.g.gamma(q, q))
        self.assertAlmostEqual(f_profile(self.g, empty, [q], 0, y), float(expected), places=12)


class QuadratureTests(SimpleTestCase):

    def test_disk_tail(self):
        radius = 0.3
        numeric, _ = quad(lambda r: 2 * np.pi * r ** -3, radius, np.inf)
        self.assertAlmostEqual(outside_disk_tail(radius), numeric, delta=1e-10)

    def test_square_cell_tail(self):
        cell = voronoi_partition([(0.3, 0.6)], (1.0, 1.0)).cell(0)
        self.assertAlmostEqual(cell.inradius, 0.5)
        self.assertAlmostEqual(outside_cell_tail(cell), 2 * np.pi + 4, delta=1e-10)

    def test_cell_area(self):
        partition = voronoi_partition([(0.5, 0.25), (0.5, 0.75)], (1.0, 1.0))
        total = 0.0
        for cell in partition.cells():
            r = 0.5 * cell.inradius
            total += cell_integral(lambda d: np.ones(len(d)), cell, r) + np.pi * r ** 2
        self.assertAlmostEqual(total, 1.0, delta=1e-12)

    def test_odd_term_cancels_on_rings(self):
        slope = np.array([3.0, -1.5])
        value = ring_integral(lambda d: (d @ slope) / np.sum(d ** 2, axis=-1) ** 2, 0.1, 0.2)
        self.assertLess(abs(value), 1e-12)

    def test_richardson_removes_quadratic_error(self):
        r = 0.1 * 2.0 ** -np.arange(5)
        values = 2.0 + 3.0 * r ** 2
        self.assertAlmostEqual(richardson(list(values))[-1], 2.0, places=12)


class DqTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)

    def test_tail_only_is_negative(self):
        q = [(0.5, 0.1)]
        report = d_of_q(self.g, self.cfg, q, include_profile=False)
        rho = rho_weights(self.cfg, self.g, q)[0]
        self.assertAlmostEqual(report.value, -rho * (2 * np.pi + 4), delta=1e-9 * rho)
        self.assertLess(report.value, 0)

    def test_limit_at_critical_point(self):
        q, _ = find_critical_point(self.g, self.cfg, [(0.5, 0.1)])
        report = d_of_q(self.g, self.cfg, q)
        self.assertTrue(report.stable)
        self.assertTrue(np.isfinite(report.value))
        self.assertAlmostEqual(report.value, report.rho[0] * report.per_bubble[0], delta=1e-9 * (1 + abs(report.value)))
        rows = report.table_rows()
        self.assertEqual(rows[0][2], '')
        self.assertEqual(len(rows), 13)

    def test_independent_of_partition(self):
        cfg = make_vortex_config(VORTICES, [2, 2])
        q = np.array([(0.5, 0.25), (0.5, 0.75)])
        voronoi = d_of_q(self.g, cfg, q, rc=make_reduced_config(self.g, cfg, q, levels=6, r0=0.1), tol=np.inf)
        shifted = d_of_q(self.g, cfg, q, rc=make_reduced_config(self.g, cfg, q, weights=[0.02, -0.02], levels=6, r0=0.1),
                         tol=np.inf)
        for a, b in zip(voronoi.r_tail, shifted.r_tail):
            self.assertAlmostEqual(a[1], b[1], delta=1e-4 * (1 + abs(a[1])))
        self.assertAlmostEqual(voronoi.value, shifted.value, delta=1e-4 * (1 + abs(voronoi.value)))
