from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import quad

from apps.ansatz.bubbles import make_bubble_params
from apps.ansatz.profile import ansatz_residual_at, bubble_quadrature, build_ansatz, quadrature_domain
from apps.core.exceptions import (
    InvalidArgumentError,
    InvalidConfigurationError,
    LimitUnstableError,
    ProjectionDegenerateError,
    ReducedSystemInfeasibleError,
)
from apps.functionals.dq import d_of_q
from apps.green.ewald import GreenEvaluator
from apps.green.vortices import make_vortex_config
from apps.torus.spectral import Field, make_domain

from .inner import inner_correction
from .kernels import KernelSet, build_kernels, h_mu, kernel_label, kernel_values, kernel_z, operator_residual
from .norms import make_weighted_norms, rho_disk_integral, weighted_norm_X, weighted_norm_Y
from .projection import grid_products, project_Q
from .system import (
    CUTOFF_MARGIN,
    ReducedProblem,
    fit_a0,
    fit_b0,
    model_difference,
    mu_scaling_slope,
    mu_window,
    projected_residuals,
    reduce_sweep,
    solve_reduced,
)

VORTICES = [(0.25, 0.5), (0.75, 0.5)]
CENTER = (0.5, 0.0)
CUTOFF = 0.05
SCALES = [8.0, 16.0, 32.0, 64.0]
# off the symmetric point the translation projections do not vanish
SKEW_CENTER = (0.47, 0.04)


def fd_laplacian(fn, y, h=1e-4):
    """Fourth-order five-point Laplacian along both axes"""
    total = -60.0 * fn(y)
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        total = total + 16 * (fn(y + e) + fn(y - e)) - (fn(y + 2 * e) + fn(y - 2 * e))
    return total / (12 * h * h)


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


class ReductionFixture:

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)

    def params(self, mu, eps=None, center=CENTER):
        return make_bubble_params(self.g, self.cfg, [center], mu, d=CUTOFF, eps=eps)


class HMuTests(ReductionFixture, SimpleTestCase):

    def test_peak_and_support(self):
        p = self.params(16.0)
        self.assertAlmostEqual(h_mu(p, np.array(CENTER)), 8 * 16.0 ** 2, delta=1e-9)
        outside = np.array(CENTER) + np.array([0.0, 1.01 * p.d_i[0]])
        self.assertEqual(h_mu(p, outside), 0.0)

    def test_mass_inside_ball(self):
        p = self.params(16.0)
        q = bubble_quadrature(p, quadrature_domain(p))
        expected = 8 * np.pi * (1 - 1 / (p.d * p.mu_i[0] ** 2))
        self.assertAlmostEqual(q.integrate(lambda y: h_mu(p, y)), expected, delta=1e-8 * expected)


class KernelTests(ReductionFixture, SimpleTestCase):

    def test_labels(self):
        self.assertEqual([kernel_label(a) for a in range(3)], ['Y0', 'Y11', 'Y12'])

    def test_translation_kernels_vanish_at_center(self):
        p = self.params(16.0)
        for a in (1, 2):
            self.assertEqual(kernel_values(p, a, np.array(CENTER))[0], 0.0)

    def test_supports(self):
        p = self.params(16.0)
        far = np.array(CENTER) + np.array([2.05 * p.d_i[0], 0.0])
        self.assertAlmostEqual(kernel_values(p, 0, far)[0], -1 / p.mu_i[0], places=15)
        for a in (1, 2):
            value, lap = kernel_values(p, a, far)
            self.assertEqual(value, 0.0)
            self.assertEqual(lap, 0.0)

    def test_rejects_bad_index(self):
        with self.assertRaises(InvalidArgumentError):
            kernel_values(self.params(16.0), 3, np.array(CENTER))

    def test_laplacian_matches_finite_differences(self):
        p = self.params(16.0)
        d = p.d_i[0]
        center = np.array(CENTER)
        for radius in (0.3 * d, 0.7 * d, 1.3 * d, 1.8 * d, 2.5 * d):
            y = center + radius * np.array([np.cos(0.7), np.sin(0.7)])
            for a in range(3):
                value, lap = kernel_values(p, a, y)
                fd = fd_laplacian(lambda z: kernel_values(p, a, z)[0], y)
                self.assertAlmostEqual(lap, fd, delta=1e-5 * (1 + abs(lap)))
                self.assertAlmostEqual(kernel_z(p, a, y), -lap + h_mu(p, y) * value, places=12)

    def test_exact_inside_ball(self):
        p = self.params(16.0)
        rng = np.random.default_rng(3)
        angles = rng.uniform(0, 2 * np.pi, 20)
        radii = rng.uniform(0, 0.95 * p.d_i[0], 20)
        points = np.array(CENTER) + radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        scale = 8 * p.mu_i[0] ** 2
        for a in range(3):
            self.assertLess(np.max(np.abs(operator_residual(p, a, points))), 1e-9 * scale)

    def test_operator_residual_scaling(self):
        y0, y1 = [], []
        for mu in SCALES:
            kernels = build_kernels(self.params(mu))
            y0.append(kernels.operator_residual_sup(0))
            y1.append(kernels.operator_residual_sup(1))
        self.assertTrue(-3.4 <= loglog_slope(SCALES, y0) <= -2.6)
        self.assertTrue(-0.4 <= loglog_slope(SCALES, y1) <= 0.4)

    def test_support_must_fit_torus(self):
        wide = replace(self.params(16.0), d=0.1)
        with self.assertRaises(InvalidConfigurationError):
            build_kernels(wide)


class NormTests(ReductionFixture, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.p = self.params(16.0)
        self.domain = quadrature_domain(self.p)
        self.norms = make_weighted_norms(0.4)

    def test_alpha_range(self):
        for alpha in (0.0, 0.5, 1.0):
            with self.assertRaises(InvalidArgumentError):
                make_weighted_norms(alpha)

    def test_zero_field(self):
        zero = Field.zeros(self.domain)
        self.assertEqual(weighted_norm_Y(zero, self.p, self.norms), 0.0)
        self.assertEqual(weighted_norm_X(zero, self.p, self.norms), 0.0)

    def test_constant_field_Y(self):
        one = Field(self.domain, np.ones((self.domain.n, self.domain.n)))
        mu, d = self.p.mu_i[0], self.p.d_i[0]
        expected = rho_disk_integral(0.4, 2 * d * mu) / mu ** 4 + 1.0 - np.pi * d * d
        self.assertAlmostEqual(weighted_norm_Y(one, self.p, self.norms) ** 2, expected, delta=1e-7 * expected)

    def test_constant_field_X(self):
        one = Field(self.domain, np.ones((self.domain.n, self.domain.n)))
        mu, d = self.p.mu_i[0], self.p.d_i[0]
        inner, _ = quad(lambda r: 2 * np.pi * r * self.norms.rho_hat(np.array([r, 0.0])) ** 2,
                        0, 2 * d * mu, limit=200)
        expected = inner + 1.0 - np.pi * d * d
        self.assertAlmostEqual(weighted_norm_X(one, self.p, self.norms) ** 2, expected, delta=1e-7 * expected)

    def test_homogeneity(self):
        f = Field.from_function(self.domain, lambda x1, x2: np.sin(2 * np.pi * x1) + np.cos(2 * np.pi * x2))
        twice = f.with_values(2 * f.values)
        self.assertAlmostEqual(weighted_norm_Y(twice, self.p, self.norms),
                               2 * weighted_norm_Y(f, self.p, self.norms), places=12)

    def test_pointwise_needs_quadrature(self):
        with self.assertRaises(InvalidArgumentError):
            weighted_norm_Y(lambda y: np.ones(y.shape[:-1]), self.p, self.norms)


class ProjectionTests(ReductionFixture, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.p = self.params(16.0)
        self.kernels = build_kernels(self.p)
        self.f = Field.from_function(
            self.kernels.domain,
            lambda x1, x2: np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2) + x1 ** 2,
            name='f',
        )

    def test_kernel_is_removed_exactly(self):
        result = project_Q(self.kernels.Z0, self.kernels)
        np.testing.assert_allclose(result.coefficients, [1.0, 0.0, 0.0], atol=1e-10)
        self.assertLess(result.field.sup_norm(), 1e-9 * self.kernels.Z0.sup_norm())

    def test_output_orthogonal_to_kernels(self):
        result = project_Q(self.f, self.kernels)
        w = self.kernels.domain.cell_area
        f_norm = np.sqrt(w * np.sum(self.f.values ** 2))
        for a, Y in enumerate(self.kernels.Y):
            y_norm = np.sqrt(w * np.sum(Y.values ** 2))
            self.assertLess(abs(grid_products(self.kernels, result.field.values)[a]), 1e-10 * f_norm * y_norm)

    def test_idempotent(self):
        once = project_Q(self.f, self.kernels).field
        twice = project_Q(once, self.kernels)
        self.assertLess(np.max(np.abs(twice.field.values - once.values)), 1e-10 * once.sup_norm())
        self.assertLess(np.max(np.abs(twice.coefficients)), 1e-9)

    def test_reports_bound_ratio(self):
        result = project_Q(self.f, self.kernels, measure=True)
        self.assertGreater(result.bound_ratio, 0)
        self.assertTrue(np.isfinite(result.bound_ratio))
        self.assertEqual(result.cij.shape, (1, 2))

    def test_degenerate_kernels(self):
        zero = Field.zeros(self.kernels.domain)
        degenerate = KernelSet(params=self.p, domain=self.kernels.domain, Y=self.kernels.Y, Z=(zero, zero, zero))
        with self.assertRaises(ProjectionDegenerateError):
            project_Q(self.f, degenerate)

    def test_rejects_other_grid(self):
        other = Field.zeros(make_domain(1.0, 1.0, 64))
        with self.assertRaises(InvalidArgumentError):
            project_Q(other, self.kernels)


class InnerCorrectionTests(ReductionFixture, SimpleTestCase):

    def setUp(self):
        super().setUp()
        mu = 16.0
        self.p = self.params(mu, eps=1 / mu ** 2)
        self.ansatz = build_ansatz(self.p, self.g, self.cfg, make_domain(1.0, 1.0, 128))
        self.kernels = build_kernels(self.p, self.ansatz.domain)

    def test_converges_orthogonal_to_z(self):
        result = inner_correction(self.ansatz, self.kernels, tol=1e-9)
        self.assertLessEqual(result.trace[-1]['residual'], 1e-9)
        w = self.ansatz.domain.cell_area
        eta_norm = np.sqrt(w * np.sum(result.eta.values ** 2))
        for Z in self.kernels.Z:
            z_norm = np.sqrt(w * np.sum(Z.values ** 2))
            self.assertLess(abs(w * np.sum(Z.values * result.eta.values)), 1e-8 * (eta_norm * z_norm + 1e-300))
        self.assertEqual(len(result.coefficients), 3)

    def test_reports_bound_quantities(self):
        result = inner_correction(self.ansatz, self.kernels, tol=1e-9)
        self.assertGreater(result.eta_x, 0)
        self.assertGreater(result.h_y, 0)
        self.assertTrue(np.isfinite(result.ratio))
        self.assertTrue(np.isfinite(result.scaled_sup))

    def test_without_measurement(self):
        result = inner_correction(self.ansatz, self.kernels, tol=1e-9, measure=False)
        self.assertIsNone(result.ratio)
        self.assertGreater(result.eta_sup, 0)


class ProjectedResidualTests(ReductionFixture, SimpleTestCase):

    def ansatz(self, mu, center=CENTER):
        p = self.params(mu, eps=1 / mu ** 2, center=center)
        q = bubble_quadrature(p, quadrature_domain(p))
        return build_ansatz(p, self.g, self.cfg, q.domain, quad=q), q

    def test_translation_residuals_vanish_at_symmetric_point(self):
        ansatz, q = self.ansatz(16.0)
        result = projected_residuals(ansatz, quad=q)
        self.assertLess(np.max(result.normalized[1:]), 1e-10)
        self.assertEqual(result.labels, ['R0', 'R11', 'R12'])

    def test_zero_correction_changes_nothing(self):
        ansatz, q = self.ansatz(16.0)
        bare = projected_residuals(ansatz, quad=q)
        zero = projected_residuals(ansatz, eta=Field.zeros(ansatz.domain), quad=q)
        np.testing.assert_allclose(zero.values, bare.values, rtol=1e-12, atol=1e-15)

    def test_model_difference_decays(self):
        y0, yij = [], []
        for mu in SCALES:
            ansatz, q = self.ansatz(mu, center=SKEW_CENTER)
            values = np.abs(model_difference(ansatz, quad=q))
            y0.append(values[0])
            yij.append(np.max(values[1:]))
        self.assertTrue(-5.6 <= loglog_slope(SCALES, y0) <= -4.4)
        self.assertTrue(-3.6 <= loglog_slope(SCALES, yij) <= -2.4)

    def test_ansatz_residual_weighted_norm_scaling(self):
        norms = make_weighted_norms(0.4)
        values = []
        for mu in SCALES:
            ansatz, q = self.ansatz(mu)
            values.append(weighted_norm_Y(lambda y: ansatz_residual_at(ansatz, y), ansatz.params, norms, quad=q))
        self.assertTrue(-2.1 <= loglog_slope(SCALES, values) <= -1.6)


class ScriptedProblem(ReducedProblem):
    """R0 interpolated in ln mu through measured values, with a fixed D"""

    # two sign changes: a spurious - to + near the window floor, the real + to - further out
    MEASURED = [(4.70, -0.267), (5.63, 0.068), (9.72, 0.0024), (11.66, -0.029)]

    def __init__(self, d_value, flip_d_term=False):
        self.flip_d_term = flip_d_term
        self.fixed_d = d_value

    def d_value(self, x):
        if self.fixed_d is None:
            raise LimitUnstableError('D unavailable', table=[])
        return self.fixed_d

    def r0(self, mu, x):
        mus, values = zip(*self.MEASURED)
        return float(np.interp(np.log(mu), np.log(mus), values))


class RootSelectionTests(SimpleTestCase):

    window = (4.70, 11.66)

    def test_negative_d_takes_the_falling_crossing(self):
        mu, table = ScriptedProblem(-1.0).solve_mu([CENTER], self.window)
        self.assertTrue(9.72 < mu < 11.66, mu)
        self.assertEqual(len(table), 24)

    def test_flipped_d_term_takes_the_rising_crossing(self):
        mu, _ = ScriptedProblem(-1.0, flip_d_term=True).solve_mu([CENTER], self.window)
        self.assertTrue(4.70 < mu < 5.63, mu)

    def test_no_crossing_in_the_required_direction(self):
        mu, table = ScriptedProblem(-1.0).solve_mu([CENTER], (4.70, 9.0))
        self.assertIsNone(mu)
        self.assertTrue(table)

    def test_unknown_d_takes_the_largest_crossing(self):
        mu, _ = ScriptedProblem(None).solve_mu([CENTER], self.window)
        self.assertTrue(9.72 < mu < 11.66, mu)


class ReducedSolveTests(ReductionFixture, SimpleTestCase):

    EPS = 0.01

    def setUp(self):
        super().setUp()
        self.p0 = self.params(20.0)
        self.D = d_of_q(self.g, self.cfg, [CENTER]).value

    def test_window(self):
        lo, hi = mu_window(0.01, 0.05, 0.2, 5.0)
        self.assertAlmostEqual(lo, CUTOFF_MARGIN / np.sqrt(0.05))
        lo, _ = mu_window(0.0001, 0.05, 0.2, 5.0)
        self.assertAlmostEqual(lo, 20.0)
        self.assertAlmostEqual(hi, 50.0)

    def test_solvable_exactly_when_d_negative(self):
        if self.D < 0:
            solution = solve_reduced(self.p0, self.EPS, self.g, self.cfg)
            self.assertLessEqual(solution.residuals.max_normalized, 1e-8)
            self.assertTrue(solution.window[0] <= solution.mu <= solution.window[1])
            np.testing.assert_allclose(solution.x.ravel(), CENTER, atol=1e-8)
        else:
            with self.assertRaises(ReducedSystemInfeasibleError):
                solve_reduced(self.p0, self.EPS, self.g, self.cfg)

    def test_flipped_d_term_reverses_outcome(self):
        if self.D < 0:
            with self.assertRaises(ReducedSystemInfeasibleError):
                solve_reduced(self.p0, self.EPS, self.g, self.cfg, flip_d_term=True)
        else:
            solution = solve_reduced(self.p0, self.EPS, self.g, self.cfg, flip_d_term=True)
            self.assertLessEqual(solution.residuals.max_normalized, 1e-8)

    def test_a0_matches_hessian(self):
        if self.D >= 0:
            self.skipTest('the reduced system has no root where D is nonnegative')
        solution = solve_reduced(self.p0, self.EPS, self.g, self.cfg, fit_constants=True)
        self.assertIsNotNone(solution.a0)
        self.assertLess(solution.a0_misfit, 0.1)

    def test_mu_scales_like_inverse_sqrt_eps(self):
        if self.D >= 0:
            self.skipTest('the reduced system has no root where D is nonnegative')
        solutions = reduce_sweep([0.01, 0.005, 0.0025], self.p0, self.g, self.cfg)
        self.assertEqual([s.eps for s in solutions], [0.01, 0.005, 0.0025])
        self.assertAlmostEqual(mu_scaling_slope(solutions), -0.5, delta=0.1)
        for s in solutions:
            self.assertTrue(0.7 <= s.mu * np.sqrt(s.eps) <= 1.3, s.mu)

    def test_fits(self):
        hessian = np.array([[2.0, 0.5], [0.5, -1.0]])
        a0, misfit = fit_a0(3.0 * hessian, hessian)
        self.assertAlmostEqual(a0, 3.0, places=12)
        self.assertLess(misfit, 1e-12)
        table = [(mu, 0.7 * 0.01 ** 2 * mu + 2.0 / mu ** 3) for mu in (5.0, 10.0, 20.0)]
        self.assertAlmostEqual(fit_b0(table, 0.01, lambda mu: 2.0 / mu ** 3), 0.7, places=10)
