import numpy as np
from django.test import SimpleTestCase

from apps.ansatz.bubbles import make_bubble_params
from apps.core.exceptions import InvalidArgumentError, NoSolutionDetectedError, OutOfBranchError
from apps.functionals.dq import d_of_q
from apps.green.ewald import GreenEvaluator, u0_field
from apps.green.vortices import make_vortex_config
from apps.higgs.branch import get_model
from apps.torus.spectral import Field, apply_laplacian, make_domain

from .classify import (
    NON_TOPOLOGICAL,
    TOPOLOGICAL,
    UNDETERMINED,
    bubbling_solve,
    classify,
    concentration,
    continuation,
    resolution_check,
    sup_u_slope,
)
from .monotone import maximal_solution, pointwise_gap
from .newton import (
    SIGN_TOL,
    Solution,
    SolveReport,
    check_branch,
    flux_source,
    jacobian_apply,
    newton_solve,
    quasilinear_residual,
    residual,
)

VORTICES = [(0.25, 0.5), (0.75, 0.5)]
FAR_POINTS = np.array([(0.5, 0.0), (0.0, 0.0), (0.5, 0.2), (0.0, 0.8)])


class ZeroModel:
    name = 'zero'
    max_u = 0.0

    def __call__(self, u, eps):
        return np.zeros_like(u)


class SolverFixture:

    n = 64

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)
        self.domain = make_domain(1.0, 1.0, self.n)
        self.u0 = u0_field(self.g, self.cfg, self.domain)

    def smooth(self, shift=-6.0, amplitude=0.3):
        return Field.from_function(
            self.domain,
            lambda x1, x2: shift + amplitude * np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2),
            name='phi',
        )


class ResidualTests(SolverFixture, SimpleTestCase):

    def test_manufactured_solution(self):
        eps = 0.1
        phi = self.smooth()
        self.assertLess(np.max(self.u0.values + phi.values), 0)
        model = get_model()
        forcing = Field(self.domain, apply_laplacian(self.domain, phi.values)
                        + model(self.u0.values + phi.values, eps) - flux_source(self.cfg, self.domain))
        r = residual(phi, self.u0, eps, self.cfg, forcing=forcing)
        self.assertLess(r.sup_norm(), 1e-9)
        nodes = self.domain.nodes
        start = phi.with_values(phi.values + 0.05 * np.cos(2 * np.pi * (nodes[..., 0] + nodes[..., 1])))
        solved = newton_solve(start, eps, self.g, self.cfg, u0=self.u0, forcing=forcing)
        self.assertLess(np.max(np.abs(solved.phi.values - phi.values)), 1e-8)

    def test_flux_without_nonlinearity(self):
        r = residual(self.smooth(), self.u0, 0.1, self.cfg, model=ZeroModel())
        self.assertAlmostEqual(r.mean(), -4 * np.pi * self.cfg.N, delta=1e-10)

    def test_out_of_branch(self):
        with self.assertRaises(OutOfBranchError):
            residual(self.smooth(shift=50.0), self.u0, 0.1, self.cfg)


class JacobianTests(SolverFixture, SimpleTestCase):

    eps = 0.1

    def test_constant_direction(self):
        phi = self.smooth()
        one = Field(self.domain, np.ones((self.n, self.n)))
        expected = get_model().derivative(self.u0.values + phi.values, self.eps)
        np.testing.assert_allclose(jacobian_apply(phi, one, self.u0, self.eps).values, expected,
                                   rtol=1e-10, atol=1e-10 * np.max(np.abs(expected)))

    def test_symmetric(self):
        phi = self.smooth()
        rng = np.random.default_rng(4)
        a = Field(self.domain, rng.standard_normal((self.n, self.n)))
        b = Field(self.domain, rng.standard_normal((self.n, self.n)))
        left = np.sum(jacobian_apply(phi, a, self.u0, self.eps).values * b.values)
        right = np.sum(a.values * jacobian_apply(phi, b, self.u0, self.eps).values)
        scale = np.sqrt(np.sum(jacobian_apply(phi, a, self.u0, self.eps).values ** 2) * np.sum(b.values ** 2))
        self.assertLess(abs(left - right), 1e-10 * scale)

    def test_matches_finite_difference(self):
        phi = self.smooth(shift=-3.0)
        direction = self.smooth(shift=0.0, amplitude=1.0)
        h = 1e-6
        plus = residual(phi.with_values(phi.values + h * direction.values), self.u0, self.eps, self.cfg)
        minus = residual(phi.with_values(phi.values - h * direction.values), self.u0, self.eps, self.cfg)
        fd = (plus.values - minus.values) / (2 * h)
        exact = jacobian_apply(phi, direction, self.u0, self.eps).values
        self.assertLess(np.max(np.abs(fd - exact)), 1e-5 * np.max(np.abs(exact)))


class NewtonTests(SolverFixture, SimpleTestCase):

    eps = 0.05

    def setUp(self):
        super().setUp()
        self.solution = newton_solve(self.u0.with_values(-self.u0.values), self.eps, self.g, self.cfg, u0=self.u0)

    def test_flux_identity_and_sign(self):
        report = self.solution.report
        self.assertTrue(report.converged)
        self.assertLessEqual(report.residual, 1e-10)
        self.assertLessEqual(report.flux_defect, 1e-9)
        self.assertLessEqual(report.sup_v, 1e-10)
        self.assertFalse(report.clipped)

    def test_quasilinear_form(self):
        defect = quasilinear_residual(self.solution, self.g, self.cfg, FAR_POINTS)
        self.assertLess(np.max(np.abs(defect)), 1e-2)

    def test_reconverges_after_perturbation(self):
        rng = np.random.default_rng(11)
        noisy = self.solution.phi.with_values(self.solution.phi.values + 1e-6 * rng.standard_normal((self.n, self.n)))
        again = newton_solve(noisy, self.eps, self.g, self.cfg, u0=self.u0)
        self.assertLess(np.max(np.abs(again.phi.values - self.solution.phi.values)), 1e-8)

    def test_report_summary_order(self):
        keys = list(self.solution.report.summary())
        self.assertEqual(keys[:3], ['eps', 'model', 'converged'])

    def test_mean_free_part(self):
        self.assertAlmostEqual(self.solution.w.mean(), 0.0, places=12)
        self.assertGreater(self.solution.report.grad_w, 0)


class BranchCheckTests(SimpleTestCase):

    def report(self, **kwargs):
        return SolveReport(converged=True, eps=0.05, model='generalized', **kwargs)

    def test_negative_v_passes(self):
        report = self.report(sup_v=-0.5)
        self.assertIs(check_branch(report), report)
        check_branch(self.report(sup_v=SIGN_TOL))

    def test_positive_v_rejected(self):
        with self.assertRaises(OutOfBranchError) as ctx:
            check_branch(self.report(sup_v=1e-6))
        self.assertEqual(ctx.exception.worst_value, 1e-6)

    def test_clipped_final_step_rejected(self):
        with self.assertRaises(OutOfBranchError):
            check_branch(self.report(sup_v=-1.0, clipped=True))


class MaximalBranchTests(SolverFixture, SimpleTestCase):

    schedule = [0.05, 0.04, 0.03]

    def setUp(self):
        super().setUp()
        self.run = continuation(self.schedule, self.g, self.cfg, self.domain, branch='maximal')

    def test_monotone_in_eps(self):
        for larger, smaller in zip(self.run.solutions, self.run.solutions[1:]):
            self.assertGreaterEqual(pointwise_gap(smaller, larger), -1e-9)

    def test_l2_decreases(self):
        l2 = [r.L2_of_v for r in self.run.reports]
        self.assertTrue(all(b < a for a, b in zip(l2, l2[1:])))

    def test_classified_topological(self):
        self.assertEqual(classify(self.run), TOPOLOGICAL)
        self.assertEqual(self.run.reports[0].branch_label, TOPOLOGICAL)

    def test_no_concentration(self):
        fractions, total = concentration(self.run.solutions[-1], [(0.5, 0.0)], 0.1)
        self.assertAlmostEqual(fractions[0], np.pi * 0.01, delta=0.01)
        self.assertLess(total, 1.0)


class MaximalFailureTests(SolverFixture, SimpleTestCase):

    n = 32

    def test_large_eps(self):
        with self.assertRaises(NoSolutionDetectedError):
            maximal_solution(1.0, self.g, self.cfg, self.domain)

    def test_resolution(self):
        coarse = maximal_solution(0.05, self.g, self.cfg, make_domain(1.0, 1.0, 64))
        change, fine = resolution_check(coarse, self.g, self.cfg)
        self.assertEqual(fine.domain.n, 128)
        self.assertLess(change, 1e-6)


class ClassifyTests(SimpleTestCase):

    def reports(self, sup_v, l2, mean_u):
        return [SolveReport(converged=True, eps=0.1, model='generalized', sup_v=s, L2_of_v=l, mean_u=m)
                for s, l, m in zip(sup_v, l2, mean_u)]

    def test_topological_trend(self):
        reports = self.reports([-1e-2, -1e-3, -1e-4], [0.3, 0.2, 0.1], [-0.3, -0.2, -0.1])
        self.assertEqual(classify(reports), TOPOLOGICAL)

    def test_non_topological_trend(self):
        reports = self.reports([-2.0, -3.0, -4.0], [5.0, 6.0, 7.0], [-2.0, -3.0, -4.0])
        self.assertEqual(classify(reports), NON_TOPOLOGICAL)

    def test_constant_family(self):
        reports = self.reports([-1.0] * 3, [1.0] * 3, [-1.0] * 3)
        self.assertEqual(classify(reports), UNDETERMINED)

    def test_too_few_points(self):
        reports = self.reports([-1e-2, -1e-3], [0.3, 0.2], [-0.3, -0.2])
        self.assertEqual(classify(reports), UNDETERMINED)

    def test_schedule_must_decrease(self):
        g = GreenEvaluator((1.0, 1.0))
        cfg = make_vortex_config(VORTICES)
        with self.assertRaises(InvalidArgumentError):
            continuation([0.02, 0.04], g, cfg, make_domain(1.0, 1.0, 32), branch='maximal')


class ConcentrationTests(SolverFixture, SimpleTestCase):

    def test_uniform_density(self):
        zero = Field.zeros(self.domain)
        solution = Solution(phi=zero, u0=zero, eps=0.1, model=get_model(),
                            report=SolveReport(converged=True, eps=0.1, model='generalized'))
        fractions, _ = concentration(solution, [(0.5, 0.5)], 0.1)
        self.assertAlmostEqual(fractions[0], np.pi * 0.01, delta=2e-3)
        _, total = concentration(solution, [(0.5, 0.5)], 1.0)
        self.assertAlmostEqual(total, 1.0, places=12)


class BubblingBranchTests(SimpleTestCase):
    """One continuation along the bubbling branch, shared by every test"""

    n = 128
    center = (0.5, 0.0)
    schedule = [0.01, 0.005, 0.0025]

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.g = GreenEvaluator((1.0, 1.0))
        cls.cfg = make_vortex_config(VORTICES)
        cls.domain = make_domain(1.0, 1.0, cls.n)
        cls.branch_run = None
        if d_of_q(cls.g, cls.cfg, [cls.center]).value < 0:
            params0 = make_bubble_params(cls.g, cls.cfg, [cls.center], 10.0, d=0.05)
            cls.branch_run = continuation(cls.schedule, cls.g, cls.cfg, cls.domain, params0=params0)

    def setUp(self):
        if self.branch_run is None:
            self.skipTest('no bubbling solution is expected where D is nonnegative')

    def test_converged_below_zero(self):
        for report in self.branch_run.reports:
            self.assertTrue(report.converged)
            self.assertLessEqual(report.sup_v, 1e-10)
            self.assertLess(report.flux_defect, 1e-9)

    def test_mass_gathers_at_center(self):
        fractions = [report.concentration[0] for report in self.branch_run.reports]
        self.assertGreater(fractions[0], 0.2)
        self.assertTrue(all(b > a for a, b in zip(fractions, fractions[1:])), fractions)

    def test_sup_v_decreases(self):
        sup_v = [report.sup_v for report in self.branch_run.reports]
        self.assertTrue(all(b < a for a, b in zip(sup_v, sup_v[1:])), sup_v)

    def test_classified_non_topological(self):
        self.assertEqual(classify(self.branch_run), NON_TOPOLOGICAL)

    def test_sup_u_against_log_mu(self):
        self.assertAlmostEqual(sup_u_slope(self.branch_run), -2.0, delta=0.2)

    def test_few_newton_steps_from_ansatz(self):
        self.assertLessEqual(self.branch_run.reports[0].iterations, 8)

    def test_lies_below_maximal_solution(self):
        eps = self.schedule[0]
        upper = maximal_solution(eps, self.g, self.cfg, self.domain)
        self.assertGreaterEqual(pointwise_gap(upper, self.branch_run.solutions[0]), -1e-9)


class TwoBubbleTests(SimpleTestCase):

    vortices = [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)]
    centers = [(0.5, 0.0), (0.5, 0.5)]
    schedule = [0.01, 0.005, 0.0025]

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        g = GreenEvaluator((1.0, 1.0))
        cfg = make_vortex_config(cls.vortices)
        cls.branch_run = None
        if d_of_q(g, cfg, cls.centers).value < 0:
            params0 = make_bubble_params(g, cfg, cls.centers, 10.0, d=0.04)
            cls.branch_run = continuation(cls.schedule, g, cfg, make_domain(1.0, 1.0, 256), params0=params0)

    def setUp(self):
        if self.branch_run is None:
            self.skipTest('no bubbling solution is expected where D is nonnegative')

    def test_mass_splits_evenly(self):
        for report in self.branch_run.reports:
            fractions = np.asarray(report.concentration)
            np.testing.assert_allclose(fractions / fractions.sum(), [0.5, 0.5], atol=0.05)

    def test_sup_v_decreases(self):
        sup_v = [report.sup_v for report in self.branch_run.reports]
        self.assertTrue(all(b < a for a, b in zip(sup_v, sup_v[1:])), sup_v)
