import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import InvalidArgumentError, NonzeroMeanError

from .cutoffs import bump_derivatives, smoothstep, smoothstep_derivatives
from .spectral import (
    Field,
    FieldSampler,
    gradient,
    integrate,
    laplacian,
    make_domain,
    poisson_solve,
    prolong,
    shifted_poisson_solve,
)


def trig_poly(domain, degree, seed=0):
    """Random real trigonometric polynomial and its exact Laplacian"""
    rng = np.random.default_rng(seed)
    x1, x2 = np.meshgrid(*domain.axes, indexing='ij')
    L1, L2 = domain.periods
    values = np.zeros_like(x1)
    lap = np.zeros_like(x1)
    for a in range(-degree, degree + 1):
        for b in range(0, degree + 1):
            if a == 0 and b == 0:
                continue
            ca, cb = rng.normal(size=2)
            k1, k2 = 2 * np.pi * a / L1, 2 * np.pi * b / L2
            phase = k1 * x1 + k2 * x2
            term = ca * np.cos(phase) + cb * np.sin(phase)
            values += term
            lap -= (k1 ** 2 + k2 ** 2) * term
    return values, lap


class MakeDomainTests(SimpleTestCase):

    def test_unit_square(self):
        domain = make_domain(1, 1, 64, (0.5, 0.5))
        self.assertEqual(domain.nodes.shape, (64, 64, 2))
        self.assertAlmostEqual(domain.spacing[0], 1 / 64)
        self.assertAlmostEqual(domain.nodes[0, 0, 0], 0.5 / 64)

    def test_anisotropic_cells(self):
        domain = make_domain(2, 0.5, 32, (0, 0))
        self.assertAlmostEqual(domain.area, 1.0)
        self.assertAlmostEqual(domain.spacing[0], 2 / 32)
        self.assertAlmostEqual(domain.spacing[1], 0.5 / 32)

    def test_rejects_bad_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            make_domain(1, -1, 64, (0, 0))
        with self.assertRaises(InvalidArgumentError):
            make_domain(1, 1, 33, (0, 0))
        with self.assertRaises(InvalidArgumentError):
            make_domain(1, 1, 8, (0, 0))

    def test_default_offset_is_half_cell(self):
        domain = make_domain(1, 1, 32)
        self.assertEqual(domain.offset, (0.5, 0.5))

    def test_displacement_uses_nearest_image(self):
        domain = make_domain(1, 1, 32)
        delta = domain.displacement([0.95, 0.1], [0.05, 0.9])
        np.testing.assert_allclose(delta, [-0.1, 0.2], atol=1e-14)


class FieldTests(SimpleTestCase):

    def setUp(self):
        self.domain = make_domain(1, 1, 32)

    def test_rejects_non_finite(self):
        values = np.zeros((32, 32))
        values[3, 4] = np.nan
        with self.assertRaises(InvalidArgumentError):
            Field(self.domain, values)

    def test_declared_mean_is_checked(self):
        Field(self.domain, np.full((32, 32), 2.0), declared_mean=2.0)
        with self.assertRaises(InvalidArgumentError):
            Field(self.domain, np.full((32, 32), 2.0), declared_mean=1.0)


class IntegrateTests(SimpleTestCase):

    def test_constant_and_sine(self):
        domain = make_domain(1, 1, 64)
        self.assertAlmostEqual(integrate(Field(domain, np.ones((64, 64)))), 1.0, places=13)
        sine = Field.from_function(domain, lambda x1, x2: np.sin(2 * np.pi * x1))
        self.assertLess(abs(integrate(sine)), 1e-13)

    def test_exact_on_trig_polynomials(self):
        domain = make_domain(2, 0.5, 32, (0.25, 0.75))
        values, _ = trig_poly(domain, 10)
        f = Field(domain, values + 3.0)
        self.assertAlmostEqual(integrate(f), 3.0 * domain.area, places=12)


class LaplacianTests(SimpleTestCase):

    def test_constant_is_in_kernel(self):
        domain = make_domain(1, 1, 32)
        lap = laplacian(Field(domain, np.full((32, 32), 5.0)))
        self.assertLess(lap.sup_norm(), 1e-12)

    def test_eigenfunction(self):
        domain = make_domain(1, 1, 64)
        f = Field.from_function(domain, lambda x1, x2: np.sin(2 * np.pi * x1))
        np.testing.assert_allclose(laplacian(f).values, -4 * np.pi ** 2 * f.values, atol=1e-10)

    def test_matches_symbolic_laplacian(self):
        domain = make_domain(1, 1, 64)
        values, expected = trig_poly(domain, 20, seed=3)
        lap = laplacian(Field(domain, values))
        scale = np.max(np.abs(expected))
        self.assertLess(np.max(np.abs(lap.values - expected)) / scale, 1e-10)
        self.assertLess(abs(lap.mean()), 1e-12 * scale)

    def test_gradient_of_plane_wave(self):
        domain = make_domain(1, 1, 32)
        f = Field.from_function(domain, lambda x1, x2: np.cos(2 * np.pi * (x1 + 2 * x2)))
        d1, d2 = gradient(f)
        expected = -2 * np.pi * np.sin(2 * np.pi * (domain.nodes[..., 0] + 2 * domain.nodes[..., 1]))
        np.testing.assert_allclose(d1.values, expected, atol=1e-10)
        np.testing.assert_allclose(d2.values, 2 * expected, atol=1e-10)


class PoissonSolveTests(SimpleTestCase):

    def test_eigenfunction(self):
        domain = make_domain(1, 1, 64)
        rhs = Field.from_function(domain, lambda x1, x2: np.cos(2 * np.pi * x1))
        phi = poisson_solve(rhs)
        np.testing.assert_allclose(phi.values, -rhs.values / (4 * np.pi ** 2), atol=1e-14)

    def test_zero_field(self):
        domain = make_domain(1, 1, 32)
        phi = poisson_solve(Field.zeros(domain))
        self.assertEqual(phi.sup_norm(), 0.0)

    def test_rejects_nonzero_mean(self):
        domain = make_domain(1, 1, 32)
        with self.assertRaises(NonzeroMeanError):
            poisson_solve(Field(domain, np.full((32, 32), 0.5)))

    def test_round_trip(self):
        domain = make_domain(2, 0.5, 64)
        values, _ = trig_poly(domain, 15, seed=7)
        rhs = Field(domain, values - values.mean())
        phi = poisson_solve(rhs)
        self.assertLess(abs(phi.mean()), 1e-12)
        defect = np.max(np.abs(laplacian(phi).values - rhs.values))
        self.assertLess(defect, 1e-9 * rhs.sup_norm())

    def test_shifted_solve(self):
        domain = make_domain(1, 1, 32)
        f = Field.from_function(domain, lambda x1, x2: np.cos(2 * np.pi * x2) + 1.0)
        phi = shifted_poisson_solve(domain, f.values, 2.0)
        residual = laplacian(Field(domain, phi)).values - 2.0 * phi
        np.testing.assert_allclose(residual, f.values, atol=1e-12)


class ResamplingTests(SimpleTestCase):

    def test_prolong_is_exact_on_band_limited_fields(self):
        domain = make_domain(1, 1, 32, (0.5, 0.25))

        def fn(x1, x2):
            return np.sin(2 * np.pi * x1) * np.cos(6 * np.pi * x2) + np.cos(4 * np.pi * x1)

        fine = prolong(Field.from_function(domain, fn), 64)
        expected = Field.from_function(fine.domain, fn)
        np.testing.assert_allclose(fine.values, expected.values, atol=1e-12)

    def test_sampler_interpolates_smooth_fields(self):
        domain = make_domain(1, 1, 64)
        f = Field.from_function(domain, lambda x1, x2: np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2))
        sampler = FieldSampler(f)
        points = np.array([[0.013, 0.77], [0.999, 0.001], [1.3, -0.2]])
        expected = np.sin(2 * np.pi * points[:, 0]) * np.cos(2 * np.pi * points[:, 1])
        np.testing.assert_allclose(sampler(points), expected, atol=1e-5)


class CutoffTests(SimpleTestCase):

    def test_smoothstep_limits(self):
        r = np.array([0.0, 0.1, 0.15, 0.2, 0.3])
        np.testing.assert_allclose(smoothstep(r, 0.1, 0.2), [1, 1, 0.5, 0, 0])

    def test_smoothstep_derivatives_match_differences(self):
        r = np.linspace(0.11, 0.19, 9)
        h = 1e-6
        _, d1, d2 = smoothstep_derivatives(r, 0.1, 0.2)
        fd1 = (smoothstep(r + h, 0.1, 0.2) - smoothstep(r - h, 0.1, 0.2)) / (2 * h)
        np.testing.assert_allclose(d1, fd1, rtol=1e-6, atol=1e-6)
        fd2 = (smoothstep_derivatives(r + h, 0.1, 0.2)[1] - smoothstep_derivatives(r - h, 0.1, 0.2)[1]) / (2 * h)
        np.testing.assert_allclose(d2, fd2, rtol=1e-5, atol=1e-3)

    def test_bump_derivatives_match_differences(self):
        r = np.linspace(0.12, 0.18, 7)
        h = 1e-6
        value, d1, d2 = bump_derivatives(r, 0.1, 0.2)
        plus = bump_derivatives(r + h, 0.1, 0.2)
        minus = bump_derivatives(r - h, 0.1, 0.2)
        np.testing.assert_allclose(d1, (plus[0] - minus[0]) / (2 * h), rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(d2, (plus[1] - minus[1]) / (2 * h), rtol=1e-4, atol=1e-3)
        self.assertTrue(np.all((value > 0) & (value < 1)))
