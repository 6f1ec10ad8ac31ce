import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import quad

from apps.core.exceptions import AnsatzInfeasibleError, InvalidConfigurationError
from apps.green.ewald import GreenEvaluator, u0_eval
from apps.green.vortices import make_vortex_config
from apps.torus.quadrature import polar_patch
from apps.torus.spectral import Field, make_domain

from .bubbles import (
    bubble,
    bubble_radial,
    default_cutoff,
    make_bubble_params,
    rho_weights,
)
from .profile import (
    bubble_mass,
    bubble_quadrature,
    build_ansatz,
    c_of_w,
    candidate_u,
    component_means,
    mass_normalization,
    quadrature_domain,
    total_mass,
    w_star,
    w_star_branches,
    w_star_laplacian,
)

VORTICES = [(0.25, 0.5), (0.75, 0.5)]
CENTER = (0.5, 0.0)
CUTOFF = 0.04
SCALES = [16.0, 32.0, 64.0, 128.0]


def fd_laplacian(fn, y, h=1e-3):
    """Fourth-order five-point Laplacian along both axes"""
    total = -60.0 * fn(y)
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        total = total + 16 * (fn(y + e) + fn(y - e)) - (fn(y + 2 * e) + fn(y - 2 * e))
    return total / (12 * h * h)


class BubbleTests(SimpleTestCase):

    def test_peak_value(self):
        x = np.array([0.3, 0.7])
        self.assertAlmostEqual(bubble(x, 5.0, x), np.log(200.0), places=14)

    def test_liouville_equation(self):
        x, mu = np.array([0.0, 0.0]), 3.0
        rng = np.random.default_rng(8)
        for y in rng.uniform(-0.4, 0.4, size=(20, 2)):
            lap = fd_laplacian(lambda p: bubble(x, mu, p), y)
            expected = np.exp(bubble(x, mu, y))
            self.assertLess(abs(lap + expected), 1e-6 * expected)

    def test_total_mass(self):
        mu = 7.0
        mass, _ = quad(lambda r: 2 * np.pi * np.exp(bubble_radial(mu, r)) * r, 0, np.inf, limit=200)
        self.assertAlmostEqual(mass, 8 * np.pi, delta=1e-9)

    def test_nearest_image_distance(self):
        self.assertAlmostEqual(
            bubble((0.05, 0.5), 4.0, (0.95, 0.5), periods=(1.0, 1.0)),
            bubble((0.05, 0.5), 4.0, (-0.05, 0.5)),
            places=12,
        )


class RhoWeightsTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))

    def test_single_center(self):
        cfg = make_vortex_config(VORTICES)
        x = np.array(CENTER)
        expected = np.exp(8 * np.pi * self.g.gamma(x, x) + u0_eval(self.g, cfg, x))
        self.assertAlmostEqual(rho_weights(cfg, self.g, [CENTER])[0] / expected, 1.0, places=12)

    def test_swapping_centers_swaps_weights(self):
        cfg = make_vortex_config(VORTICES, [2, 2])
        a, b = (0.4, 0.2), (0.6, 0.7)
        forward = rho_weights(cfg, self.g, [a, b])
        backward = rho_weights(cfg, self.g, [b, a])
        np.testing.assert_allclose(forward, backward[::-1], rtol=1e-12)

    def test_symmetric_pair_has_equal_weights(self):
        cfg = make_vortex_config(VORTICES, [2, 2])
        rho = rho_weights(cfg, self.g, [(0.5, 0.25), (0.5, 0.75)])
        self.assertLess(abs(rho[0] - rho[1]), 1e-10 * rho[0])

    def test_coincident_centers(self):
        cfg = make_vortex_config(VORTICES, [2, 2])
        with self.assertRaises(InvalidConfigurationError):
            rho_weights(cfg, self.g, [(0.5, 0.25), (1.5, 0.25)])


class BubbleParamsTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)

    def test_derived_scales(self):
        cfg = make_vortex_config(VORTICES, [2, 2])
        params = make_bubble_params(self.g, cfg, [(0.4, 0.2), (0.6, 0.75)], 30.0)
        rho = np.asarray(params.rho)
        np.testing.assert_allclose(params.mu_i, [30.0, 30.0 * np.sqrt(rho[0] / rho[1])])
        np.testing.assert_allclose(params.d_i ** 2, params.d - 1 / params.mu_i ** 2)

    def test_default_cutoff(self):
        self.assertAlmostEqual(default_cutoff(self.cfg, [CENTER], (1.0, 1.0)), (0.5 / 4) ** 2)

    def test_rejects_cutoff_below_core(self):
        with self.assertRaises(InvalidConfigurationError):
            make_bubble_params(self.g, self.cfg, [CENTER], 4.0, d=0.04)

    def test_rejects_ball_containing_vortex(self):
        with self.assertRaises(InvalidConfigurationError):
            make_bubble_params(self.g, self.cfg, [(0.35, 0.5)], 40.0, d=0.04)

    def test_requires_half_the_vortex_number(self):
        with self.assertRaises(InvalidConfigurationError):
            make_bubble_params(self.g, self.cfg, [(0.5, 0.0), (0.5, 0.5)], 40.0)


class WStarTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)
        self.params = make_bubble_params(self.g, self.cfg, [CENTER], 16.0, d=CUTOFF)

    def test_branches_agree_on_matching_circle(self):
        radius = self.params.d_i[0]
        theta = 2 * np.pi * np.arange(64) / 64
        y = np.array(CENTER) + radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        inner, outer = w_star_branches(self.params, self.g, 0, y)
        self.assertLess(np.max(np.abs(inner - outer)), 1e-9)

    def test_inner_branch_on_circle(self):
        radius = self.params.d_i[0]
        y = np.array(CENTER) + radius * np.array([0.6, 0.8])
        inner, _ = w_star_branches(self.params, self.g, 0, y)
        expected = (bubble_radial(16.0, radius)
                    + 8 * np.pi * self.g.gamma(y, np.array(CENTER)) * (1 - 1 / (CUTOFF * 16.0 ** 2)))
        self.assertAlmostEqual(float(inner), float(expected), places=12)

    def test_far_field_level(self):
        domain = make_domain(1, 1, 32)
        nodes = domain.nodes.reshape(-1, 2)
        far = nodes[np.linalg.norm(domain.displacement(nodes, CENTER), axis=-1) > 0.3]
        for mu in SCALES:
            params = make_bubble_params(self.g, self.cfg, [CENTER], mu, d=CUTOFF)
            level = w_star(params, self.g, self.cfg, far) + 2 * self.cfg.k * np.log(mu)
            self.assertLess(np.max(np.abs(level)), 25.0)

    def test_laplacian_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        radius = self.params.d_i[0]
        for _ in range(30):
            r = rng.choice([rng.uniform(0.02, radius - 0.03), rng.uniform(radius + 0.03, 0.45)])
            theta = rng.uniform(0, 2 * np.pi)
            y = np.array(CENTER) + r * np.array([np.cos(theta), np.sin(theta)])
            fd = fd_laplacian(lambda p: w_star(self.params, self.g, self.cfg, p), y)
            exact = float(w_star_laplacian(self.params, y, 1.0))
            self.assertLess(abs(fd - exact), 1e-5 * (1 + abs(exact)))


class MatchingConstantTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)

    def test_c_scales_like_minus_six_log_mu(self):
        levels = []
        for mu in SCALES:
            params = make_bubble_params(self.g, self.cfg, [CENTER], mu, d=CUTOFF, eps=1 / mu ** 2)
            levels.append(c_of_w(params, self.g, self.cfg) + 6 * np.log(mu))
        self.assertLess(np.ptp(levels), 2.0)

    def test_mean_removal_scales_like_two_log_mu(self):
        levels = []
        for mu in SCALES:
            params = make_bubble_params(self.g, self.cfg, [CENTER], mu, d=CUTOFF)
            quad_rule = bubble_quadrature(params, quadrature_domain(params))
            levels.append(-component_means(params, self.g, quad_rule)[0] - 2 * np.log(mu))
        self.assertLess(np.ptp(levels), 1.5)

    def test_large_eps_is_infeasible(self):
        params = make_bubble_params(self.g, self.cfg, [CENTER], 10.0, eps=10.0)
        with self.assertRaises(AnsatzInfeasibleError):
            c_of_w(params, self.g, self.cfg)


class AnsatzFieldTests(SimpleTestCase):

    def setUp(self):
        self.g = GreenEvaluator((1.0, 1.0))
        self.cfg = make_vortex_config(VORTICES)
        self.domain = make_domain(1, 1, 64)

    def _ansatz(self, mu):
        params = make_bubble_params(self.g, self.cfg, [CENTER], mu, d=CUTOFF, eps=1 / mu ** 2)
        return build_ansatz(params, self.g, self.cfg, self.domain)

    def test_mean_adjustment_identity(self):
        ansatz = self._ansatz(16.0)
        total = sum(f.values for f in ansatz.components)
        np.testing.assert_allclose(
            ansatz.W_tilde.values, total - ansatz.mean_w_star + ansatz.c_value, atol=1e-12)

    def test_pointwise_and_grid_values_agree(self):
        ansatz = self._ansatz(16.0)
        nodes = self.domain.nodes[::7, ::5]
        np.testing.assert_allclose(ansatz.at(nodes), ansatz.W_tilde.values[::7, ::5], atol=1e-12)

    def test_candidate_stays_on_branch(self):
        ansatz = self._ansatz(16.0)
        u = candidate_u(ansatz)
        self.assertLessEqual(u.values.max(), 0.0)
        eta = Field.zeros(self.domain)
        np.testing.assert_array_equal(candidate_u(ansatz, eta).values, u.values)

    def test_local_mass(self):
        defects = []
        for mu in SCALES:
            params = make_bubble_params(self.g, self.cfg, [CENTER], mu, d=CUTOFF)
            ratio = bubble_mass(params, self.g, self.cfg, 0) / (8 * np.pi * mass_normalization(params))
            defects.append(abs(ratio - 1))
        defects = np.array(defects)
        scales = np.array(SCALES)
        self.assertTrue(np.all(defects * scales ** 2 / np.log(scales) < 200))
        self.assertLess(defects[-1], defects[0] / 10)

    def test_total_mass(self):
        defects = []
        for mu in SCALES:
            params = make_bubble_params(self.g, self.cfg, [CENTER], mu, d=CUTOFF)
            quad_rule = bubble_quadrature(params, quadrature_domain(params))
            mass = total_mass(params, self.g, self.cfg, quad_rule)
            defects.append(abs(mass / (8 * self.cfg.k * np.pi * mass_normalization(params)) - 1))
        defects = np.array(defects)
        scales = np.array(SCALES)
        self.assertTrue(np.all(defects * scales ** 2 / np.log(scales) < 200))
        self.assertLess(defects[-1], defects[0] / 10)

    def test_exponential_bounds(self):
        outside, inside = [], []
        for mu in (16.0, 64.0):
            ansatz = self._ansatz(mu)
            eps = ansatz.params.eps
            nodes = self.domain.nodes.reshape(-1, 2)
            far = nodes[np.linalg.norm(self.domain.displacement(nodes, CENTER), axis=-1) > ansatz.params.d_i[0]]
            outside.append(np.max(np.exp(ansatz.at(far))) / eps ** 3)
            patch = polar_patch(CENTER, ansatz.params.d_i[0], scale=1 / mu)
            core = bubble(CENTER, mu, patch.points, periods=(1.0, 1.0))
            inside.append(np.max(np.exp(ansatz.at(patch.points) - core)) / eps ** 2)
        self.assertLess(max(outside) / min(outside), 20.0)
        self.assertLess(max(inside), 50.0)

    def test_relabeling_symmetric_pair(self):
        cfg = make_vortex_config(VORTICES, [2, 2])
        a, b = (0.5, 0.25), (0.5, 0.75)
        fields = []
        for centers in ([a, b], [b, a]):
            params = make_bubble_params(self.g, cfg, centers, 20.0, eps=1 / 400)
            fields.append(build_ansatz(params, self.g, cfg, self.domain).W_tilde.values)
        np.testing.assert_allclose(fields[0], fields[1], atol=1e-8)
