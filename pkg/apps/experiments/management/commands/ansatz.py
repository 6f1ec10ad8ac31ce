import numpy as np

from apps.ansatz.profile import (
    ansatz_residual_at,
    bubble_mass,
    bubble_quadrature,
    build_ansatz,
    mass_normalization,
    quadrature_domain,
    total_mass,
)
from apps.experiments.commands import VortexLabCommand, parse_floats
from apps.reduction.norms import make_weighted_norms, weighted_norm_Y
from apps.reduction.system import projected_residuals

DEFAULT_SCALES = '8 16 32 64'


class Command(VortexLabCommand):
    help = 'Build the ansatz at the seed centers over a list of mu and report masses and residual scaling'
    command_name = 'ansatz'

    def add_command_arguments(self, parser):
        parser.add_argument('--mu', default=DEFAULT_SCALES, type=parse_floats,
                            help='Bubble heights, whitespace separated')
        parser.add_argument('--eps', type=float, default=None,
                            help='Fixed eps; by default eps = 1/mu^2 for each mu')

    def run(self, config, options):
        g = config.green()
        cfg = config.vortex_config()
        norms = make_weighted_norms(config.alpha)
        scales = sorted(options['mu'])
        rows = []
        header = None
        for mu in scales:
            eps = options['eps'] or 1.0 / mu ** 2
            params = config.params0(g, cfg, eps=eps).with_mu(mu, eps=eps)
            quad = bubble_quadrature(params, quadrature_domain(params, max(self.domain().n, 128)))
            ansatz = build_ansatz(params, g, cfg, quad.domain, quad=quad)
            normalization = 8 * np.pi * mass_normalization(params)
            masses = [bubble_mass(params, g, cfg, i) / normalization for i in range(params.k)]
            total = total_mass(params, g, cfg, quad) / (params.k * normalization)
            residual_y = weighted_norm_Y(lambda y: ansatz_residual_at(ansatz, y), params, norms, quad=quad)
            projected = projected_residuals(ansatz, quad=quad)
            if header is None:
                header = (['mu', 'eps', 'c'] + [f'local_mass_{i + 1}' for i in range(params.k)]
                          + ['total_mass', 'residual_Y'] + projected.labels)
            rows.append([mu, eps, ansatz.c_value, *masses, total, residual_y, *projected.values.tolist()])
            self.emit(f'residual_Y[mu={mu:g}]', repr(residual_y))

        self.save_csv('ansatz_scaling.csv', header, rows)
        if len(scales) > 1:
            slope = float(np.polyfit(np.log(scales), np.log([r[header.index('residual_Y')] for r in rows]), 1)[0])
        else:
            slope = None
        self.emit('residual_Y_slope', slope)

        first = config.params0(g, cfg).with_mu(scales[0], eps=options['eps'] or 1.0 / scales[0] ** 2)
        field_path = self.save_field('ansatz.field', build_ansatz(first, g, cfg, self.domain()).W_tilde)
        self.save_report('ansatz.txt', 'Ansatz', [
            ('seed', first.summary()),
            ('scaling', {'mu': scales, 'residual_Y_slope': slope, 'alpha': config.alpha,
                         'field': field_path.name if field_path else ''}),
        ])
        self.save_plots('plots.gp', [
            {'name': 'ansatz_residual_scaling', 'data': 'ansatz_scaling.csv', 'x': 'mu', 'y': 'residual_Y',
             'xlabel': 'mu', 'ylabel': '|R|_Y', 'logscale': 'xy'},
            {'name': 'ansatz_total_mass', 'data': 'ansatz_scaling.csv', 'x': 'mu', 'y': 'total_mass',
             'xlabel': 'mu', 'ylabel': 'mass / 8 pi k', 'logscale': 'x'},
        ])
