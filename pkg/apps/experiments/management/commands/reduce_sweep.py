from apps.core.exceptions import ReducedSystemInfeasibleError
from apps.experiments.commands import VortexLabCommand
from apps.reduction.system import mu_scaling_slope, reduce_sweep, sweep_rows


class Command(VortexLabCommand):
    help = 'Solve the reduced equations for (x, mu) along the eps sweep and fit A0, B0'
    command_name = 'reduce_sweep'

    def add_command_arguments(self, parser):
        parser.add_argument('--flip-d-term', action='store_true', dest='flip_d_term',
                            help='Reverse the sign of the D(q) term in R0')
        parser.add_argument('--with-inner', action='store_true', dest='with_inner',
                            help='Include the inner correction in the projected residuals')

    def run(self, config, options):
        g = config.green()
        cfg = config.vortex_config()
        params0 = config.params0(g, cfg)
        try:
            solutions = reduce_sweep(
                config.eps_values, params0, g, cfg,
                beta0=config.beta0, beta1=config.beta1, tol=config.tol_reduced,
                flip_d_term=options['flip_d_term'], with_inner=options['with_inner'],
            )
        except ReducedSystemInfeasibleError as exc:
            self.save_csv('r0_scan.csv', ['mu', 'R0'], exc.details.get('table') or [])
            raise

        header, rows = sweep_rows(solutions)
        self.save_csv('reduced_sweep.csv', header, rows)
        slope = mu_scaling_slope(solutions) if len(solutions) > 1 else None
        sections = [('sweep', {
            'eps': [s.eps for s in solutions],
            'mu_scaling_slope': slope,
            'flip_d_term': options['flip_d_term'],
            'beta0': config.beta0,
            'beta1': config.beta1,
        })]
        sections += [(f'eps={s.eps!r}', s.summary()) for s in solutions]
        self.save_report('reduced_sweep.txt', 'Reduced sweep', sections)
        self.save_plots('plots.gp', [
            {'name': 'mu_scaling', 'data': 'reduced_sweep.csv', 'x': 'eps', 'y': 'mu',
             'xlabel': 'eps', 'ylabel': 'mu', 'logscale': 'xy'},
            {'name': 'r0', 'data': 'reduced_sweep.csv', 'x': 'eps', 'y': 'R0',
             'xlabel': 'eps', 'ylabel': 'R0', 'logscale': 'x'},
        ])
        for s in solutions:
            self.emit(f'mu[eps={s.eps:g}]', repr(s.mu))
        self.emit('mu_scaling_slope', slope)
