import numpy as np

from apps.core.exceptions import LimitUnstableError
from apps.experiments.commands import VortexLabCommand
from apps.functionals.dq import d_of_q, make_reduced_config
from apps.functionals.reduced import find_critical_point, g_star, grad_g_star, hessian_g_star

DQ_COLUMNS = ['r', 'partial_sum', 'extrapolant']


class Command(VortexLabCommand):
    help = 'G*, its gradient and Hessian spectrum, and D(q) at the seed or its critical point'
    command_name = 'functionals'

    def add_command_arguments(self, parser):
        parser.add_argument('--critical', action='store_true',
                            help='Move the seed to a critical point of G* first')

    def run(self, config, options):
        g = config.green()
        cfg = config.vortex_config()
        q = config.seed
        certificate = None
        if options['critical']:
            q, certificate = find_critical_point(g, cfg, q)

        value = g_star(g, cfg, q)
        gradient = grad_g_star(g, cfg, q)
        eigenvalues = np.linalg.eigvalsh(hessian_g_star(g, cfg, q))

        self.save_csv('gstar.csv', ['i', 'q1', 'q2', 'grad1', 'grad2'], [
            [i, *q[i].tolist(), *gradient.reshape(-1, 2)[i].tolist()] for i in range(len(q))
        ])
        self.save_csv('hessian.csv', ['index', 'eigenvalue'],
                      [[i, float(e)] for i, e in enumerate(eigenvalues)])

        rc = make_reduced_config(g, cfg, q, levels=config.levels)
        try:
            dq = d_of_q(g, cfg, q, rc=rc)
        except LimitUnstableError as exc:
            self.save_csv('dq_table.csv', DQ_COLUMNS,
                          [[r, p, '' if e is None else e] for r, p, e in exc.table])
            raise
        self.save_csv('dq_table.csv', DQ_COLUMNS, dq.table_rows())

        sign = 'negative' if dq.negative else 'nonnegative'
        summary = {
            'G_star': value,
            'grad_norm': float(np.linalg.norm(gradient)),
            'hessian_eigenvalues': eigenvalues.tolist(),
            'D': dq.value,
            'D_sign': sign,
            'D_farfield_tail': dq.farfield_tail,
            'D_per_bubble': dq.per_bubble,
            'D_monotone_tail': dq.monotone_tail,
            'rho': dq.rho,
        }
        if certificate is not None:
            summary.update(critical_kind=certificate.kind, critical_iterations=certificate.iterations,
                           nondegenerate=certificate.nondegenerate)
        self.save_report('functionals.txt', 'Reduced functionals', [
            ('q', {f'q{i + 1}': q[i].tolist() for i in range(len(q))}),
            ('values', summary),
        ])
        for key in ('G_star', 'grad_norm', 'D', 'D_sign'):
            self.emit(key, summary[key])
        if dq.negative:
            self.stdout.write(self.style.SUCCESS(f'D(q) = {dq.value:.8g} < 0: the bubbling solve may proceed'))
        else:
            self.stdout.write(self.style.WARNING(f'D(q) = {dq.value:.8g} >= 0: solve needs --force'))
        return sign
