import logging

from apps.ansatz.profile import ansatz_residual
from apps.core.exceptions import InvalidArgumentError, NonConvergenceError, ReducedSystemInfeasibleError
from apps.experiments.artifacts import write_csv
from apps.experiments.commands import VortexLabCommand
from apps.experiments.fieldfile import read_field
from apps.functionals.dq import d_of_q, make_reduced_config
from apps.functionals.reduced import find_critical_point
from apps.solver.classify import classify, concentration, continuation, seeded_continuation, sup_u_slope
from apps.solver.monotone import pointwise_gap
from apps.solver.newton import flux_source
from apps.torus.spectral import prolong

logger = logging.getLogger(__name__)

CONCENTRATION_RADIUS = 0.1
REPORT_KEYS = ('converged', 'iterations', 'residual', 'flux_defect', 'sup_v', 'sup_u', 'mean_u',
               'exp_mean_u', 'L2_of_v', 'grad_w')


def trace_columns(trace):
    columns = []
    for entry in trace:
        for key in entry:
            if key not in columns:
                columns.append(key)
    return columns


class Command(VortexLabCommand):
    help = 'Solve along the eps sweep on the chosen branch, classify the family and write its artifacts'
    command_name = 'solve'

    def add_command_arguments(self, parser):
        parser.add_argument('--critical', action='store_true',
                            help='Move the seed centers to a critical point of G* first')

    def run(self, config, options):
        g = config.green()
        cfg = config.vortex_config()
        domain = self.domain()
        eps_values = config.eps_values
        branch = options['branch']
        extra = {}

        try:
            if options['seed_field']:
                run = self.seeded(g, cfg, domain, eps_values, config, branch)
            elif branch == 'maximal':
                run = continuation(eps_values, g, cfg, domain, branch='maximal', tol=config.newton_tol)
                gaps = [pointwise_gap(smaller, larger)
                        for larger, smaller in zip(run.solutions, run.solutions[1:])]
                for eps, gap in zip(run.eps_schedule[1:], gaps):
                    logger.info('Monotone family: min(v_prev - v) at eps=%s is %.3e', eps, gap)
                extra['min_monotone_gap'] = min(gaps) if gaps else None
            else:
                params0, dq_value = self.certified_params(g, cfg, config, options)
                extra['D'] = dq_value
                run = continuation(eps_values, g, cfg, domain, branch='bubbling', params0=params0,
                                   tol=config.newton_tol, reduced_tol=config.tol_reduced,
                                   beta0=config.beta0, beta1=config.beta1)
                extra['sup_u_slope'] = sup_u_slope(run)
        except NonConvergenceError as exc:
            path = self.path('failure_trace.csv')
            columns = trace_columns(exc.trace) or ['message']
            write_csv(path, columns, [[entry.get(c) for c in columns] for entry in exc.trace])
            raise type(exc)(f'{exc} (trace written to {path})', trace=exc.trace) from exc

        if not all(s.report.converged for s in run.solutions):
            raise NonConvergenceError('Not every solve of the sweep converged')

        label = classify(run)
        self.write_artifacts(config, cfg, run, label, extra)
        self.emit('branch', run.branch)
        self.emit('label', label)
        for solution in run.solutions:
            self.emit(f'sup_v[eps={solution.eps:g}]', repr(solution.report.sup_v))
        return label

    def certified_params(self, g, cfg, config, options):
        """Seed BubbleParams; D(q) < 0 is required unless --force"""
        q = config.seed
        if options['critical']:
            q, _ = find_critical_point(g, cfg, q)
        dq = d_of_q(g, cfg, q, rc=make_reduced_config(g, cfg, q, levels=config.levels))
        self.emit('D', repr(dq.value))
        if not dq.negative:
            if not options['force']:
                raise ReducedSystemInfeasibleError(
                    f'D(q) = {dq.value:.6g} is not negative; the bubbling solve needs --force', D=dq.value)
            logger.warning('D(q) = %.6g >= 0, continuing because of --force', dq.value)
        return config.params0(g, cfg, centers=q), dq.value

    def seeded(self, g, cfg, domain, eps_values, config, branch):
        phi, header = read_field(self.options['seed_field'])
        if tuple(header['periods']) != tuple(domain.periods):
            raise InvalidArgumentError(
                f"Seed field periods {header['periods']} differ from the configured {domain.periods}")
        if phi.domain.n != domain.n:
            phi = prolong(phi, domain.n)
        return seeded_continuation(phi, eps_values, g, cfg, branch=branch, tol=config.newton_tol)

    def write_artifacts(self, config, cfg, run, label, extra):
        k = len(config.seed)
        header = (['eps', 'mu'] + list(REPORT_KEYS)
                  + [f'concentration_{i + 1}' for i in range(k)]
                  + ['concentration_total', 'ansatz_residual', 'reduced_residual', 'branch_label'])
        rows, sections, traces = [], [], []
        for index, solution in enumerate(run.solutions):
            report = solution.report
            reduced = run.reduced[index] if run.reduced else None
            fractions, total = concentration(solution, config.seed if reduced is None else reduced.x,
                                             CONCENTRATION_RADIUS)
            summary = report.summary()
            ansatz_value = None
            if solution.ansatz is not None:
                ansatz_value = (ansatz_residual(solution.ansatz).sup_norm()
                                / flux_source(cfg, solution.domain))
            rows.append([
                report.eps, None if reduced is None else reduced.mu,
                *(summary[key] for key in REPORT_KEYS),
                *fractions.tolist(), total, ansatz_value,
                None if reduced is None else reduced.residuals.max_normalized,
                report.branch_label,
            ])
            field_path = self.save_field(f'phi_{index:02d}.field', solution.phi, cfg)
            self.record_solve(solution, field_path, mu=None if reduced is None else reduced.mu)
            section = dict(summary, field=field_path.name if field_path else '')
            if reduced is not None:
                section.update({f'reduced_{key}': value for key, value in reduced.summary().items()})
            sections.append((f'eps={report.eps!r}', section))
            traces.extend(dict(entry, eps=report.eps) for entry in report.newton_trace)

        self.save_csv('summary.csv', header, rows)
        columns = ['eps'] + [c for c in trace_columns(traces) if c != 'eps']
        self.save_csv('newton_trace.csv', columns, [[t.get(c) for c in columns] for t in traces])
        run_section = {
            'branch': run.branch,
            'label': label,
            'reuse': run.reuse,
            'eps_schedule': run.eps_schedule,
            'concentration_radius': CONCENTRATION_RADIUS,
        }
        run_section.update(extra)
        self.save_report('solve.txt', 'Solve', [('run', run_section)] + sections)

        plots = [
            {'name': 'concentration', 'data': 'summary.csv', 'x': 'eps', 'y': 'concentration_total',
             'xlabel': 'eps', 'ylabel': 'e^v mass fraction near q', 'logscale': 'x'},
            {'name': 'sup_v', 'data': 'summary.csv', 'x': 'eps', 'y': 'sup_v',
             'xlabel': 'eps', 'ylabel': 'sup v', 'logscale': 'x'},
        ]
        if run.reduced:
            plots.append({'name': 'residual_scaling', 'data': 'summary.csv', 'x': 'mu', 'y': 'ansatz_residual',
                          'xlabel': 'mu', 'ylabel': 'ansatz residual', 'logscale': 'xy'})
        self.save_plots('plots.gp', plots)
        logger.info('Solve artifacts: %d fields, classification %s', len(run.solutions), label)
