from pathlib import Path

from apps.core.exceptions import InvalidArgumentError
from apps.experiments.artifacts import read_csv
from apps.experiments.commands import VortexLabCommand
from apps.solver.classify import MIN_POINTS, classify, family_trends
from apps.solver.newton import SolveReport

REQUIRED_COLUMNS = ('eps', 'sup_v', 'L2_of_v', 'mean_u')


def _float(text):
    return float(text) if text not in ('', None) else None


def reports_from_summary(path):
    """SolveReports rebuilt from a solve summary.csv, in decreasing eps"""
    try:
        header, rows = read_csv(path)
    except OSError as exc:
        raise InvalidArgumentError(f'Cannot read solve summary {path}: {exc}') from exc
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise InvalidArgumentError(f"{path} lacks columns {', '.join(missing)}")
    reports = []
    for row in rows:
        values = dict(zip(header, row))
        reports.append(SolveReport(
            converged=values.get('converged', 'true') == 'true',
            eps=float(values['eps']),
            model=values.get('model', ''),
            sup_v=_float(values['sup_v']),
            L2_of_v=_float(values['L2_of_v']),
            mean_u=_float(values['mean_u']),
        ))
    return sorted(reports, key=lambda r: -r.eps)


class Command(VortexLabCommand):
    help = 'Classify a solved family as topological or non-topological from its summary'
    command_name = 'classify'

    def add_command_arguments(self, parser):
        parser.add_argument('--from', dest='source', default=None,
                            help='Directory of a solve run (defaults to the output directory)')

    def run(self, config, options):
        source = Path(options['source'] or self.out)
        reports = reports_from_summary(source / 'summary.csv')
        if len(reports) < MIN_POINTS:
            self.stderr.write(self.style.WARNING(
                f'{len(reports)} solutions; at least {MIN_POINTS} are needed for a trend'))
        label = classify(reports)
        trends = family_trends(reports) if len(reports) > 1 else {}

        self.save_report('classification.txt', 'Classification', [
            ('family', {'source': str(source), 'count': len(reports), 'label': label}),
            ('trends', trends),
            ('last', {'eps': reports[-1].eps, 'sup_v': reports[-1].sup_v,
                      'exp_mean_u': reports[-1].exp_mean_u} if reports else {}),
        ])
        self.emit('label', label)
        for key, value in trends.items():
            self.emit(f'trend_{key}', value)
        return label
