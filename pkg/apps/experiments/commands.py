"""
Shared plumbing of the vortexlab management commands.

Every command reads an experiment configuration, writes its artifacts
under one output directory and records itself in the run ledger. Domain
errors become CommandError with the exit code their class carries.
"""
import logging
from argparse import ArgumentTypeError
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from django.utils import timezone

from apps.core.exceptions import VortexLabError
from apps.solver.classify import BRANCHES

from .artifacts import write_csv, write_plot_script, write_report
from .configfile import load_config
from .fieldfile import write_field
from .models import ExperimentRun

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ROOT = 'runs'


def parse_point(text):
    """'x y' or 'x,y' as a pair of floats"""
    try:
        x, y = (float(v) for v in text.replace(',', ' ').split())
    except ValueError as exc:
        raise ArgumentTypeError(f'expected a point "x y", got {text!r}') from exc
    return x, y


def parse_floats(text):
    """Whitespace or comma separated reals"""
    try:
        return [float(v) for v in text.replace(',', ' ').split()]
    except ValueError as exc:
        raise ArgumentTypeError(f'expected numbers, got {text!r}') from exc


class VortexLabCommand(BaseCommand):
    """
    Base class: subclasses set command_name and implement run(config, options).

    self.out is the output directory, self.run_record the ledger row (None
    when the ledger database is not migrated).
    """
    command_name = None
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Experiment configuration file (INI)')
        parser.add_argument('--out', default=None, help='Output directory (overrides [outputs] directory)')
        parser.add_argument('--grid-n', type=int, default=None, dest='grid_n',
                            help='Grid size override for [domain] n')
        parser.add_argument('--branch', choices=BRANCHES, default='bubbling',
                            help='Solution branch to follow')
        parser.add_argument('--force', action='store_true',
                            help='Proceed even when D(q) is not certified negative')
        parser.add_argument('--seed-field', default=None, dest='seed_field',
                            help='Field file with a starting phi')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'])
        except VortexLabError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

        self.config = config
        self.options = options
        self.out = Path(options['out'] or config.output_directory
                        or Path(DEFAULT_OUTPUT_ROOT) / config.hash[:12])
        self.out.mkdir(parents=True, exist_ok=True)
        self.run_record = self._start_run(config, options)
        logger.info('%s: config %s, output %s', self.command_name, config.hash[:12], self.out)

        try:
            label = self.run(config, options)
        except VortexLabError as exc:
            self._finish_run('FAILED', exc.exit_code, str(exc))
            self.stderr.write(self.style.ERROR(f'{type(exc).__name__}: {exc}'))
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        self._finish_run('COMPLETED', 0, label=label or '')
        self.stdout.write(self.style.SUCCESS(f'{self.command_name} finished; artifacts in {self.out}'))

    def run(self, config, options):
        raise NotImplementedError

    # ----------------------------------------
    # output helpers
    # ----------------------------------------

    def emit(self, key, value):
        """One key=value line on stdout"""
        self.stdout.write(f'{key}={value}')

    def path(self, name):
        return self.out / name

    def wants(self, fmt):
        return fmt in self.config.formats

    def save_csv(self, name, header, rows):
        if self.wants('csv'):
            return write_csv(self.path(name), header, rows)
        return None

    def save_report(self, name, title, sections):
        if self.wants('report'):
            return write_report(self.path(name), title, self.config.hash, sections)
        return None

    def save_plots(self, name, plots):
        if self.wants('plots'):
            return write_plot_script(self.path(name), plots, self.config.hash)
        return None

    def save_field(self, name, field, cfg=None):
        if self.wants('field'):
            return write_field(self.path(name), field, cfg)
        return None

    def domain(self):
        return self.config.domain(self.options.get('grid_n'))

    # ----------------------------------------
    # run ledger
    # ----------------------------------------

    def _start_run(self, config, options):
        try:
            return ExperimentRun.objects.create(
                command=self.command_name,
                config_hash=config.hash,
                config_text=config.text,
                branch=options.get('branch') or '',
                output_dir=str(self.out),
            )
        except DatabaseError as exc:
            logger.warning('Run ledger unavailable (%s); run migrate to record runs', exc)
            return None

    def _finish_run(self, status, exit_code, message='', label=''):
        if self.run_record is None:
            return
        self.run_record.status = status
        self.run_record.exit_code = exit_code
        self.run_record.message = message
        self.run_record.label = label
        self.run_record.finished_at = timezone.now()
        self.run_record.save()

    def record_solve(self, solution, field_path='', mu=None):
        if self.run_record is None:
            return None
        report = solution.report
        return self.run_record.solves.create(
            eps=report.eps,
            mu=mu,
            converged=report.converged,
            iterations=report.iterations,
            residual=report.residual,
            flux_defect=report.flux_defect,
            sup_v=report.sup_v,
            mean_u=report.mean_u,
            branch_label=report.branch_label,
            field_path=str(field_path or ''),
        )
