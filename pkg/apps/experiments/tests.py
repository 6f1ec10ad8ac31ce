import shutil
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from apps.core.exceptions import ConfigError, InvalidArgumentError
from apps.functionals.dq import d_of_q
from apps.green.ewald import GreenEvaluator
from apps.green.vortices import make_vortex_config
from apps.torus.spectral import Field, make_domain

from .artifacts import read_csv, read_report, write_csv, write_plot_script, write_report
from .configfile import config_hash, emit_config, load_config, parse_config
from .fieldfile import HEADER_SIZE, read_field, singular_descriptor, write_field
from .models import ExperimentRun, SolveRecord

SAMPLES = Path(__file__).resolve().parent / 'samples'

CONFIG = """
[domain]
periods = 1.0 1.0
n = 32

[vortices]
points = 0.25 0.5; 0.75 0.5

[bubbles]
k = 1
seed = 0.5 0.0
d = 0.05

[sweep]
eps = 0.05 0.04 0.03

[outputs]
formats = field csv report plots
"""


class TempDirMixin:

    def setUp(self):
        super().setUp()
        self.tmp = Path(tempfile.mkdtemp(prefix='vortexlab-'))
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)

    def write_config(self, text=CONFIG, name='experiment.ini'):
        path = self.tmp / name
        path.write_text(text, encoding='utf-8')
        return path


# ============================================
# CONFIGURATION FILES
# ============================================

class ConfigFileTests(TempDirMixin, SimpleTestCase):

    def test_parse_values(self):
        config = parse_config(CONFIG)
        self.assertEqual(config.periods, (1.0, 1.0))
        self.assertEqual(config.n, 32)
        self.assertEqual(config.eps_values, [0.05, 0.04, 0.03])
        self.assertEqual(config.vortex_config().multiplicities, (1, 1))
        np.testing.assert_array_equal(config.seed, [[0.5, 0.0]])
        self.assertEqual(config.formats, ('field', 'csv', 'report', 'plots'))

    def test_emit_round_trip(self):
        first = parse_config(CONFIG)
        again = parse_config(emit_config(first))
        self.assertEqual(emit_config(again), emit_config(first))
        self.assertEqual(dict(again.data['bubbles']), dict(first.data['bubbles']))

    def test_hash_ignores_formatting(self):
        spaced = CONFIG.replace('n = 32', 'n=32   ').replace('[sweep]', '# a comment\n[sweep]')
        self.assertEqual(config_hash(parse_config(spaced)), config_hash(parse_config(CONFIG)))
        other = CONFIG.replace('n = 32', 'n = 64')
        self.assertNotEqual(config_hash(parse_config(other)), config_hash(parse_config(CONFIG)))

    def test_eps_range(self):
        text = CONFIG.replace('eps = 0.05 0.04 0.03', 'eps_max = 0.04\neps_min = 0.01\ncount = 3')
        np.testing.assert_allclose(parse_config(text).eps_values, [0.04, 0.02, 0.01], rtol=1e-12)

    def test_half_vortex_number_enforced(self):
        text = CONFIG.replace('k = 1\nseed = 0.5 0.0', 'k = 2\nseed = 0.5 0.0; 0.5 0.25')
        with self.assertRaises(ConfigError) as cm:
            parse_config(text)
        self.assertEqual(cm.exception.exit_code, 2)
        self.assertEqual(cm.exception.details['problems'][0]['section'], 'bubbles')

    def test_field_error_has_line(self):
        text = CONFIG.replace('n = 32', 'n = 33')
        with self.assertRaises(ConfigError) as cm:
            parse_config(text)
        problem = cm.exception.details['problems'][0]
        self.assertEqual((problem['section'], problem['field']), ('domain', 'n'))
        self.assertEqual(problem['line'], 4)
        self.assertIn('line 4', str(cm.exception))

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as cm:
            parse_config(CONFIG.replace('d = 0.05', 'd = 0.05\nradius = 1'))
        self.assertEqual(cm.exception.details['problems'][0]['field'], 'radius')

    def test_syntax_error(self):
        with self.assertRaises(ConfigError):
            parse_config('periods = 1 1\n[domain]\n')

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(self.tmp / 'absent.ini')

    def test_samples_load(self):
        for path in sorted(SAMPLES.glob('*.ini')):
            config = load_config(path)
            self.assertEqual(config.vortex_config().k, len(config.seed))


# ============================================
# FIELD FILES AND ARTIFACTS
# ============================================

class FieldFileTests(TempDirMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.domain = make_domain(1.0, 2.0, 16, (0.5, 0.25))
        rng = np.random.default_rng(7)
        self.field = Field(self.domain, rng.standard_normal((16, 16)), name='phi')

    def test_round_trip_is_exact(self):
        cfg = make_vortex_config([(0.25, 0.5), (0.75, 0.5)], periods=(1.0, 2.0))
        path = write_field(self.tmp / 'phi.field', self.field, cfg)
        field, header = read_field(path)
        np.testing.assert_array_equal(field.values, self.field.values)
        self.assertEqual(field.domain, self.domain)
        self.assertEqual(header['name'], 'phi')
        self.assertEqual(header['mean'], self.field.mean())
        self.assertEqual(header['singular'], '1@0.25,0.5;1@0.75,0.5')

    def test_layout(self):
        path = write_field(self.tmp / 'phi.field', self.field)
        raw = path.read_bytes()
        self.assertEqual(len(raw), HEADER_SIZE + 16 * 16 * 8)
        self.assertTrue(raw.startswith(b'VORTEXLAB-FIELD 1\n'))
        self.assertEqual(raw[HEADER_SIZE - 1:HEADER_SIZE], b'\n')
        first = np.frombuffer(raw[HEADER_SIZE:HEADER_SIZE + 8], dtype='<f8')[0]
        self.assertEqual(first, self.field.values[0, 0])

    def test_many_vortices_use_a_sidecar(self):
        rng = np.random.default_rng(11)
        cfg = make_vortex_config(rng.uniform(0.0, 1.0, (8, 2)), periods=(1.0, 2.0))
        path = write_field(self.tmp / 'phi.field', self.field, cfg)
        self.assertTrue((self.tmp / 'phi.field.singular').exists())
        self.assertEqual(len(path.read_bytes()), HEADER_SIZE + 16 * 16 * 8)
        field, header = read_field(path)
        self.assertEqual(header['singular'], singular_descriptor(cfg))
        self.assertEqual(len(header['singular'].split(';')), 8)
        np.testing.assert_array_equal(field.values, self.field.values)

    def test_short_vortex_list_stays_in_header(self):
        cfg = make_vortex_config([(0.25, 0.5), (0.75, 0.5)], periods=(1.0, 2.0))
        write_field(self.tmp / 'phi.field', self.field, cfg)
        self.assertEqual([p.name for p in self.tmp.iterdir()], ['phi.field'])

    def test_truncated_payload(self):
        path = write_field(self.tmp / 'phi.field', self.field)
        path.write_bytes(path.read_bytes()[:-8])
        with self.assertRaises(InvalidArgumentError):
            read_field(path)

    def test_no_temporary_files_left(self):
        write_field(self.tmp / 'phi.field', self.field)
        self.assertEqual([p.name for p in self.tmp.iterdir()], ['phi.field'])


class ArtifactTests(TempDirMixin, SimpleTestCase):

    def test_csv_header_and_precision(self):
        path = write_csv(self.tmp / 't.csv', ['eps', 'label'], [[0.1, 'a'], [1 / 3, None]])
        header, rows = read_csv(path)
        self.assertEqual(header, ['eps', 'label'])
        self.assertEqual(float(rows[1][0]), 1 / 3)
        self.assertEqual(rows[1][1], '')

    def test_csv_rejects_ragged_rows(self):
        with self.assertRaises(ValueError):
            write_csv(self.tmp / 't.csv', ['a', 'b'], [[1.0]])

    def test_report_embeds_hash(self):
        path = write_report(self.tmp / 'r.txt', 'Run', 'abc123',
                            [('values', {'D': -0.5, 'label': "it's"})])
        text = path.read_text()
        self.assertIn('config_hash=abc123', text)
        self.assertIn("label=it's", text)
        self.assertEqual(read_report(path)['D'], '-0.5')

    def test_plot_script(self):
        path = write_plot_script(self.tmp / 'plots.gp', [
            {'name': 'sup_v', 'data': 'summary.csv', 'x': 'eps', 'y': 'sup_v',
             'xlabel': 'eps', 'ylabel': 'sup v', 'logscale': 'x'},
        ], 'abc123')
        text = path.read_text()
        self.assertIn("plot 'summary.csv' using 'eps':'sup_v'", text)
        self.assertIn('set logscale x', text)


# ============================================
# COMMANDS
# ============================================

class CommandTestCase(TempDirMixin, TestCase):

    def call(self, name, *args, config=None, out=None):
        stdout, stderr = StringIO(), StringIO()
        config = config or self.write_config()
        call_command(name, '--config', str(config), '--out', str(out or self.tmp / 'out'), *args,
                     stdout=stdout, stderr=stderr)
        return dict(line.split('=', 1) for line in stdout.getvalue().splitlines() if '=' in line)

    def assertExitCode(self, code, name, *args, **kwargs):
        with self.assertRaises(CommandError) as cm:
            self.call(name, *args, **kwargs)
        self.assertEqual(cm.exception.returncode, code)
        return cm.exception


class GreenCommandTests(CommandTestCase):

    def test_symmetric_values(self):
        out = self.call('green', '--x', '0.1 0.2', '--y', '0.6 0.9', '--mean-check')
        self.assertEqual(out['G(x,y)'], out['G(y,x)'])
        self.assertLess(float(out['mean_G_defect']), 1e-8)
        self.assertTrue((self.tmp / 'out' / 'green.txt').exists())

    def test_reproducible(self):
        first = self.call('green', '--x', '0.1 0.2', '--y', '0.6 0.9', out=self.tmp / 'a')
        second = self.call('green', '--x', '0.1 0.2', '--y', '0.6 0.9', out=self.tmp / 'b')
        self.assertEqual(first['G(x,y)'], second['G(x,y)'])
        self.assertEqual((self.tmp / 'a' / 'green.txt').read_bytes(), (self.tmp / 'b' / 'green.txt').read_bytes())

    def test_coincident_points(self):
        self.assertExitCode(3, 'green', '--x', '0.3 0.3', '--y', '0.3 0.3')
        run = ExperimentRun.objects.get()
        self.assertEqual((run.status, run.exit_code), ('FAILED', 3))

    def test_bad_config(self):
        config = self.write_config(CONFIG.replace('n = 32', 'n = many'))
        error = self.assertExitCode(2, 'green', '--x', '0.1 0.2', '--y', '0.6 0.9', config=config)
        self.assertIn('domain.n', str(error))
        self.assertFalse(ExperimentRun.objects.exists())

    def test_dump_field(self):
        out = self.call('green', '--x', '0.1 0.2', '--y', '0.6 0.9', '--dump')
        field, header = read_field(out['u0_field'])
        self.assertEqual(field.domain.n, 32)
        self.assertEqual(header['singular'], '1@0.25,0.5;1@0.75,0.5')


class FunctionalsCommandTests(CommandTestCase):

    def test_symmetric_seed_is_critical(self):
        out = self.call('functionals')
        self.assertLess(float(out['grad_norm']), 1e-6)
        self.assertIn(out['D_sign'], ('negative', 'nonnegative'))
        header, rows = read_csv(self.tmp / 'out' / 'dq_table.csv')
        self.assertEqual(header, ['r', 'partial_sum', 'extrapolant'])
        self.assertEqual(rows[0][2], '')
        report = read_report(self.tmp / 'out' / 'functionals.txt')
        self.assertEqual(report['config_hash'], parse_config(CONFIG).hash)


class AnsatzCommandTests(CommandTestCase):

    def test_scaling_table(self):
        out = self.call('ansatz', '--mu', '16 32')
        header, rows = read_csv(self.tmp / 'out' / 'ansatz_scaling.csv')
        self.assertEqual(header[:3], ['mu', 'eps', 'c'])
        self.assertEqual(len(rows), 2)
        masses = [float(r[header.index('total_mass')]) for r in rows]
        self.assertLess(abs(masses[1] - 1), abs(masses[0] - 1))
        self.assertLess(float(out['residual_Y_slope']), -1.0)
        field, _ = read_field(self.tmp / 'out' / 'ansatz.field')
        self.assertEqual(field.name, 'W~')


class MaximalSolveCommandTests(CommandTestCase):

    def test_sweep_artifacts_and_ledger(self):
        out = self.call('solve', '--branch', 'maximal')
        directory = self.tmp / 'out'
        self.assertEqual(sorted(p.name for p in directory.glob('*.field')),
                         ['phi_00.field', 'phi_01.field', 'phi_02.field'])
        self.assertTrue((directory / 'plots.gp').exists())
        header, rows = read_csv(directory / 'summary.csv')
        self.assertEqual(len(rows), 3)
        sup_v = [float(r[header.index('sup_v')]) for r in rows]
        self.assertTrue(all(v <= 1e-10 for v in sup_v))
        self.assertEqual(out['label'], 'topological')
        report = read_report(directory / 'solve.txt')
        self.assertGreater(float(report['min_monotone_gap']), -1e-9)

        run = ExperimentRun.objects.get()
        self.assertEqual((run.status, run.exit_code, run.label), ('COMPLETED', 0, 'topological'))
        self.assertEqual(run.solves.count(), 3)
        self.assertTrue(all(r.converged for r in SolveRecord.objects.all()))

        again = self.tmp / 'again'
        self.call('solve', '--branch', 'maximal', out=again)
        self.assertEqual((directory / 'summary.csv').read_bytes(), (again / 'summary.csv').read_bytes())

        classified = self.call('classify', '--from', str(directory), out=self.tmp / 'classified')
        self.assertEqual(classified['label'], 'topological')

    def test_seeded_restart(self):
        self.call('solve', '--branch', 'maximal')
        seed = self.tmp / 'out' / 'phi_00.field'
        out = self.call('solve', '--branch', 'maximal', '--seed-field', str(seed), '--grid-n', '64',
                        out=self.tmp / 'fine')
        header, rows = read_csv(self.tmp / 'out' / 'summary.csv')
        coarse = float(rows[0][header.index('sup_v')])
        header, rows = read_csv(self.tmp / 'fine' / 'summary.csv')
        fine = float(rows[0][header.index('sup_v')])
        self.assertLess(abs(fine - coarse), 1e-4)
        self.assertEqual(out['label'], 'topological')

    def test_increasing_schedule_is_rejected(self):
        config = self.write_config(CONFIG.replace('eps = 0.05 0.04 0.03', 'eps = 0.03 0.04'))
        self.assertExitCode(3, 'solve', '--branch', 'maximal', config=config)

    def test_eps_above_critical(self):
        config = self.write_config(CONFIG.replace('eps = 0.05 0.04 0.03', 'eps = 1.0'))
        error = self.assertExitCode(6, 'solve', '--branch', 'maximal', config=config)
        self.assertIn('failure_trace.csv', str(error))
        self.assertTrue((self.tmp / 'out' / 'failure_trace.csv').exists())


class ReducedSweepCommandTests(CommandTestCase):

    def test_flipped_d_term_is_infeasible(self):
        g = GreenEvaluator((1.0, 1.0))
        cfg = make_vortex_config([(0.25, 0.5), (0.75, 0.5)])
        if d_of_q(g, cfg, [(0.5, 0.0)]).value >= 0:
            self.skipTest('the flipped sign only fails where D is negative')
        config = self.write_config(CONFIG.replace('eps = 0.05 0.04 0.03', 'eps = 0.01'))
        self.assertExitCode(5, 'reduce_sweep', '--flip-d-term', config=config)
        self.assertTrue((self.tmp / 'out' / 'r0_scan.csv').exists())


class BubblingSolveCommandTests(CommandTestCase):

    def test_sample_sweep_completes(self):
        g = GreenEvaluator((1.0, 1.0))
        cfg = make_vortex_config([(0.25, 0.5), (0.75, 0.5)])
        if d_of_q(g, cfg, [(0.5, 0.0)]).value >= 0:
            self.skipTest('no bubbling solution is expected where D is nonnegative')
        config = self.write_config((SAMPLES / 'two_vortices.ini').read_text(encoding='utf-8'))
        out = self.call('solve', config=config)
        directory = self.tmp / 'out'
        self.assertEqual(len(list(directory.glob('*.field'))), 3)
        header, rows = read_csv(directory / 'summary.csv')
        self.assertEqual([float(r[header.index('eps')]) for r in rows], [0.01, 0.005, 0.0025])
        mu = [float(r[header.index('mu')]) for r in rows]
        self.assertTrue(all(b > a for a, b in zip(mu, mu[1:])), mu)
        self.assertEqual(out['label'], 'non-topological')

        run = ExperimentRun.objects.get()
        self.assertEqual((run.status, run.exit_code), ('COMPLETED', 0))
        self.assertEqual(run.solves.count(), 3)
        self.assertTrue(all(r.mu is not None for r in SolveRecord.objects.all()))
