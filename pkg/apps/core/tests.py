from django.test import SimpleTestCase, override_settings

from .conf import DEFAULTS, settings_value, thread_count
from .exceptions import (
    ConfigError,
    InvalidArgumentError,
    LimitUnstableError,
    NoSolutionDetectedError,
    NonConvergenceError,
    ReducedSystemInfeasibleError,
    SingularPointError,
)


class SettingsValueTests(SimpleTestCase):

    @override_settings(VORTEXLAB={'BETA0': 0.1})
    def test_override_wins(self):
        self.assertEqual(settings_value('BETA0'), 0.1)
        self.assertEqual(settings_value('BETA1'), DEFAULTS['BETA1'])

    @override_settings(VORTEXLAB={})
    def test_defaults(self):
        self.assertEqual(settings_value('NEWTON_TOL'), 1e-10)
        self.assertEqual(settings_value('GRID_OFFSET'), 0.5)

    @override_settings(CSVL_THREADS=0)
    def test_thread_count_at_least_one(self):
        self.assertEqual(thread_count(), 1)

    @override_settings(CSVL_THREADS=4)
    def test_thread_count(self):
        self.assertEqual(thread_count(), 4)


class ExitCodeTests(SimpleTestCase):

    def test_exit_codes(self):
        cases = [
            (ConfigError('x'), 2),
            (InvalidArgumentError('x'), 3),
            (SingularPointError('x'), 3),
            (LimitUnstableError('x'), 4),
            (ReducedSystemInfeasibleError('x'), 5),
            (NonConvergenceError('x'), 6),
            (NoSolutionDetectedError('x'), 6),
        ]
        for error, code in cases:
            self.assertEqual(error.exit_code, code, type(error).__name__)

    def test_details_are_kept(self):
        error = LimitUnstableError('unstable', table=[(0.1, 1.0, None)])
        self.assertEqual(error.table, [(0.1, 1.0, None)])
        self.assertEqual(error.details['table'], error.table)
        self.assertIsInstance(InvalidArgumentError('x'), ValueError)
        self.assertEqual(NonConvergenceError('x').trace, [])
