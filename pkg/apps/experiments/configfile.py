"""
Experiment configuration files.

Flat INI sections [domain] [vortices] [bubbles] [sweep] [tolerances]
[outputs], parsed with configparser and validated by the serializers in
this app. emit_config writes the validated data back in a fixed order, so
parse(emit(parse(text))) == parse(text).
"""
import configparser
import hashlib
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from apps.ansatz.bubbles import make_bubble_params
from apps.core.conf import settings_value
from apps.core.exceptions import ConfigError
from apps.green.ewald import GreenEvaluator
from apps.green.vortices import make_vortex_config
from apps.torus.spectral import make_domain

from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

DEFAULT_FORMATS = ('field', 'csv', 'report', 'plots')
DEFAULT_LEVELS = 12


def _line_index(text):
    """(section, key) -> line number of its first occurrence; key None for the header"""
    index, section = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped[0] in '#;':
            continue
        if stripped.startswith('[') and stripped.endswith(']'):
            section = stripped[1:-1].strip()
            index.setdefault((section, None), lineno)
            continue
        key = re.split('[=:]', stripped, maxsplit=1)[0].strip().lower()
        index.setdefault((section, key), lineno)
    return index


def _flatten(errors, prefix=()):
    """Yield (path, message) pairs from nested DRF error details"""
    if isinstance(errors, dict):
        for key, value in errors.items():
            yield from _flatten(value, prefix + (str(key),))
    elif isinstance(errors, list):
        for item in errors:
            if isinstance(item, (dict, list)):
                yield from _flatten(item, prefix)
            else:
                yield prefix, str(item)
    else:
        yield prefix, str(errors)


def _problems(errors, index):
    problems = []
    for path, message in _flatten(errors):
        section = path[0] if path else None
        key = path[1] if len(path) > 1 and path[1] != 'non_field_errors' else None
        line = index.get((section, key)) or index.get((section, None))
        problems.append({'section': section, 'field': key, 'line': line, 'message': message})
    return problems


def _describe(problems, source):
    parts = []
    for p in problems:
        where = '.'.join(x for x in (p['section'], p['field']) if x) or 'config'
        line = f" (line {p['line']})" if p['line'] else ''
        parts.append(f'{where}{line}: {p["message"]}')
    return f'Invalid configuration {source}: ' + '; '.join(parts)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration and the text it came from"""
    data: dict
    text: str = ''
    source: str = '<string>'

    def section(self, name):
        return self.data.get(name) or {}

    # domain

    @property
    def periods(self):
        return tuple(self.data['domain']['periods'])

    @property
    def n(self):
        return self.data['domain']['n']

    @property
    def offset(self):
        offset = self.data['domain'].get('offset')
        return None if offset is None else tuple(offset)

    def domain(self, n=None):
        return make_domain(self.periods[0], self.periods[1], n or self.n, self.offset)

    def green(self):
        return GreenEvaluator(self.periods)

    def vortex_config(self):
        vortices = self.data['vortices']
        return make_vortex_config(vortices['points'], vortices['multiplicities'], self.periods)

    # bubbles

    @property
    def seed(self):
        return np.asarray(self.data['bubbles']['seed'], dtype=float)

    @property
    def alpha(self):
        return self.data['bubbles'].get('alpha', settings_value('ALPHA'))

    def params0(self, g, cfg, eps=None, centers=None):
        """Seed BubbleParams; mu defaults to the middle of the window at the first eps"""
        bubbles = self.data['bubbles']
        eps = self.eps_values[0] if eps is None else eps
        mu = bubbles.get('mu') or np.sqrt(self.beta0 * self.beta1 / eps)
        centers = self.seed if centers is None else centers
        return make_bubble_params(g, cfg, centers, mu, d=bubbles.get('d'), eps=eps)

    # sweep

    @property
    def eps_values(self):
        sweep = self.section('sweep')
        if 'eps' in sweep:
            return [float(e) for e in sweep['eps']]
        if 'eps_max' in sweep:
            values = np.geomspace(sweep['eps_max'], sweep['eps_min'], sweep['count'])
            return [float(e) for e in values]
        raise ConfigError(f'Configuration {self.source} has no [sweep] eps schedule',
                          problems=[{'section': 'sweep', 'field': 'eps', 'line': None,
                                     'message': 'An eps schedule is required.'}])

    @property
    def beta0(self):
        return self.section('sweep').get('beta0', settings_value('BETA0'))

    @property
    def beta1(self):
        return self.section('sweep').get('beta1', settings_value('BETA1'))

    # tolerances

    @property
    def newton_tol(self):
        return self.section('tolerances').get('newton_tol', settings_value('NEWTON_TOL'))

    @property
    def tol_reduced(self):
        return self.section('tolerances').get('tol_reduced', settings_value('TOL_REDUCED'))

    @property
    def levels(self):
        return self.section('tolerances').get('levels', DEFAULT_LEVELS)

    # outputs

    @property
    def output_directory(self):
        return self.section('outputs').get('directory')

    @property
    def formats(self):
        formats = self.section('outputs').get('formats')
        return tuple(formats.split()) if formats else DEFAULT_FORMATS

    @property
    def hash(self):
        return config_hash(self)


def parse_config(text, source='<string>'):
    """ExperimentConfig from INI text; raises ConfigError with line/field details"""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        problems = [{'section': None, 'field': None, 'line': exc.lineno,
                     'message': f'{exc.line.strip()!r} comes before any [section]'}]
        raise ConfigError(_describe(problems, source), problems=problems) from exc
    except configparser.ParsingError as exc:
        problems = [{'section': None, 'field': None, 'line': lineno, 'message': f'cannot parse {line!r}'}
                    for lineno, line in exc.errors]
        raise ConfigError(_describe(problems, source), problems=problems) from exc
    except configparser.Error as exc:
        lineno = getattr(exc, 'lineno', None)
        problems = [{'section': getattr(exc, 'section', None), 'field': getattr(exc, 'option', None),
                     'line': lineno, 'message': exc.message}]
        raise ConfigError(_describe(problems, source), problems=problems) from exc

    index = _line_index(text)
    known = ExperimentConfigSerializer().fields
    problems = []
    raw = {}
    for section in parser.sections():
        if section not in known:
            problems.append({'section': section, 'field': None, 'line': index.get((section, None)),
                             'message': 'unknown section'})
            continue
        allowed = known[section].fields
        for key in parser.options(section):
            if key not in allowed:
                problems.append({'section': section, 'field': key, 'line': index.get((section, key)),
                                 'message': 'unknown key'})
        raw[section] = dict(parser.items(section))
    if problems:
        raise ConfigError(_describe(problems, source), problems=problems)

    serializer = ExperimentConfigSerializer(data=raw)
    if not serializer.is_valid():
        problems = _problems(serializer.errors, index)
        raise ConfigError(_describe(problems, source), problems=problems)
    logger.debug('Parsed configuration %s', source)
    return ExperimentConfig(data=serializer.validated_data, text=text, source=source)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f'Cannot read configuration {path}: {exc}', path=str(path)) from exc
    return parse_config(text, source=str(path))


def emit_config(config):
    """Canonical INI text: fixed section and key order, exact float repr"""
    root = ExperimentConfigSerializer()
    lines = []
    for section, serializer in root.fields.items():
        values = config.data.get(section)
        if not values:
            continue
        lines.append(f'[{section}]')
        for name, fld in serializer.fields.items():
            if values.get(name) is None:
                continue
            lines.append(f'{name} = {fld.to_representation(values[name])}')
        lines.append('')
    return '\n'.join(lines)


def config_hash(config):
    """sha256 of the canonical text, so formatting changes keep the hash"""
    return hashlib.sha256(emit_config(config).encode('utf-8')).hexdigest()
