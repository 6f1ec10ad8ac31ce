"""
On-disk artifacts of an experiment: CSV tables, key=value reports and
plot scripts. Every file is written whole to a temporary sibling and then
renamed over the target. Nothing here writes timestamps.
"""
import csv
import io
import logging
import os
import tempfile
from pathlib import Path

from django.template.loader import render_to_string

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def atomic_write(path, data):
    """Write bytes or text to path via a temp file and os.replace"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode('utf-8')
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug('Wrote %s (%d bytes)', path, len(data))
    return path


def format_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    if isinstance(value, (list, tuple)):
        return ' '.join(format_value(v) for v in value)
    if hasattr(value, 'dtype'):
        return format_value(value.item() if value.ndim == 0 else value.tolist())
    return str(value)


def write_csv(path, header, rows):
    """CSV with a header row; floats in round-trip precision"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f'Row has {len(row)} columns, header has {len(header)}')
        writer.writerow([format_value(v) for v in row])
    return atomic_write(path, buffer.getvalue())


def read_csv(path):
    """(header, rows) with every cell as a string"""
    with open(path, newline='', encoding='utf-8') as handle:
        rows = list(csv.reader(handle))
    return rows[0], rows[1:]


def write_report(path, title, config_hash, sections):
    """
    key=value report rendered from experiments/report.txt.

    sections is a list of (name, mapping) pairs; order is kept.
    """
    context = {
        'title': title,
        'config_hash': config_hash,
        'sections': [
            {'name': name, 'items': [(key, format_value(value)) for key, value in mapping.items()]}
            for name, mapping in sections
        ],
    }
    return atomic_write(path, render_to_string('experiments/report.txt', context))


def read_report(path):
    """Flat {key: value} of a report; later sections win on repeated keys"""
    values = {}
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        if '=' in line and not line.startswith(('#', '[')):
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    return values


def write_plot_script(path, plots, config_hash):
    """
    gnuplot script for an external plotter.

    plots: list of dicts with keys name, data, x, y, xlabel, ylabel and
    optional logscale ('x', 'y' or 'xy').
    """
    context = {'plots': plots, 'config_hash': config_hash}
    return atomic_write(path, render_to_string('experiments/plots.gp', context))
