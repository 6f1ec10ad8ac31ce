"""
Binary grid-field files.

A fixed 256-byte ASCII header of key=value lines, space padded and ending
in a newline, followed by n*n little-endian float64 values in row-major
order (first index x1). A vortex list too long for the header goes to a
<name>.singular sidecar and the header keeps singular=@<sidecar name>.
"""
import logging
from pathlib import Path

import numpy as np

from apps.core.exceptions import InvalidArgumentError
from apps.torus.spectral import Field, make_domain

from .artifacts import atomic_write

logger = logging.getLogger(__name__)

MAGIC = 'VORTEXLAB-FIELD'
VERSION = 1
HEADER_SIZE = 256
DTYPE = np.dtype('<f8')
COORDINATE_FORMAT = '%.9g'
SIDECAR_SUFFIX = '.singular'


def singular_descriptor(cfg):
    """'m@x,y;...' for the log sources carried by u0, 'none' when smooth"""
    if cfg is None or not len(cfg):
        return 'none'
    return ';'.join(f'{m}@{COORDINATE_FORMAT % x},{COORDINATE_FORMAT % y}'
                    for (x, y), m in zip(cfg.points, cfg.multiplicities))


def _header_text(field, singular):
    domain = field.domain
    lines = [
        f'{MAGIC} {VERSION}',
        f'n={domain.n}',
        f'periods={domain.periods[0]!r} {domain.periods[1]!r}',
        f'offset={domain.offset[0]!r} {domain.offset[1]!r}',
        f'name={field.name or "field"}',
        f'mean={field.mean()!r}',
        f'singular={singular}',
    ]
    return '\n'.join(lines) + '\n'


def encode_header(field, singular='none'):
    text = _header_text(field, singular)
    if len(text) > HEADER_SIZE - 1:
        raise InvalidArgumentError(f'Field header needs {len(text)} bytes, only {HEADER_SIZE - 1} available')
    return (text + ' ' * (HEADER_SIZE - 1 - len(text)) + '\n').encode('ascii')


def header_fits(field, singular):
    return len(_header_text(field, singular)) <= HEADER_SIZE - 1


def decode_header(raw):
    if len(raw) != HEADER_SIZE:
        raise InvalidArgumentError(f'Truncated field header ({len(raw)} bytes)')
    lines = raw.decode('ascii').rstrip().splitlines()
    magic, _, version = lines[0].partition(' ')
    if magic != MAGIC:
        raise InvalidArgumentError(f'Not a field file (magic {magic!r})')
    if int(version) != VERSION:
        raise InvalidArgumentError(f'Unsupported field file version {version}')
    header = dict(line.split('=', 1) for line in lines[1:] if '=' in line)
    return {
        'version': int(version),
        'n': int(header['n']),
        'periods': tuple(float(p) for p in header['periods'].split()),
        'offset': tuple(float(o) for o in header['offset'].split()),
        'name': header['name'],
        'mean': float(header['mean']),
        'singular': header['singular'],
    }


def write_field(path, field, cfg=None):
    """Write field atomically; cfg names the singular part added back on read"""
    path = Path(path)
    singular = singular_descriptor(cfg)
    if not header_fits(field, singular):
        sidecar = atomic_write(path.with_name(path.name + SIDECAR_SUFFIX), singular + '\n')
        logger.info('Vortex list of %s moved to %s', path.name, sidecar.name)
        singular = f'@{sidecar.name}'
    payload = np.ascontiguousarray(field.values, dtype=DTYPE).tobytes(order='C')
    path = atomic_write(path, encode_header(field, singular) + payload)
    logger.info('Field %r written to %s', field.name, path)
    return path


def read_field(path):
    """(Field, header dict); the payload must be exactly n^2 * 8 bytes"""
    path = Path(path)
    raw = path.read_bytes()
    header = decode_header(raw[:HEADER_SIZE])
    if header['singular'].startswith('@'):
        sidecar = path.with_name(header['singular'][1:])
        try:
            header['singular'] = sidecar.read_text(encoding='ascii').strip()
        except OSError as exc:
            raise InvalidArgumentError(f'Field file {path} refers to a missing {sidecar.name}') from exc
    n = header['n']
    payload = raw[HEADER_SIZE:]
    if len(payload) != n * n * DTYPE.itemsize:
        raise InvalidArgumentError(
            f'Field file {path} has {len(payload)} payload bytes, expected {n * n * DTYPE.itemsize}')
    values = np.frombuffer(payload, dtype=DTYPE).reshape(n, n).astype(float)
    domain = make_domain(header['periods'][0], header['periods'][1], n, header['offset'])
    return Field(domain, values, name=header['name']), header
