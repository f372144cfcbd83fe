"""Miscellaneous utilities: configuration lookup, CSV and IDX I/O"""

from __future__ import annotations

import gzip
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import (
    Any,
    Callable,
    Generator,
    Iterable,
    Sequence,
)

import numpy as np

from datalad_next.commands import (
    Parameter,
    generic_result_renderer,
    get_status_dict,
)
from datalad_next.exceptions import CapturedException

from datalad_xsdist.core import (
    CloudFormatError,
    NumericalError,
    PointCloud,
)


__docformat__ = "numpy"

lgr = logging.getLogger('datalad.xsdist.utils')

# configuration item -> (type, default); registered in the package __init__
CONFIG_DEFAULTS = {
    'datalad.xsdist.threads': (int, 1),
    'datalad.xsdist.block-size': (int, 1024),
    'datalad.xsdist.xi-tolerance': (float, 1e-14),
}

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# parameters shared by the commands
output_param = Parameter(
    args=('-o', '--output'),
    metavar='PATH',
    doc="""file to write the CSV report to. By default the report is
    printed.""")
threads_param = Parameter(
    args=('--threads',),
    metavar='N',
    doc="""maximum number of worker threads. Overrides the
    'datalad.xsdist.threads' configuration; never changes results.""")
seed_param = Parameter(
    args=('--seed',),
    metavar='SEED',
    doc="""integer seed of the random streams. Required, there is no
    time-based seeding.""")


@lru_cache(maxsize=None)
def get_setting(name: str):
    """Value of a ``datalad.xsdist.*`` configuration item

    Read once per process through DataLad's config manager, so
    ``DATALAD_XSDIST_*`` environment variables and git config scopes apply.
    """
    valtype, default = CONFIG_DEFAULTS[name]
    from datalad import cfg
    value = cfg.get(name, None)
    if value is None:
        return default
    try:
        value = valtype(value)
    except ValueError as e:
        raise ValueError(f'invalid value for {name}: {value!r}') from e
    if valtype is int and value < 1:
        raise ValueError(f'{name} must be at least 1, got {value}')
    return value


def resolve_threads(threads: int | None) -> int:
    return get_setting('datalad.xsdist.threads') if threads is None \
        else max(1, int(threads))


def resolve_block_size(block_size: int | None) -> int:
    return get_setting('datalad.xsdist.block-size') if block_size is None \
        else int(block_size)


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double"""
    return f'{float(x):.17g}'


def format_row(values: Iterable[Any]) -> str:
    return ','.join(
        format_float(v) if isinstance(v, (float, np.floating)) else str(v)
        for v in values)


def config_line(config: dict) -> str:
    """``#config`` provenance line with all resolved parameters"""
    return '#config ' + json.dumps(
        {k: _jsonable(v) for k, v in config.items()}, sort_keys=True)


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def render_csv(
        header: Sequence[str],
        rows: Iterable[Sequence[Any]],
        comments: Sequence[str] = (),
) -> str:
    lines = list(comments)
    lines.append(','.join(header))
    lines.extend(format_row(r) for r in rows)
    return '\n'.join(lines) + '\n'


def cloud_to_csv(cloud: PointCloud) -> str:
    lines = [f'# dim={cloud.dim}']
    lines.extend(format_row(p) for p in cloud.points.tolist())
    return '\n'.join(lines) + '\n'


def cloud_from_csv(text: str, source: str = '<string>') -> PointCloud:
    """Parse the point cloud CSV format

    One point per line, comma-separated decimal coordinates. A leading
    ``# dim=N`` header is checked against the data, other ``#`` lines and
    blank lines are ignored. Ragged rows are rejected.
    """
    declared_dim = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith('#'):
            key, _, value = line.lstrip('#').strip().partition('=')
            if key.strip() == 'dim':
                try:
                    declared_dim = int(value)
                except ValueError:
                    raise CloudFormatError(
                        f'{source}:{lineno}: invalid dim header {line!r}')
            continue
        try:
            row = [float(v) for v in line.split(',')]
        except ValueError:
            raise CloudFormatError(
                f'{source}:{lineno}: non-numeric coordinate in {line!r}')
        if rows and len(row) != len(rows[0]):
            raise CloudFormatError(
                f'{source}:{lineno}: ragged row, expected {len(rows[0])} '
                f'coordinates, got {len(row)}')
        rows.append(row)
    if declared_dim is not None and rows and len(rows[0]) != declared_dim:
        raise CloudFormatError(
            f'{source}: header declares dim={declared_dim}, '
            f'rows have {len(rows[0])} coordinates')
    if not rows:
        if declared_dim is None:
            raise CloudFormatError(f'{source}: no points and no dim header')
        return PointCloud(np.empty((0, declared_dim)))
    return PointCloud(np.array(rows))


def read_cloud(path: Path | str) -> PointCloud:
    path = Path(path)
    return cloud_from_csv(path.read_text(encoding='utf-8'), source=str(path))


def write_cloud(cloud: PointCloud, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(cloud_to_csv(cloud), encoding='utf-8')
    lgr.debug('Wrote %i points to %s', cloud.count, path)
    return path


def _read_idx_bytes(path: Path) -> bytes:
    opener = gzip.open if path.suffix == '.gz' else open
    with opener(path, 'rb') as f:
        return f.read()


def _parse_idx(raw: bytes, magic: int, ndim: int, path: Path) -> np.ndarray:
    header_len = 4 * (1 + ndim)
    if len(raw) < header_len:
        raise CloudFormatError(f'{path}: truncated IDX header')
    header = np.frombuffer(raw, dtype='>u4', count=1 + ndim)
    if int(header[0]) != magic:
        raise CloudFormatError(
            f'{path}: bad IDX magic {int(header[0]):#010x}, '
            f'expected {magic:#010x}')
    shape = tuple(int(d) for d in header[1:])
    data = np.frombuffer(raw, dtype=np.uint8, offset=header_len)
    if data.size != int(np.prod(shape)):
        raise CloudFormatError(
            f'{path}: IDX payload has {data.size} bytes, header announces '
            f'shape {shape}')
    return data.reshape(shape)


def read_idx_images(path: Path | str, limit: int | None = None) -> PointCloud:
    """MNIST-layout image file as a cloud of flattened pixels in [0, 1]"""
    path = Path(path)
    images = _parse_idx(_read_idx_bytes(path), IDX_IMAGES_MAGIC, 3, path)
    if limit is not None:
        images = images[:limit]
    return PointCloud(images.reshape(images.shape[0], -1) / 255.0)


def read_idx_labels(path: Path | str, limit: int | None = None) -> np.ndarray:
    path = Path(path)
    labels = _parse_idx(_read_idx_bytes(path), IDX_LABELS_MAGIC, 1, path)
    return labels[:limit] if limit is not None else labels


def csv_command_results(
        action: str,
        config: dict,
        compute: Callable[[], str | tuple[str, dict]],
        output: Path | str | None = None,
        logger: logging.Logger = lgr,
        **props,
) -> Generator[dict, None, None]:
    """Yield the single result record of a CSV-emitting command

    ``compute`` returns the CSV body, optionally paired with a dict of
    additional result properties. The ``#config`` provenance line is
    prepended, and the text is written to ``output`` if one is given.
    Numerical failures yield a result with status 'error', invalid input
    and I/O problems status 'impossible'.
    """
    res_kwargs = dict(
        action=action,
        path=str(Path(output).absolute()) if output else str(Path.cwd()),
        type='file',
        logger=logger,
        **props,
    )
    try:
        body = compute()
        if isinstance(body, tuple):
            body, extra = body
            res_kwargs.update(extra)
        text = config_line(config) + '\n' + body
        if output:
            Path(output).write_text(text, encoding='utf-8')
    except NumericalError as e:
        ce = CapturedException(e)
        yield get_status_dict(
            status='error', message=str(e), exception=ce, **res_kwargs)
        return
    except (OSError, ValueError) as e:
        ce = CapturedException(e)
        yield get_status_dict(
            status='impossible', message=str(e), exception=ce, **res_kwargs)
        return
    yield get_status_dict(
        status='ok', csv=text, output=str(output) if output else None,
        **res_kwargs)


def render_csv_result(res: dict, **kwargs) -> None:
    """Print the CSV of a result that was not written to a file"""
    from datalad.ui import ui

    if res['status'] != 'ok' or not res.get('csv') or res.get('output'):
        generic_result_renderer(res)
        return
    ui.message(res['csv'].rstrip('\n'))
