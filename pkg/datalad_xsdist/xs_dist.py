"""Commands computing X-ray distances of point cloud files"""

from __future__ import annotations

__docformat__ = "numpy"

import logging
from pathlib import Path

import numpy as np

from datalad_next.commands import (
    EnsureCommandParameterization,
    Parameter,
    ValidatedInterface,
    build_doc,
    eval_results,
)
from datalad_next.constraints import (
    EnsureChoice,
    EnsureInt,
    EnsurePath,
    EnsureRange,
    EnsureStr,
)

from datalad_xsdist.energy import (
    XiEvaluator,
    XiMethod,
    generic_xs_distance_sq,
    xs_energy_distance_to_normal,
)
from datalad_xsdist.sobolev_hs import (
    HsKernel,
    build_kernel_table,
    parse_kernel,
)
from datalad_xsdist.utils import (
    csv_command_results,
    output_param,
    read_cloud,
    render_csv,
    render_csv_result,
    resolve_block_size,
    resolve_threads,
    threads_param,
)


lgr = logging.getLogger('datalad.xsdist.xs_dist')

REPORT_HEADER = ('cross', 'self_a', 'self_b', 'total')
# clouds with more points than this evaluate H^s kernels from a table
HS_DIRECT_MAX_POINTS = 64
HS_TABLE_GRID = 1024


@build_doc
class XsDist(ValidatedInterface):
    """Squared X-ray Sobolev distance between two point clouds

    Each CSV file holds one point per line, coordinates separated by
    commas. Both clouds are read as uniform empirical measures and
    compared with the chosen kernel, 'energy' (homogeneous H^1, the
    sliced energy distance) or 'hs:<s>' (inhomogeneous H^s with s > 1/2).

    The report lists the cross term, the two self terms, and their
    combination, the squared distance.
    """

    _examples_ = [
        dict(
            text="Energy X-ray distance of two clouds",
            code_py="xs_dist('a.csv', 'b.csv')",
            code_cmd="datalad xs-dist a.csv b.csv",
        ),
        dict(
            text="Same comparison under the H^1 kernel, written to a file",
            code_py="xs_dist('a.csv', 'b.csv', kernel='hs:1', output='d.csv')",
            code_cmd="datalad xs-dist --kernel hs:1 -o d.csv a.csv b.csv",
        ),
    ]

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            a=EnsurePath(lexists=True),
            b=EnsurePath(lexists=True),
            kernel=EnsureStr(),
            output=EnsurePath(),
            threads=EnsureInt() & EnsureRange(min=1),
        ),
    )

    _params_ = dict(
        a=Parameter(
            args=('a',),
            metavar='A.CSV',
            doc="""first point cloud"""),
        b=Parameter(
            args=('b',),
            metavar='B.CSV',
            doc="""second point cloud"""),
        kernel=Parameter(
            args=('--kernel',),
            metavar='KERNEL',
            doc="""'energy' or 'hs:<s>'"""),
        output=output_param,
        threads=threads_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            a: Path,
            b: Path,
            *,
            kernel: str = 'energy',
            output: Path | None = None,
            threads: int | None = None,
    ):
        config = dict(
            command='dist',
            a=a,
            b=b,
            kernel=kernel,
            threads=resolve_threads(threads),
            block_size=resolve_block_size(None),
        )

        def compute():
            ca, cb = read_cloud(a), read_cloud(b)
            config['dim'] = ca.dim
            g = parse_kernel(kernel, ca.dim)
            if isinstance(g, HsKernel) \
                    and ca.count + cb.count > HS_DIRECT_MAX_POINTS:
                g = _tabulated(g, np.vstack([ca.points, cb.points]),
                               threads)
                config['table_grid'] = HS_TABLE_GRID
            report = generic_xs_distance_sq(g, ca, cb, threads=threads)
            return render_csv(REPORT_HEADER, [report.as_row()]), dict(
                total=report.total)

        yield from csv_command_results(
            'xs_dist', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)


def _tabulated(g: HsKernel, points: np.ndarray, threads) -> HsKernel:
    # the bounding box diagonal bounds every pairwise distance
    diameter = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    table = build_kernel_table(
        g.params, max(diameter, 1e-3) * (1 + 1e-9), HS_TABLE_GRID,
        threads=threads)
    lgr.debug('Tabulated %s up to radius %g', g.name, diameter)
    return HsKernel(g.params, table=table)


@build_doc
class XsDistToNormal(ValidatedInterface):
    """Squared energy X-ray distance of a point cloud to the standard normal

    The normal side is handled analytically, so there is no sampling
    involved. Evaluators: 'poisson' (exact Poisson mixture series),
    'series' (alternating power series, exact sum beyond a^2 > N),
    'surrogate' (second order accurate c_N0 + sqrt(a^2 + c_N1), the form
    used for training), 'coarse' and 'iterated' (large radius
    approximations).
    """

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            a=EnsurePath(lexists=True),
            method=EnsureChoice(*(m.value for m in XiMethod)),
            output=EnsurePath(),
            threads=EnsureInt() & EnsureRange(min=1),
        ),
    )

    _params_ = dict(
        a=Parameter(
            args=('a',),
            metavar='A.CSV',
            doc="""point cloud"""),
        method=Parameter(
            args=('--method',),
            choices=tuple(m.value for m in XiMethod),
            doc="""how to evaluate the Dirac-to-normal distance"""),
        output=output_param,
        threads=threads_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            a: Path,
            *,
            method: str = 'poisson',
            output: Path | None = None,
            threads: int | None = None,
    ):
        config = dict(
            command='dist-to-normal',
            a=a,
            method=method,
            threads=resolve_threads(threads),
            block_size=resolve_block_size(None),
        )

        def compute():
            cloud = read_cloud(a)
            ev = XiEvaluator(cloud.dim, method=method)
            config.update(dim=cloud.dim, tolerance=ev.tolerance)
            report = xs_energy_distance_to_normal(cloud, ev, threads=threads)
            return render_csv(REPORT_HEADER, [report.as_row()]), dict(
                total=report.total)

        yield from csv_command_results(
            'xs_dist_to_normal', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)
