"""Scan squared distances along a one-parameter family of measures"""

from __future__ import annotations

__docformat__ = "numpy"

import logging
from functools import partial
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
    EnsureFloat,
    EnsureInt,
    EnsurePath,
    EnsureRange,
    EnsureStr,
)

from datalad_xsdist.core import PointCloud
from datalad_xsdist.energy import generic_xs_distance_sq
from datalad_xsdist.oracle import (
    geodesic_identity_residual,
    scan_rigid,
)
from datalad_xsdist.sobolev_hs import parse_kernel
from datalad_xsdist.utils import (
    csv_command_results,
    read_cloud,
    render_csv,
    render_csv_result,
    resolve_threads,
    threads_param,
)


lgr = logging.getLogger('datalad.xsdist.xs_scan_geodesic')

FAMILIES = ('rigid', 'fig1', 'mixture')
# alternative names of the families on the command line
FAMILY_ALIASES = {'fig1': 'rigid'}
# default parameter range per family
DEFAULT_RANGE = {'rigid': (-1.0, 1.0), 'mixture': (0.0, 1.0)}


def _total(g, threads, a: PointCloud, b: PointCloud) -> float:
    return generic_xs_distance_sq(g, a, b, threads=threads).total


def _scan_mixture(grid, mu0, mu1, nu, kernel, threads):
    m0, m1, target = read_cloud(mu0), read_cloud(mu1), read_cloud(nu)
    distance_sq = partial(_total, parse_kernel(kernel, target.dim), threads)
    residual = geodesic_identity_residual(
        m0, m1, target, grid, distance_sq=distance_sq)
    xs = [distance_sq(target, PointCloud.mixture(m0, m1, t)) for t in grid]
    lgr.debug('Largest geodesic identity residual %g',
              float(np.max(np.abs(residual))))
    return render_csv(('t', 'xs_sq', 'residual'), zip(grid, xs, residual))


@build_doc
class XsScanGeodesic(ValidatedInterface):
    """Squared distances from a target along a family of measures

    Family 'rigid' moves the pair {(t, 2), (-t, -2)} against the target
    {(1, 0), (-1, 0)} and lists the exact squared 2-Wasserstein distance
    next to the squared energy X-ray distance. The Wasserstein scan has
    two minima at t = -1 and t = 1 with a local maximum in between; the
    X-ray scan is convex.

    Family 'mixture' scans mixtures (1-t) mu0 + t mu1 of two point clouds
    against a third one and adds the residual of the quadratic
    interpolation law, which vanishes for Hilbert-embeddable distances.
    """

    _examples_ = [
        dict(
            text="Wasserstein versus X-ray distance on the rigid family",
            code_py="xs_scan_geodesic(family='rigid', tmin=-1, tmax=1, "
                    "steps=101, output='rigid.csv')",
            code_cmd="datalad xs-scan-geodesic --family rigid --tmin -1 "
                     "--tmax 1 --steps 101 rigid.csv",
        ),
    ]

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            family=EnsureChoice(*FAMILIES),
            tmin=EnsureFloat(),
            tmax=EnsureFloat(),
            steps=EnsureInt() & EnsureRange(min=2),
            mu0=EnsurePath(lexists=True),
            mu1=EnsurePath(lexists=True),
            nu=EnsurePath(lexists=True),
            kernel=EnsureStr(),
            output=EnsurePath(),
            threads=EnsureInt() & EnsureRange(min=1),
        ),
    )

    _params_ = dict(
        family=Parameter(
            args=('--family',),
            choices=FAMILIES,
            doc="""family of measures to scan. 'fig1' is another name of
            the rigid two-point family."""),
        tmin=Parameter(
            args=('--tmin',),
            metavar='T',
            doc="""first parameter value. Defaults to -1 for 'rigid' and 0
            for 'mixture'."""),
        tmax=Parameter(
            args=('--tmax',),
            metavar='T',
            doc="""last parameter value. Defaults to 1."""),
        steps=Parameter(
            args=('--steps',),
            metavar='COUNT',
            doc="""number of equidistant parameter values"""),
        mu0=Parameter(
            args=('--mu0',),
            metavar='MU0.CSV',
            doc="""start of the mixture family"""),
        mu1=Parameter(
            args=('--mu1',),
            metavar='MU1.CSV',
            doc="""end of the mixture family"""),
        nu=Parameter(
            args=('--nu',),
            metavar='NU.CSV',
            doc="""target of the mixture scan"""),
        kernel=Parameter(
            args=('--kernel',),
            metavar='KERNEL',
            doc="""'energy' or 'hs:<s>' for the mixture scan"""),
        output=Parameter(
            args=('output',),
            nargs='?',
            metavar='OUT.CSV',
            doc="""file to write the scan to. By default it is printed."""),
        threads=threads_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            *,
            family: str = 'rigid',
            tmin: float | None = None,
            tmax: float | None = None,
            steps: int = 101,
            mu0: Path | None = None,
            mu1: Path | None = None,
            nu: Path | None = None,
            kernel: str = 'energy',
            output: Path | None = None,
            threads: int | None = None,
    ):
        family = FAMILY_ALIASES.get(family, family)
        lo, hi = DEFAULT_RANGE[family]
        tmin = lo if tmin is None else tmin
        tmax = hi if tmax is None else tmax
        config = dict(
            command='scan-geodesic',
            family=family,
            tmin=tmin,
            tmax=tmax,
            steps=steps,
            threads=resolve_threads(threads),
        )
        if family == 'mixture':
            config.update(mu0=mu0, mu1=mu1, nu=nu, kernel=kernel)

        def compute():
            grid = np.linspace(tmin, tmax, steps)
            if family == 'rigid':
                w2, xs = scan_rigid(grid)
                return render_csv(('t', 'w2sq', 'xs_sq'), zip(grid, w2, xs))
            if None in (mu0, mu1, nu):
                raise ValueError('family mixture needs --mu0, --mu1 and --nu')
            return _scan_mixture(grid, mu0, mu1, nu, kernel, threads)

        yield from csv_command_results(
            'xs_scan_geodesic', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)
