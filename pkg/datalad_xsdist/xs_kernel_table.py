"""Tabulate the radial profile of the H^s X-ray kernel"""

from __future__ import annotations

__docformat__ = "numpy"

import logging
from pathlib import Path

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
)

from datalad_xsdist.core import Seed
from datalad_xsdist.sobolev_hs import (
    HsOrders,
    HsParams,
    RadialScheme,
    TableMethod,
    build_kernel_table,
)
from datalad_xsdist.utils import (
    csv_command_results,
    render_csv_result,
    resolve_threads,
    threads_param,
)


lgr = logging.getLogger('datalad.xsdist.xs_kernel_table')


@build_doc
class XsKernelTable(ValidatedInterface):
    """Tabulate the squared H^s X-ray distance of two Diracs

    The table lists g(a), the squared distance of two Diracs at distance
    a, on a grid over [0, amax]. The grid is equidistant for s >= 3/2 and
    graded towards 0 below, where g is steep. With method 'quad' the
    values come from deterministic quadrature and the interpolation error
    at all grid midpoints is verified; 'charfn' averages 1 - cos(a V) over
    ``count`` samples of an auxiliary variable V and needs a seed.

    The CSV has columns ``a,g`` and a ``#meta`` comment line with the
    parameters, quadrature orders or sampling seed.
    """

    _examples_ = [
        dict(
            text="Table of the s=25/16 kernel in 8 dimensions",
            code_py="xs_kernel_table(s=1.5625, dim=8, amax=20, grid=256, "
                    "output='table.csv')",
            code_cmd="datalad xs-kernel-table --s 1.5625 --dim 8 --amax 20 "
                     "--grid 256 table.csv",
        ),
    ]

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            s=EnsureFloat() & EnsureRange(min=0.5),
            dim=EnsureInt() & EnsureRange(min=1),
            amax=EnsureFloat() & EnsureRange(min=0.0),
            grid=EnsureInt() & EnsureRange(min=16),
            method=EnsureChoice(*(m.value for m in TableMethod)),
            count=EnsureInt() & EnsureRange(min=1),
            seed=EnsureInt() & EnsureRange(min=0),
            n_u=EnsureInt() & EnsureRange(min=1, max=512),
            n_levels=EnsureInt() & EnsureRange(min=1),
            n_xi=EnsureInt() & EnsureRange(min=0, max=512),
            scheme=EnsureChoice(*(m.value for m in RadialScheme)),
            n_y=EnsureInt() & EnsureRange(min=1, max=256),
            n_z=EnsureInt() & EnsureRange(min=1, max=256),
            output=EnsurePath(),
            threads=EnsureInt() & EnsureRange(min=1),
        ),
    )

    _params_ = dict(
        s=Parameter(
            args=('--s',),
            metavar='S',
            doc="""Sobolev regularity, must exceed 1/2"""),
        dim=Parameter(
            args=('--dim',),
            metavar='N',
            doc="""ambient dimension"""),
        amax=Parameter(
            args=('--amax',),
            metavar='A',
            doc="""largest tabulated radius"""),
        grid=Parameter(
            args=('--grid',),
            metavar='M',
            doc="""number of grid points, at least 16"""),
        method=Parameter(
            args=('--method',),
            choices=tuple(m.value for m in TableMethod),
            doc="""quadrature or characteristic function sampling"""),
        count=Parameter(
            args=('--count',),
            metavar='K',
            doc="""number of samples for method 'charfn'"""),
        seed=Parameter(
            args=('--seed',),
            metavar='SEED',
            doc="""random seed, required for method 'charfn'"""),
        n_u=Parameter(
            args=('--n-u',),
            metavar='ORDER',
            doc="""Gauss-Jacobi order of the direction integral"""),
        n_levels=Parameter(
            args=('--n-levels',),
            metavar='LEVELS',
            doc="""number of dyadic panels resolving the direction
            integral near zero"""),
        n_xi=Parameter(
            args=('--n-xi',),
            metavar='ORDER',
            doc="""order of the frequency integral; 0 uses the Bessel
            closed form of the one-dimensional profile"""),
        scheme=Parameter(
            args=('--scheme',),
            choices=tuple(m.value for m in RadialScheme),
            doc="""quadrature of the direction integral: 'projection'
            integrates the law of the first direction component,
            'normal-chi' its representation by a normal and a chi-square
            variable"""),
        n_y=Parameter(
            args=('--n-y',),
            metavar='ORDER',
            doc="""generalized Gauss-Laguerre order in the chi-square
            variable of the 'normal-chi' scheme"""),
        n_z=Parameter(
            args=('--n-z',),
            metavar='ORDER',
            doc="""Gauss-Hermite order in the normal variable of the
            'normal-chi' scheme"""),
        output=Parameter(
            args=('output',),
            nargs='?',
            metavar='OUT.CSV',
            doc="""file to write the table to. By default the table is
            printed."""),
        threads=threads_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            *,
            s: float = 1.0,
            dim: int = 1,
            amax: float = 20.0,
            grid: int = 256,
            method: str = 'quad',
            count: int = 10 ** 6,
            seed: int | None = None,
            n_u: int = 20,
            n_levels: int = 60,
            n_xi: int = 0,
            scheme: str = 'projection',
            n_y: int = 128,
            n_z: int = 128,
            output: Path | None = None,
            threads: int | None = None,
    ):
        config = dict(
            command='kernel-table',
            s=s,
            dim=dim,
            amax=amax,
            grid=grid,
            method=method,
            threads=resolve_threads(threads),
        )
        orders = HsOrders(n_u, n_levels, n_xi, n_y, n_z, scheme)
        if method == TableMethod.CHARFN.value:
            config.update(count=count, seed=seed)
        else:
            config.update(orders.as_dict())

        def compute():
            if method == TableMethod.CHARFN.value and seed is None:
                raise ValueError('--seed is required for method charfn')
            params = HsParams(s, dim)
            table = build_kernel_table(
                params, amax, grid, method,
                orders=orders,
                count=count,
                seed=None if seed is None else Seed(seed),
                threads=threads,
            )
            lgr.info('Tabulated %s in %i dimensions on [0, %g]',
                     table.name, dim, amax)
            return table.to_csv(), dict(bound=params.bound)

        yield from csv_command_results(
            'xs_kernel_table', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)
