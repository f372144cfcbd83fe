"""Monte-Carlo cross-checks of the closed forms"""

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
    EnsureFloat,
    EnsureInt,
    EnsurePath,
    EnsureRange,
    EnsureStr,
)

from datalad_xsdist.core import (
    Seed,
    sphere_abs_moment,
)
from datalad_xsdist.energy import (
    EnergyKernel,
    generic_xs_distance_sq,
    normal_self_term,
    xi_poisson_exact,
)
from datalad_xsdist.oracle import (
    mc_dirac_to_normal,
    mc_sliced_distance_sq,
)
from datalad_xsdist.sobolev_hs import (
    HsParams,
    hs_dual_norm_sq_1d,
    hs_kernel_charfn_estimate,
    hs_kernel_pu,
    hs_kernel_quadrature,
    parse_kernel,
)
from datalad_xsdist.utils import (
    csv_command_results,
    output_param,
    read_cloud,
    render_csv,
    render_csv_result,
    resolve_threads,
    seed_param,
    threads_param,
)


lgr = logging.getLogger('datalad.xsdist.xs_oracle')

ORACLE_HEADER = ('estimator', 'value', 'std_error', 'n_samples', 'reference')
ORACLE_MODES = ('dirac-normal', 'sliced', 'hs-kernel')


def parse_point(spec: str) -> np.ndarray:
    """Coordinates from a comma-separated string"""
    try:
        return np.array([float(v) for v in spec.split(',')])
    except ValueError:
        raise ValueError(f'invalid point {spec!r}, expected "x1,x2,..."')


def _row(name, est, reference):
    return (name, est.value, est.std_error, est.n_samples, reference)


def _dirac_normal(point, samples, seed, threads):
    x = parse_point(point)
    a = float(np.linalg.norm(x))
    # E||x - Z|| = xi(||x||) + (1/2) E||Z - Z'||
    reference = float(xi_poisson_exact(a, len(x))) + normal_self_term(len(x))
    est = mc_dirac_to_normal(x, samples, seed, threads=threads)
    return [_row('mean-distance', est, reference)], dict(dim=len(x))


def _sliced(a, b, kernel, samples, seed, threads):
    ca, cb = read_cloud(a), read_cloud(b)
    g = parse_kernel(kernel, ca.dim)
    report = generic_xs_distance_sq(g, ca, cb, threads=threads)
    if isinstance(g, EnergyKernel):
        # slicing |x| yields E|theta_1| times the radial kernel
        reference = sphere_abs_moment(ca.dim) * report.total
        kernel1d = np.abs
    else:
        reference = report.total
        s = g.params.s

        def kernel1d(r):
            return hs_dual_norm_sq_1d(r, s)
    est = mc_sliced_distance_sq(ca, cb, kernel1d, samples, seed,
                                threads=threads)
    return [_row('sliced', est, reference)], dict(dim=ca.dim)


def _hs_kernel(radius, s, dim, samples, seed, threads):
    params = HsParams(s, dim)
    reference = hs_kernel_quadrature(radius, params)
    rows = [
        _row('charfn', hs_kernel_charfn_estimate(
            radius, params, samples, seed.stream(0), threads=threads),
            reference),
        _row('sphere', hs_kernel_pu(
            radius, params, samples, seed.stream(1), threads=threads),
            reference),
    ]
    return rows, dict(dim=dim)


@build_doc
class XsOracle(ValidatedInterface):
    """Independent Monte-Carlo estimates next to their closed forms

    Modes:

    'dirac-normal' estimates E||x - Z|| for Z ~ N(0, I) by sampling and
    reports the Poisson series value as reference.

    'sliced' averages one-dimensional distances of the projections of two
    point clouds over random directions. For the energy kernel the
    reference is E|theta_1| times the squared energy X-ray distance, for
    H^s kernels the squared distance itself.

    'hs-kernel' evaluates the H^s kernel at one radius with the
    characteristic function sampler and with sampled directions over the
    one-dimensional closed form, referenced against quadrature.

    Every row lists estimator, value, standard error, sample count and
    the deterministic reference value.
    """

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            mode=EnsureChoice(*ORACLE_MODES),
            point=EnsureStr(),
            a=EnsurePath(lexists=True),
            b=EnsurePath(lexists=True),
            kernel=EnsureStr(),
            radius=EnsureFloat() & EnsureRange(min=0.0),
            s=EnsureFloat() & EnsureRange(min=0.5),
            dim=EnsureInt() & EnsureRange(min=1),
            samples=EnsureInt() & EnsureRange(min=2),
            seed=EnsureInt() & EnsureRange(min=0),
            output=EnsurePath(),
            threads=EnsureInt() & EnsureRange(min=1),
        ),
    )

    _params_ = dict(
        mode=Parameter(
            args=('mode',),
            choices=ORACLE_MODES,
            doc="""which quantity to estimate"""),
        point=Parameter(
            args=('--point',),
            metavar='X1,X2,...',
            doc="""location of the Dirac for mode 'dirac-normal'"""),
        a=Parameter(
            args=('--a',),
            metavar='A.CSV',
            doc="""first point cloud for mode 'sliced'"""),
        b=Parameter(
            args=('--b',),
            metavar='B.CSV',
            doc="""second point cloud for mode 'sliced'"""),
        kernel=Parameter(
            args=('--kernel',),
            metavar='KERNEL',
            doc="""'energy' or 'hs:<s>' for mode 'sliced'"""),
        radius=Parameter(
            args=('--radius',),
            metavar='A',
            doc="""distance of the two Diracs for mode 'hs-kernel'"""),
        s=Parameter(
            args=('--s',),
            metavar='S',
            doc="""Sobolev regularity for mode 'hs-kernel'"""),
        dim=Parameter(
            args=('--dim',),
            metavar='N',
            doc="""dimension for mode 'hs-kernel'"""),
        samples=Parameter(
            args=('--samples',),
            metavar='COUNT',
            doc="""number of Monte-Carlo samples (directions for mode
            'sliced')"""),
        seed=seed_param,
        output=output_param,
        threads=threads_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            mode: str,
            *,
            point: str | None = None,
            a: Path | None = None,
            b: Path | None = None,
            kernel: str = 'energy',
            radius: float = 1.0,
            s: float = 1.0,
            dim: int = 2,
            samples: int = 10 ** 6,
            seed: int | None = None,
            output: Path | None = None,
            threads: int | None = None,
    ):
        config = dict(
            command='oracle',
            mode=mode,
            samples=samples,
            seed=seed,
            threads=resolve_threads(threads),
        )
        if mode == 'dirac-normal':
            config.update(point=point)
        elif mode == 'sliced':
            config.update(a=a, b=b, kernel=kernel)
        else:
            config.update(radius=radius, s=s, dim=dim)

        def compute():
            if seed is None:
                raise ValueError('--seed is required for oracle runs')
            rng_seed = Seed(seed)
            if mode == 'dirac-normal':
                if point is None:
                    raise ValueError('mode dirac-normal needs --point')
                rows, extra = _dirac_normal(point, samples, rng_seed, threads)
            elif mode == 'sliced':
                if a is None or b is None:
                    raise ValueError('mode sliced needs --a and --b')
                rows, extra = _sliced(a, b, kernel, samples, rng_seed,
                                      threads)
            else:
                rows, extra = _hs_kernel(radius, s, dim, samples, rng_seed,
                                         threads)
            config.update(extra)
            for row in rows:
                lgr.debug('Oracle %s: %s', mode, row)
            return render_csv(ORACLE_HEADER, rows), dict(
                estimates=[dict(zip(ORACLE_HEADER, r)) for r in rows])

        yield from csv_command_results(
            'xs_oracle', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)
