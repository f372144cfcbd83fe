"""Independent checks: Monte-Carlo slicing, exact small-instance
Wasserstein, the geodesic identity and finite differences"""

from __future__ import annotations

__docformat__ = "numpy"

import itertools
import logging
from typing import (
    Callable,
    Sequence,
)

import numpy as np
from scipy.spatial.distance import cdist

from datalad_xsdist.core import (
    DimensionMismatchError,
    DomainError,
    OracleEstimate,
    PointCloud,
    Seed,
    block_moments,
    estimate_from_moments,
    run_blocks,
    sample_sphere_array,
)
from datalad_xsdist.energy import xs_energy_distance_sq
from datalad_xsdist.utils import (
    resolve_block_size,
    resolve_threads,
)

lgr = logging.getLogger('datalad.xsdist.oracle')

# largest cloud exact_w2_sq_small() enumerates assignments for
MAX_EXACT_W2_POINTS = 8
# upper limit on the pairwise difference entries held per direction block
_PROJECTION_CHUNK = 2 ** 22


def _projected_pair_sum(pa, wa, pb, wb, kernel1d):
    # pa: K x M projections, one column per direction
    diff = np.abs(pa[:, None, :] - pb[None, :, :])
    return np.einsum('i,j,ijm->m', wa, wb, np.asarray(kernel1d(diff)))


def mc_sliced_distance_sq(
        a: PointCloud,
        b: PointCloud,
        kernel1d: Callable[[np.ndarray], np.ndarray],
        n_dirs: int,
        seed: Seed,
        *,
        threads: int | None = None,
) -> OracleEstimate:
    """Average over random directions of the projected 1-D distance

    For every direction theta both clouds are projected onto theta and
    compared with the one-dimensional kernel ``kernel1d`` (|r| for the
    energy distance). The raw energy estimate relates to
    ``xs_energy_distance_sq`` by the factor E|theta_1|.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(
            f'clouds differ in dimension: {a.dim} != {b.dim}')
    wa, wb = a.mass, b.mass
    per_dir = a.count * b.count + a.count ** 2 + b.count ** 2
    dirs_per_block = max(1, min(
        resolve_block_size(None), _PROJECTION_CHUNK // per_dir))

    def block(i, start, stop):
        theta = sample_sphere_array(a.dim, stop - start, seed, block=i)
        pa = a.points @ theta.T
        pb = b.points @ theta.T
        # same code path for all three terms keeps a == b exactly zero
        vals = _projected_pair_sum(pa, wa, pb, wb, kernel1d) \
            - 0.5 * _projected_pair_sum(pa, wa, pa, wa, kernel1d) \
            - 0.5 * _projected_pair_sum(pb, wb, pb, wb, kernel1d)
        return block_moments(vals)

    parts = run_blocks(block, n_dirs, dirs_per_block, resolve_threads(threads))
    est = estimate_from_moments(parts, seed=seed)
    lgr.debug('Sliced distance estimate %r', est)
    return est


def mc_dirac_to_normal(
        x: Sequence[float] | np.ndarray,
        n_samples: int,
        seed: Seed,
        *,
        threads: int | None = None,
) -> OracleEstimate:
    """Monte-Carlo estimate of E||x - Z||, Z ~ N(0, I)"""
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def block(i, start, stop):
        z = seed.generator(i).standard_normal((stop - start, len(x)))
        return block_moments(np.linalg.norm(x - z, axis=1))

    parts = run_blocks(block, n_samples, resolve_block_size(None),
                       resolve_threads(threads))
    return estimate_from_moments(parts, seed=seed)


def exact_w2_sq_small(a: PointCloud, b: PointCloud) -> float:
    """Squared 2-Wasserstein distance of two uniform clouds of equal size,
    minimizing over all assignments"""
    if a.dim != b.dim:
        raise DimensionMismatchError(
            f'clouds differ in dimension: {a.dim} != {b.dim}')
    if not (a.is_uniform and b.is_uniform):
        raise DomainError('exact W2 is only available for uniform clouds')
    if a.count != b.count:
        raise DomainError('exact W2 needs clouds of equal size')
    if not 1 <= a.count <= MAX_EXACT_W2_POINTS:
        raise DomainError(
            f'exact W2 enumerates at most {MAX_EXACT_W2_POINTS} points, '
            f'got {a.count}')
    cost = cdist(a.points, b.points, 'sqeuclidean')
    perms = np.array(list(itertools.permutations(range(a.count))))
    totals = cost[np.arange(a.count), perms].sum(axis=1)
    return float(totals.min() / a.count)


def xs_energy_total(a: PointCloud, b: PointCloud) -> float:
    return xs_energy_distance_sq(a, b).total


def geodesic_identity_residual(
        mu0: PointCloud,
        mu1: PointCloud,
        nu: PointCloud,
        t_grid: Sequence[float],
        *,
        distance_sq: Callable[[PointCloud, PointCloud], float] =
        xs_energy_total,
        path: Callable[[float], PointCloud] | None = None,
) -> np.ndarray:
    """d^2(nu, mu_t) minus its quadratic interpolation in t

    ``mu_t`` is the mixture (1-t) mu0 + t mu1 unless another ``path`` is
    given. Hilbert-embeddable distances give zero residuals along
    mixtures.
    """
    if not mu0.dim == mu1.dim == nu.dim:
        raise DimensionMismatchError('clouds must share their dimension')
    if path is None:
        def path(t):
            return PointCloud.mixture(mu0, mu1, t)
    d0 = distance_sq(nu, mu0)
    d1 = distance_sq(nu, mu1)
    d01 = distance_sq(mu0, mu1)
    res = []
    for t in t_grid:
        t = float(t)
        if t == 0.0:
            mu_t = mu0
        elif t == 1.0:
            mu_t = mu1
        else:
            mu_t = path(t)
        res.append(
            distance_sq(nu, mu_t)
            - ((1 - t) * d0 + t * d1 - t * (1 - t) * d01))
    return np.array(res)


def rigid_family(t: float) -> PointCloud:
    """{(t, 2), (-t, -2)}, a rigid motion of two points"""
    return PointCloud([[t, 2.0], [-t, -2.0]])


def rigid_target() -> PointCloud:
    return PointCloud([[1.0, 0.0], [-1.0, 0.0]])


def scan_rigid(t_grid: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """W2^2 and squared energy X-ray distance from the target to the family

    W2^2 = 4 + min((1-t)^2, (1+t)^2) has minima at t = -1 and t = 1 and a
    local maximum at t = 0, while the energy scan stays convex.
    """
    nu = rigid_target()
    w2 = np.array([exact_w2_sq_small(nu, rigid_family(t)) for t in t_grid])
    xs = np.array([xs_energy_total(nu, rigid_family(t)) for t in t_grid])
    return w2, xs


def finite_diff_check(
        f: Callable[[np.ndarray], float],
        grad_f: Callable[[np.ndarray], np.ndarray],
        point: np.ndarray,
        h: float = 1e-5,
) -> float:
    """Largest deviation of ``grad_f`` from central differences of ``f``"""
    if not h > 0:
        raise DomainError('step must be positive')
    point = np.array(point, dtype=float)
    grad = np.asarray(grad_f(point), dtype=float).reshape(point.shape)
    numeric = np.empty_like(point)
    flat, nflat = point.reshape(-1), numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(point)
        flat[i] = orig - h
        fm = f(point)
        flat[i] = orig
        nflat[i] = (fp - fm) / (2 * h)
    return float(np.max(np.abs(numeric - grad))) if point.size else 0.0
