"""Energy (homogeneous H^1) instance of the X-ray Sobolev distance

The squared distance between two Diracs is the Euclidean distance
g(r) = r. The squared distance from a Dirac at radius ``a`` to the standard
normal law N(0, I_N) is

    xi(a) = E||x - Z|| - (1/2) E||Z - Z'||,   ||x|| = a

for which several evaluators are provided (``XiMethod``).
"""

from __future__ import annotations

__docformat__ = "numpy"

import logging
from dataclasses import (
    dataclass,
    field,
)
from enum import Enum
from typing import (
    Callable,
    Protocol,
)

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from datalad_xsdist.core import (
    SQRT2,
    DimensionMismatchError,
    DomainError,
    NonConvergenceError,
    PointCloud,
    gamma_ratio,
    half_shift_gamma_ratios,
    log_gamma_fn,
    run_blocks,
)
from datalad_xsdist.utils import (
    get_setting,
    resolve_block_size,
    resolve_threads,
)

lgr = logging.getLogger('datalad.xsdist.energy')


class SobolevKernel(Protocol):
    """Radial kernel with g(||x - y||) = d^2(delta_x, delta_y)"""
    name: str
    # largest radius the kernel can be evaluated at
    radius_max: float

    def __call__(self, r: np.ndarray) -> np.ndarray: ...


class EnergyKernel:
    name = 'energy'
    radius_max = np.inf

    def __call__(self, r):
        return energy_kernel(r)

    def __repr__(self):
        return 'EnergyKernel()'


ENERGY_KERNEL = EnergyKernel()


class XiMethod(str, Enum):
    SERIES = 'series'
    POISSON_EXACT = 'poisson'
    QUADRATIC_SURROGATE = 'surrogate'
    COARSE = 'coarse'
    ITERATED = 'iterated'


def normal_self_term(n_dim: int) -> float:
    """(1/2) E||Z - Z'|| = Gamma((N+1)/2) / Gamma(N/2)"""
    _check_dim(n_dim)
    return float(gamma_ratio((n_dim + 1) / 2, n_dim / 2))


def xi_zero(n_dim: int) -> float:
    return (SQRT2 - 1.0) * normal_self_term(n_dim)


def xi_second_derivative_zero(n_dim: int) -> float:
    """xi''(0) = sqrt(2/pi) Gamma((N+1)/2) Gamma(3/2) / Gamma(1 + N/2)

    Tends to 1/sqrt(N) for large N.
    """
    _check_dim(n_dim)
    return float(gamma_ratio((n_dim + 1) / 2, 1 + n_dim / 2) / SQRT2)


def _check_dim(n_dim: int):
    if n_dim < 1:
        raise DomainError(f'dimension must be at least 1, got {n_dim}')


@dataclass(frozen=True)
class XiEvaluator:
    """How to evaluate xi(a) in dimension ``n_dim``

    ``c_N0`` and ``c_N1`` are fixed such that c_N0 + sqrt(a^2 + c_N1)
    matches xi(a) to second order at a = 0.
    """
    n_dim: int
    method: XiMethod = XiMethod.QUADRATIC_SURROGATE
    tolerance: float = field(
        default_factory=lambda: get_setting('datalad.xsdist.xi-tolerance'))
    max_terms: int = 10000
    c_N0: float = field(init=False)
    c_N1: float = field(init=False)

    def __post_init__(self):
        _check_dim(self.n_dim)
        object.__setattr__(self, 'method', XiMethod(self.method))
        if not self.tolerance > 0:
            raise DomainError('tolerance must be positive')
        if self.max_terms < 1:
            raise DomainError('max_terms must be positive')
        dd0 = xi_second_derivative_zero(self.n_dim)
        object.__setattr__(self, 'c_N1', 1.0 / dd0 ** 2)
        object.__setattr__(self, 'c_N0', xi_zero(self.n_dim) - 1.0 / dd0)


@dataclass(frozen=True)
class EnergyLossReport:
    cross_term: float
    self_term_a: float
    self_term_b: float
    total: float

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.cross_term, self.self_term_a, self.self_term_b,
                self.total)


def energy_kernel(r):
    """g(r) = r, the canonical normalization of the energy kernel"""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise DomainError('energy kernel is only defined for r >= 0')
    return float(arr) if np.ndim(r) == 0 else arr


#
# Pairwise sums
#
def _pair_sum(
        x: np.ndarray,
        wx: np.ndarray,
        y: np.ndarray,
        wy: np.ndarray,
        g: Callable[[np.ndarray], np.ndarray],
        radius_max: float = np.inf,
        block_size: int | None = None,
        threads: int | None = None,
) -> float:
    """sum_i sum_j wx_i wy_j g(||x_i - y_j||), tiled over rows of ``x``"""
    def block(_, start, stop):
        d = cdist(x[start:stop], y)
        if d.size and d.max() > radius_max:
            raise DomainError(
                f'pairwise radius {d.max()!r} exceeds the kernel domain '
                f'[0, {radius_max!r}]')
        return wx[start:stop] @ np.asarray(g(d)) @ wy

    partials = run_blocks(
        block,
        len(x),
        resolve_block_size(block_size),
        resolve_threads(threads),
    )
    return float(np.sum(partials))


def _check_pair(a: PointCloud, b: PointCloud):
    if a.dim != b.dim:
        raise DimensionMismatchError(
            f'clouds differ in dimension: {a.dim} != {b.dim}')
    if not a.count or not b.count:
        raise DomainError('distances are undefined for empty clouds')


def generic_xs_distance_sq(
        g: SobolevKernel | Callable,
        a: PointCloud,
        b: PointCloud,
        *,
        block_size: int | None = None,
        threads: int | None = None,
) -> EnergyLossReport:
    """Squared X-ray distance between two (weighted) point clouds

    cross = sum w_i v_j g(|x_i - y_j|), self terms (1/2) sum w_i w_j
    g(|x_i - x_j|) and likewise for ``b``; total = cross - self_a - self_b.

    The result is bitwise symmetric in ``a`` and ``b``.
    """
    _check_pair(a, b)
    radius_max = getattr(g, 'radius_max', np.inf)
    kw = dict(radius_max=radius_max, block_size=block_size, threads=threads)
    swap = b.order_key() < a.order_key()
    if swap:
        a, b = b, a
    wa, wb = a.mass, b.mass
    cross = _pair_sum(a.points, wa, b.points, wb, g, **kw)
    self_a = 0.5 * _pair_sum(a.points, wa, a.points, wa, g, **kw)
    self_b = 0.5 * _pair_sum(b.points, wb, b.points, wb, g, **kw)
    if swap:
        self_a, self_b = self_b, self_a
    return EnergyLossReport(
        cross_term=cross,
        self_term_a=self_a,
        self_term_b=self_b,
        total=cross - (self_a + self_b),
    )


def xs_energy_distance_sq(
        a: PointCloud,
        b: PointCloud,
        **kwargs,
) -> EnergyLossReport:
    return generic_xs_distance_sq(ENERGY_KERNEL, a, b, **kwargs)


#
# Dirac to normal
#
def xi_series(a: float, ev: XiEvaluator) -> float:
    """Alternating power series of xi in a^2

    Terms are summed until one drops below ``tolerance`` relative to the
    partial sum. Cancellation grows with ``a``, use ``xi()`` to only take
    this route for a^2 <= N.
    """
    if a < 0:
        raise DomainError('radius must be nonnegative')
    n = ev.n_dim
    total = xi_zero(n)
    if a == 0:
        return total
    log_half_a2 = np.log(0.5 * a * a)
    log_prefactor = 0.5 * np.log(2 / np.pi) + log_gamma_fn((n + 1) / 2)
    for k in range(ev.max_terms):
        log_mag = (
            log_prefactor
            + (k + 1) * log_half_a2
            - log_gamma_fn(k + 2)
            + log_gamma_fn(k + 1.5)
            - np.log(2 * k + 1)
            - log_gamma_fn(k + 1 + n / 2)
        )
        term = np.exp(log_mag) if k % 2 == 0 else -np.exp(log_mag)
        total += term
        if abs(term) < ev.tolerance * abs(total):
            lgr.log(5, 'xi series at a=%g converged after %i terms', a, k + 1)
            return float(total)
    raise NonConvergenceError(
        f'xi series did not converge within {ev.max_terms} terms at a={a}, '
        f'N={n}')


def _poisson_weights(
        a: np.ndarray,
        n_dim: int,
        tolerance: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Poisson(a^2/2) masses p_j (rows) and the ratios
    Gamma(j + N/2 + 1/2) / Gamma(j + N/2) up to the truncation index"""
    lam = 0.5 * a * a
    lam_max = float(lam.max()) if lam.size else 0.0
    j_max = int(stats.poisson.isf(tolerance, lam_max)) + 1 if lam_max > 0 \
        else 0
    j = np.arange(j_max + 1)
    p = stats.poisson.pmf(j[None, :], lam[:, None])
    ratios = half_shift_gamma_ratios(n_dim / 2, j_max + 1)
    return p, ratios


def normal_distance_mean(a, n_dim: int, tolerance: float = 1e-14):
    """E||x - Z|| for ||x|| = a by the Poisson mixture of chi means

    sqrt(2) sum_j p_j Gamma(j + N/2 + 1/2) / Gamma(j + N/2), p_j the
    Poisson(a^2/2) masses, truncated once the remaining mass drops
    below ``tolerance``.
    """
    _check_dim(n_dim)
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(arr < 0):
        raise DomainError('radius must be nonnegative')
    p, ratios = _poisson_weights(arr, n_dim, tolerance)
    out = SQRT2 * (p @ ratios)
    return float(out[0]) if np.ndim(a) == 0 else out


def xi_poisson_exact(a, n_dim: int, tolerance: float | None = None):
    if tolerance is None:
        tolerance = get_setting('datalad.xsdist.xi-tolerance')
    return normal_distance_mean(a, n_dim, tolerance) - normal_self_term(n_dim)


def xi_gradient(a, n_dim: int, tolerance: float | None = None):
    """d xi / da without cancellation

    Uses g^{N+2}(a) - g^N(a) = sqrt(2) sum_j p_j R_j / (2 (j + N/2)), which
    follows from the ratio recurrence, so that the derivative is
    a sqrt(2) sum_j p_j R_j / (2j + N). Zero at a = 0.
    """
    if np.ndim(a) == 0:
        return float(a) * _gradient_over_radius(a, n_dim, tolerance)
    return np.asarray(a, dtype=float) * _gradient_over_radius(
        a, n_dim, tolerance)


def _gradient_over_radius(a, n_dim: int, tolerance: float | None = None):
    _check_dim(n_dim)
    if tolerance is None:
        tolerance = get_setting('datalad.xsdist.xi-tolerance')
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(arr < 0):
        raise DomainError('radius must be nonnegative')
    p, ratios = _poisson_weights(arr, n_dim, tolerance)
    j = np.arange(len(ratios))
    out = SQRT2 * (p @ (ratios / (2 * j + n_dim)))
    return float(out[0]) if np.ndim(a) == 0 else out


def xi_quadratic_surrogate(a, ev: XiEvaluator):
    """c_N0 + sqrt(a^2 + c_N1)"""
    a = np.asarray(a, dtype=float) if np.ndim(a) else float(a)
    return ev.c_N0 + np.sqrt(a * a + ev.c_N1)


def xi_coarse(a, n_dim: int):
    """sqrt(a^2 + N) - c_1 with c_1 chosen to match xi(0)"""
    _check_dim(n_dim)
    a = np.asarray(a, dtype=float) if np.ndim(a) else float(a)
    c1 = np.sqrt(n_dim) - xi_zero(n_dim)
    return np.sqrt(a * a + n_dim) - c1


def xi_iterated(a, n_dim: int):
    """Three-term large-radius expansion of the non-central chi mean"""
    _check_dim(n_dim)
    a = np.asarray(a, dtype=float) if np.ndim(a) else float(a)
    a2 = a * a
    S = a2 + n_dim
    return np.sqrt(S) * (
        1 - (2 * a2 + n_dim) / (4 * S ** 2) + (3 * a2 + n_dim) / (2 * S ** 3)
    ) - normal_self_term(n_dim)


def xi(a, ev: XiEvaluator):
    """xi(a) with the evaluator's method

    The series is only used for a^2 <= N, the Poisson sum takes over
    beyond.
    """
    m = ev.method
    if m == XiMethod.QUADRATIC_SURROGATE:
        return xi_quadratic_surrogate(a, ev)
    if m == XiMethod.COARSE:
        return xi_coarse(a, ev.n_dim)
    if m == XiMethod.ITERATED:
        return xi_iterated(a, ev.n_dim)
    if m == XiMethod.SERIES:
        arr = np.atleast_1d(np.asarray(a, dtype=float))
        use_series = arr * arr <= ev.n_dim
        out = np.empty_like(arr)
        out[use_series] = [xi_series(v, ev) for v in arr[use_series]]
        if np.any(~use_series):
            out[~use_series] = xi_poisson_exact(
                arr[~use_series], ev.n_dim, ev.tolerance)
        return float(out[0]) if np.ndim(a) == 0 else out
    return xi_poisson_exact(a, ev.n_dim, ev.tolerance)


def xi_derivative_over_radius(a, ev: XiEvaluator):
    """xi'(a) / a, finite at a = 0 for every method"""
    a = np.asarray(a, dtype=float) if np.ndim(a) else float(a)
    m = ev.method
    if m == XiMethod.QUADRATIC_SURROGATE:
        return 1.0 / np.sqrt(a * a + ev.c_N1)
    if m == XiMethod.COARSE:
        return 1.0 / np.sqrt(a * a + ev.n_dim)
    if m == XiMethod.ITERATED:
        n = ev.n_dim
        S = a * a + n
        # 2 d/dS of the expansion
        return 2 * (
            0.5 * S ** -0.5
            + 0.25 * S ** -1.5
            - 1.5 * (n / 4 + 1.5) * S ** -2.5
            + 2.5 * n * S ** -3.5
        )
    return _gradient_over_radius(a, ev.n_dim, ev.tolerance)


def xi_derivative(a, ev: XiEvaluator):
    return a * xi_derivative_over_radius(a, ev)


def latent_loss(
        codes: PointCloud,
        ev: XiEvaluator,
        *,
        block_size: int | None = None,
        threads: int | None = None,
) -> EnergyLossReport:
    """Squared energy X-ray distance from a batch of codes to N(0, I)

    With the quadratic surrogate this is the batch latent loss
    c_N0 + (1/K) sum sqrt(||z_k||^2 + c_N1) - (1/(2K^2)) sum sum
    ||z_k - z_k'||. ``self_term_a`` is the normal-side constant
    (1/2) E||Z - Z'||.
    """
    if codes.dim != ev.n_dim:
        raise DimensionMismatchError(
            f'codes have dimension {codes.dim}, evaluator expects {ev.n_dim}')
    if not codes.count:
        raise DomainError('latent loss is undefined for an empty batch')
    z, w = codes.points, codes.mass
    radii = np.linalg.norm(z, axis=1)
    mean_xi = float(w @ np.asarray(xi(radii, ev)))
    self_b = 0.5 * _pair_sum(
        z, w, z, w, energy_kernel, block_size=block_size, threads=threads)
    G = normal_self_term(ev.n_dim)
    return EnergyLossReport(
        cross_term=mean_xi + G,
        self_term_a=G,
        self_term_b=self_b,
        total=mean_xi - self_b,
    )


def xs_energy_distance_to_normal(
        cloud: PointCloud,
        ev: XiEvaluator,
        **kwargs,
) -> EnergyLossReport:
    return latent_loss(cloud, ev, **kwargs)


def latent_loss_gradient(
        codes: PointCloud,
        ev: XiEvaluator,
        *,
        block_size: int | None = None,
        threads: int | None = None,
) -> np.ndarray:
    """Gradient of ``latent_loss().total`` with respect to the codes

    Coincident codes contribute the subgradient 0 to the pairwise term.
    """
    if codes.dim != ev.n_dim:
        raise DimensionMismatchError(
            f'codes have dimension {codes.dim}, evaluator expects {ev.n_dim}')
    z, w = codes.points, codes.mass
    radii = np.linalg.norm(z, axis=1)
    grad = (w * np.asarray(xi_derivative_over_radius(radii, ev)))[:, None] * z

    def block(_, start, stop):
        d = cdist(z[start:stop], z)
        with np.errstate(divide='ignore'):
            inv = np.where(d > 0, 1.0 / d, 0.0) * w[None, :]
        # sum_k' w_k' (z_k - z_k') / d_kk'
        return z[start:stop] * inv.sum(axis=1)[:, None] - inv @ z

    pair = np.vstack(run_blocks(
        block,
        len(z),
        resolve_block_size(block_size),
        resolve_threads(threads),
    ))
    return grad - w[:, None] * pair
