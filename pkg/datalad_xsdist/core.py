"""Point clouds, special functions, quadrature rules and seeded sampling

Everything in here is pure given its inputs (and a ``Seed``), and safe to
call from concurrent workers.
"""

from __future__ import annotations

__docformat__ = "numpy"

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import (
    dataclass,
    field,
)
from enum import Enum
from functools import lru_cache
from typing import (
    Callable,
    Sequence,
    TypeVar,
)

import numpy as np
from scipy import (
    linalg,
    special,
)


lgr = logging.getLogger('datalad.xsdist.core')

T = TypeVar('T')

SQRT2 = np.sqrt(2.0)
SQRTPI = np.sqrt(np.pi)

# above this argument the gamma function is evaluated in log space
GAMMA_LOG_THRESHOLD = 20.0
# largest quadrature order make_quadrature() will produce
MAX_QUADRATURE_ORDER = 512


#
# Exceptions
#
class NumericalError(RuntimeError):
    """A computation did not produce a trustworthy number"""


class NonConvergenceError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function"""


class DimensionMismatchError(ValueError):
    pass


class CloudFormatError(ValueError):
    pass


#
# Domain types
#
@dataclass(frozen=True, eq=False)
class PointCloud:
    """Empirical measure sum_k w_k delta_{x_k} on R^N

    Without explicit ``weights`` every point carries mass 1/K. Weighted
    clouds only exist to represent mixtures of uniform clouds, see
    ``PointCloud.mixture()``.

    An empty cloud (K=0) is a valid value (e.g. zero generated samples),
    but none of the distance computations accept it.
    """
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            # a flat sequence is a cloud on the real line
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise CloudFormatError(
                f'point cloud must be a K x N matrix, got shape {pts.shape}')
        if not np.all(np.isfinite(pts)):
            raise CloudFormatError('point cloud contains NaN or Inf')
        pts.flags.writeable = False
        object.__setattr__(self, 'points', pts)

        if self.weights is None:
            return
        w = np.array(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise CloudFormatError(
                f'need one weight per point, got {w.shape} for {pts.shape[0]}')
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise CloudFormatError('weights must be finite and nonnegative')
        if pts.shape[0] and abs(w.sum() - 1.0) > 1e-12:
            raise CloudFormatError(
                f'weights must sum to 1, got {w.sum()!r}')
        w.flags.writeable = False
        object.__setattr__(self, 'weights', w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def mass(self) -> np.ndarray:
        """Per-point masses, uniform unless weights were given"""
        if self.weights is not None:
            return self.weights
        return np.full(self.count, 1.0 / self.count)

    @property
    def is_uniform(self) -> bool:
        return self.weights is None

    @classmethod
    def mixture(cls, mu0: PointCloud, mu1: PointCloud, t: float) -> PointCloud:
        """The measure (1-t) mu0 + t mu1 as a weighted union of both clouds"""
        if mu0.dim != mu1.dim:
            raise DimensionMismatchError(
                f'cannot mix clouds of dimension {mu0.dim} and {mu1.dim}')
        if not 0.0 <= t <= 1.0:
            raise DomainError(f'mixture parameter must be in [0, 1], got {t}')
        return cls(
            np.vstack([mu0.points, mu1.points]),
            weights=np.concatenate([(1.0 - t) * mu0.mass, t * mu1.mass]),
        )

    def order_key(self) -> tuple:
        # total order on clouds, used to make pairwise reductions
        # independent of argument order
        return (
            self.count,
            self.points.tobytes(),
            b'' if self.weights is None else self.weights.tobytes(),
        )


@dataclass(frozen=True, eq=False)
class Direction:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
            raise DomainError('direction must have unit norm')
        theta.flags.writeable = False
        object.__setattr__(self, 'theta', theta)


class QuadratureKind(str, Enum):
    GAUSS_HERMITE = 'hermite'
    GAUSS_LAGUERRE = 'laguerre'
    GAUSS_LEGENDRE = 'legendre'


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss rule for the weight function of ``kind``

    GaussHermite integrates against exp(-x^2) on R, GaussLaguerre against
    x^alpha exp(-x) on [0, inf), GaussLegendre against 1 on [-1, 1].
    """
    kind: QuadratureKind
    nodes: np.ndarray
    weights: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError('nodes and weights differ in length')
        # high orders underflow the outermost weights to zero
        if np.any(self.weights < 0) or not self.weights.sum() > 0:
            raise NumericalError('quadrature weights must be positive')
        if self.kind != QuadratureKind.GAUSS_LAGUERRE and not np.allclose(
                self.nodes, -self.nodes[::-1], rtol=0, atol=1e-10):
            raise NumericalError('symmetric rule has asymmetric nodes')

    @property
    def order(self) -> int:
        return len(self.nodes)

    @property
    def degree(self) -> int:
        """Degree of polynomial exactness"""
        return 2 * self.order - 1

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@dataclass(frozen=True)
class Seed:
    """Reproducible randomness: identical (value, stream_id) pairs
    reproduce identical sample sequences

    Streams are split with numpy's ``SeedSequence`` spawn keys, so
    distinct ``stream_id`` values (and distinct blocks within a stream)
    draw statistically independent sequences.
    """
    value: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.value < 2 ** 64:
            raise DomainError('seed value must be a 64-bit unsigned integer')
        if self.stream_id < 0:
            raise DomainError('stream_id must be nonnegative')

    def generator(self, block: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(
            self.value, spawn_key=(self.stream_id, block))))

    def stream(self, stream_id: int) -> Seed:
        return Seed(self.value, stream_id)


@dataclass(frozen=True)
class OracleEstimate:
    """A Monte-Carlo value with its standard error (sample sigma / sqrt(n))"""
    value: float
    std_error: float
    n_samples: int
    seed: Seed | None = None

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError('standard error cannot be negative')

    def within(self, reference: float, n_sigma: float = 4.0,
               atol: float = 0.0) -> bool:
        """Whether ``reference`` lies in the n-sigma band (plus ``atol``)"""
        return abs(self.value - reference) <= n_sigma * self.std_error + atol


#
# Block-parallel execution
#
def run_blocks(
        func: Callable[[int, int, int], T],
        n_items: int,
        block_size: int,
        threads: int = 1,
) -> list[T]:
    """Call ``func(block_index, start, stop)`` for consecutive blocks

    Results come back in block order regardless of ``threads``, so any
    reduction over them is reproducible across worker counts.
    """
    if block_size < 1:
        raise ValueError('block size must be positive')
    bounds = [
        (i, start, min(start + block_size, n_items))
        for i, start in enumerate(range(0, n_items, block_size))
    ]
    if threads <= 1 or len(bounds) <= 1:
        return [func(*b) for b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: func(*b), bounds))


def combine_moments(
        parts: Sequence[tuple[int, float, float]],
) -> tuple[int, float, float]:
    """Merge per-block (count, mean, sum of squared deviations) triples

    The merge runs in the given order (pairwise update of Chan et al.).
    """
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        delta = mb - mean
        tot = n + nb
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def block_moments(values: np.ndarray) -> tuple[int, float, float]:
    mean = float(np.mean(values))
    return len(values), mean, float(np.sum((values - mean) ** 2))


def estimate_from_moments(
        parts: Sequence[tuple[int, float, float]],
        seed: Seed | None = None,
) -> OracleEstimate:
    n, mean, m2 = combine_moments(parts)
    std = np.sqrt(m2 / (n - 1)) if n > 1 else 0.0
    return OracleEstimate(
        value=float(mean),
        std_error=float(std / np.sqrt(n)) if n else 0.0,
        n_samples=n,
        seed=seed,
    )


#
# Special functions
#
def _check_positive(x, name: str = 'x'):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f'{name} must be positive and finite, got {x!r}')
    return arr


def _as_output(arr: np.ndarray, like) -> float | np.ndarray:
    return float(arr) if np.ndim(like) == 0 else arr


def log_gamma_fn(x):
    """log Gamma(x) for x > 0"""
    arr = _check_positive(x)
    return _as_output(special.gammaln(arr), x)


def gamma_fn(x):
    """Euler gamma function for x > 0

    Arguments above ``GAMMA_LOG_THRESHOLD`` are evaluated as
    exp(log Gamma(x)).
    """
    arr = _check_positive(x)
    out = np.where(
        arr > GAMMA_LOG_THRESHOLD,
        np.exp(special.gammaln(np.maximum(arr, GAMMA_LOG_THRESHOLD))),
        special.gamma(np.minimum(arr, GAMMA_LOG_THRESHOLD)),
    )
    if np.any(np.isinf(out)):
        raise OverflowError(f'Gamma({x!r}) overflows a double')
    return _as_output(out, x)


def gamma_ratio(a, b):
    """Gamma(a) / Gamma(b), computed in log space"""
    return np.exp(log_gamma_fn(a) - log_gamma_fn(b))


def half_shift_gamma_ratios(offset: float, count: int) -> np.ndarray:
    """R_j = Gamma(j + offset + 1/2) / Gamma(j + offset) for j < count

    Only R_0 involves gamma functions, all further terms follow from the
    recurrence R_{j+1} = R_j (j + offset + 1/2) / (j + offset), which stays
    finite for any j and offset.
    """
    if offset <= 0:
        raise DomainError('offset must be positive')
    j = np.arange(count - 1, dtype=float)
    steps = (j + offset + 0.5) / (j + offset)
    return gamma_ratio(offset + 0.5, offset) * np.concatenate(
        [[1.0], np.cumprod(steps)])


def _half_integer_order(nu: float) -> int | None:
    m = nu - 0.5
    if m >= 0 and float(m).is_integer():
        return int(m)
    return None


def bessel_k_scaled(nu: float, x):
    """exp(x) K_nu(x), the scaling that keeps large arguments representable"""
    if nu < 0:
        nu = -nu
    arr = _check_positive(x)
    m = _half_integer_order(nu)
    if m is None:
        out = special.kve(nu, arr)
    else:
        # K_{m+1/2}(x) = sqrt(pi/(2x)) e^-x sum_k (m+k)!/(k!(m-k)!) (2x)^-k
        k = np.arange(m + 1)
        coef = np.exp(
            special.gammaln(m + k + 1) - special.gammaln(k + 1)
            - special.gammaln(m - k + 1))
        inv = 1.0 / (2.0 * arr[..., None])
        out = np.sqrt(np.pi / (2.0 * arr)) * np.sum(coef * inv ** k, axis=-1)
    if np.any(np.isinf(out)):
        raise OverflowError(
            f'K_{nu}(x) overflows for x={x!r} (below the underflow threshold)')
    return _as_output(out, x)


def bessel_k(nu: float, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0"""
    return _as_output(
        np.asarray(bessel_k_scaled(nu, x)) * np.exp(-np.asarray(x, float)), x)


def normal_cdf(x):
    return _as_output(special.ndtr(np.asarray(x, dtype=float)), x)


def normal_pdf(x):
    arr = np.asarray(x, dtype=float)
    return _as_output(np.exp(-0.5 * arr * arr) / np.sqrt(2.0 * np.pi), x)


#
# Quadrature
#
def _laguerre_scaled(n: int, alpha: float, x: np.ndarray):
    """L_n and L_(n-1) (generalized Laguerre) at ``x`` as (p, q, log_scale)

    The polynomials are p and q times exp(log_scale). Rescaling keeps the
    three-term recurrence finite at the large nodes of high orders.
    """
    q = np.ones_like(x)
    p = 1.0 + alpha - x
    log_scale = np.zeros_like(x)
    for k in range(1, n):
        q, p = p, ((2 * k + 1 + alpha - x) * p - (k + alpha) * q) / (k + 1)
        big = np.maximum(np.abs(p), np.abs(q))
        over = big > 1e100
        if np.any(over):
            p[over] /= big[over]
            q[over] /= big[over]
            log_scale[over] += np.log(big[over])
    return p, q, log_scale


def _gauss_laguerre(order: int, alpha: float):
    if order == 1:
        return np.array([1.0 + alpha]), np.array([special.gamma(alpha + 1)])
    # nodes are the eigenvalues of the Jacobi matrix
    k = np.arange(order, dtype=float)
    x = linalg.eigh_tridiagonal(
        2 * k + 1 + alpha, np.sqrt(k[1:] * (k[1:] + alpha)),
        eigvals_only=True)
    # one Newton step, x L_n' = n L_n - (n + alpha) L_(n-1)
    p, q, _ = _laguerre_scaled(order, alpha, x)
    x = x - x * p / (order * p - (order + alpha) * q)
    # w_i ~ x_i / L_(n-1)(x_i)^2, normalized in log space: the weights of
    # the largest nodes underflow to 0
    _, q, log_scale = _laguerre_scaled(order, alpha, x)
    log_w = np.log(x) - 2 * (np.log(np.abs(q)) + log_scale)
    log_w += special.gammaln(alpha + 1) - special.logsumexp(log_w)
    return x, np.exp(log_w)


def _gauss_rule(kind: QuadratureKind, order: int, alpha: float):
    if kind == QuadratureKind.GAUSS_LAGUERRE:
        return _gauss_laguerre(order, alpha)
    if kind == QuadratureKind.GAUSS_HERMITE:
        x, w = special.roots_hermite(order)
    else:
        x, w = special.roots_legendre(order)
    return np.array(x, dtype=float), np.array(w, dtype=float)


def weight_moment(kind: QuadratureKind, k: int, alpha: float = 0.0) -> float:
    """Integral of x^k against the weight function of ``kind``"""
    if kind == QuadratureKind.GAUSS_HERMITE:
        return 0.0 if k % 2 else float(special.gamma((k + 1) / 2))
    if kind == QuadratureKind.GAUSS_LAGUERRE:
        return float(special.gamma(k + alpha + 1))
    return 0.0 if k % 2 else 2.0 / (k + 1)


@lru_cache(maxsize=None)
def make_quadrature(
        kind: QuadratureKind | str,
        order: int,
        verify: bool = False,
        alpha: float = 0.0,
) -> QuadratureRule:
    """Gauss quadrature rule with ``order`` nodes

    Laguerre rules integrate against x^alpha exp(-x), alpha > -1. At high
    orders the weights of the outermost Hermite and Laguerre nodes
    underflow to 0 and are kept as such.

    With ``verify``, monomials up to the degree of exactness (capped at 24
    to stay clear of overflow) are integrated and compared against the
    exact moments of the weight function to 1e-10.
    """
    kind = QuadratureKind(kind)
    alpha = float(alpha)
    if not 1 <= order <= MAX_QUADRATURE_ORDER:
        raise DomainError(
            f'unsupported quadrature order {order} '
            f'(must be within 1..{MAX_QUADRATURE_ORDER})')
    if alpha and kind != QuadratureKind.GAUSS_LAGUERRE:
        raise DomainError('only Gauss-Laguerre rules take an exponent alpha')
    if not (np.isfinite(alpha) and alpha > -1):
        raise DomainError(f'alpha must be > -1, got {alpha}')
    nodes, weights = _gauss_rule(kind, order, alpha)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    rule = QuadratureRule(kind=kind, nodes=nodes, weights=weights,
                          alpha=alpha)
    if verify:
        for k in range(min(rule.degree, 24) + 1):
            got = rule.integrate(lambda x: x ** k)
            want = weight_moment(kind, k, alpha)
            if abs(got - want) > 1e-10 * max(1.0, abs(want)):
                raise NumericalError(
                    f'{kind.value} rule of order {order} fails on x^{k}: '
                    f'{got!r} != {want!r}')
    return rule


#
# Sampling
#
def sample_sphere_array(n_dim: int, count: int, seed: Seed,
                        block: int = 0) -> np.ndarray:
    """``count`` x ``n_dim`` matrix of uniform directions on S^{N-1}

    Normalized i.i.d. standard normals; an all-zero draw is redrawn.
    """
    if n_dim < 1:
        raise DomainError('dimension must be at least 1')
    rng = seed.generator(block)
    g = rng.standard_normal((count, n_dim))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        g[bad] = rng.standard_normal((int(bad.sum()), n_dim))
        norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


def sample_sphere(n_dim: int, count: int, seed: Seed) -> list[Direction]:
    return [Direction(theta) for theta in sample_sphere_array(
        n_dim, count, seed)]


def sample_normal_cloud(n_dim: int, count: int, seed: Seed) -> PointCloud:
    if n_dim < 1 or count < 0:
        raise DomainError('dimension must be positive, count nonnegative')
    return PointCloud(seed.generator().standard_normal((count, n_dim)))


def sphere_abs_moment(n_dim: int) -> float:
    """E|theta_1| for theta uniform on S^{N-1}"""
    return float(gamma_ratio(n_dim / 2, (n_dim + 1) / 2) / SQRTPI)


def normal_chi_mean(n_dim: int) -> float:
    """E||Z|| for Z ~ N(0, I_N)"""
    return float(SQRT2 * gamma_ratio((n_dim + 1) / 2, n_dim / 2))
