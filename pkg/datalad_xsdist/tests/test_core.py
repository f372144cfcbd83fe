import math

import numpy as np
import pytest
from scipy import (
    integrate,
    special,
)

from ..core import (
    CloudFormatError,
    Direction,
    DomainError,
    OracleEstimate,
    PointCloud,
    QuadratureKind,
    Seed,
    bessel_k,
    bessel_k_scaled,
    block_moments,
    combine_moments,
    estimate_from_moments,
    gamma_fn,
    gamma_ratio,
    half_shift_gamma_ratios,
    log_gamma_fn,
    make_quadrature,
    normal_cdf,
    normal_chi_mean,
    normal_pdf,
    run_blocks,
    sample_normal_cloud,
    sample_sphere,
    sample_sphere_array,
    sphere_abs_moment,
)


@pytest.mark.parametrize("x, expected", [
    (4.0, 6.0),
    (0.5, 1.7724538509055159),
    (4.5, 11.631728396567448),
])
def test_gamma_known_values(x, expected):
    assert gamma_fn(x) == pytest.approx(expected, rel=1e-12)


def test_gamma_large_and_invalid():
    # log path above the threshold agrees with the direct evaluation
    assert gamma_fn(25.0) == pytest.approx(float(math.factorial(24)),
                                           rel=1e-12)
    assert log_gamma_fn(200.0) == pytest.approx(
        sum(np.log(np.arange(1, 200))), rel=1e-12)
    with pytest.raises(OverflowError):
        gamma_fn(200.0)
    for bad in (0.0, -1.5, np.inf):
        with pytest.raises(DomainError):
            gamma_fn(bad)
    assert gamma_ratio(300.5, 300.0) == pytest.approx(np.sqrt(300.0),
                                                      rel=1e-3)


def test_gamma_recurrence():
    x = Seed(7).generator().uniform(0.0, 20.0, 100)
    np.testing.assert_allclose(gamma_fn(x + 1), x * gamma_fn(x),
                               rtol=1e-12)


def test_half_shift_gamma_ratios():
    ratios = half_shift_gamma_ratios(4.0, 50)
    direct = [gamma_ratio(j + 4.5, j + 4.0) for j in range(50)]
    np.testing.assert_allclose(ratios, direct, rtol=1e-12)
    with pytest.raises(DomainError):
        half_shift_gamma_ratios(0.0, 3)


@pytest.mark.parametrize("nu, x, expected", [
    (0.5, 1.0, 0.4610685044478946),
    (1.5, 1.0, 0.9221370088957892),
])
def test_bessel_half_integer(nu, x, expected):
    assert bessel_k(nu, x) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("m, poly", [
    (0, lambda x: 1.0),
    (1, lambda x: 1 + 1 / x),
    (2, lambda x: 1 + 3 / x + 3 / x ** 2),
])
def test_bessel_half_integer_closed_forms(m, poly):
    x = np.geomspace(0.1, 20.0, 60)
    expected = np.sqrt(np.pi / (2 * x)) * np.exp(-x) * poly(x)
    np.testing.assert_allclose(bessel_k(m + 0.5, x), expected, rtol=1e-11)


def test_bessel_fractional_order_against_integral():
    ref, _ = integrate.quad(
        lambda t: np.exp(-np.cosh(t)) * np.cosh(0.25 * t), 0, np.inf,
        epsabs=1e-13, epsrel=1e-12)
    assert bessel_k(0.25, 1.0) == pytest.approx(ref, abs=1e-10)


def test_bessel_scaled_matches_scipy():
    x = np.array([1e-3, 0.5, 3.0, 40.0, 600.0])
    for nu in (0.5, 1.5, 2.5, 0.7):
        scaled = bessel_k_scaled(nu, x)
        assert np.all(np.isfinite(scaled))
        np.testing.assert_allclose(scaled, special.kve(nu, x), rtol=1e-12)
    # order sign does not matter
    assert bessel_k(-1.5, 2.0) == bessel_k(1.5, 2.0)
    with pytest.raises(DomainError):
        bessel_k(0.5, 0.0)


def test_normal_functions():
    assert normal_cdf(0.0) == 0.5
    assert normal_pdf(0.0) == pytest.approx(0.3989422804014327, rel=1e-14)
    assert normal_cdf(1.0) == pytest.approx(0.8413447460685429, rel=1e-12)
    np.testing.assert_allclose(
        normal_cdf(np.array([-2.0, 2.0])).sum(), 1.0, rtol=1e-15)


def test_quadrature_classical_rules():
    h1 = make_quadrature(QuadratureKind.GAUSS_HERMITE, 1)
    np.testing.assert_allclose(h1.nodes, [0.0], atol=1e-15)
    np.testing.assert_allclose(h1.weights, [np.sqrt(np.pi)], rtol=1e-14)

    l2 = make_quadrature('legendre', 2)
    np.testing.assert_allclose(l2.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)],
                               rtol=1e-14)
    np.testing.assert_allclose(l2.weights, [1.0, 1.0], rtol=1e-14)

    g2 = make_quadrature('laguerre', 2)
    np.testing.assert_allclose(g2.nodes, [2 - np.sqrt(2), 2 + np.sqrt(2)],
                               rtol=1e-14)
    assert g2.degree == 3


@pytest.mark.parametrize("kind", list(QuadratureKind))
@pytest.mark.parametrize("order", [1, 5, 12, 40])
def test_quadrature_exactness(kind, order):
    rule = make_quadrature(kind, order, verify=True)
    assert rule.order == order
    assert np.all(rule.weights >= 0)


@pytest.mark.parametrize("kind, f, expected", [
    ('hermite', np.cos, np.sqrt(np.pi) * np.exp(-0.25)),
    ('laguerre', np.cos, 0.5),
    ('legendre', np.cos, 2 * np.sin(1.0)),
])
def test_quadrature_order_limits(kind, f, expected):
    with pytest.raises(DomainError):
        make_quadrature(kind, 0)
    with pytest.raises(DomainError):
        make_quadrature(kind, 513)
    # the largest order still yields a usable rule, the weights of the
    # outermost nodes may underflow to 0
    rule = make_quadrature(kind, 512)
    assert rule.order == 512
    assert np.all(np.isfinite(rule.nodes))
    assert np.all(np.isfinite(rule.weights))
    assert np.all(rule.weights >= 0)
    assert rule.integrate(f) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("order", [1, 2, 7, 30])
@pytest.mark.parametrize("alpha", [-0.5, 2.5])
def test_generalized_laguerre(order, alpha):
    rule = make_quadrature('laguerre', order, verify=True, alpha=alpha)
    assert rule.alpha == alpha
    # int x^alpha exp(-x) dx = Gamma(alpha + 1)
    assert rule.weights.sum() == pytest.approx(special.gamma(alpha + 1),
                                               rel=1e-12)
    with pytest.raises(DomainError):
        make_quadrature('hermite', order, alpha=alpha)
    with pytest.raises(DomainError):
        make_quadrature('laguerre', order, alpha=-1.0)


def test_seed_streams():
    a = Seed(5).generator().standard_normal(4)
    b = Seed(5).generator().standard_normal(4)
    c = Seed(5).stream(1).generator().standard_normal(4)
    d = Seed(5).generator(block=1).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)
    with pytest.raises(DomainError):
        Seed(-1)


def test_sample_sphere(seed):
    dirs = sample_sphere_array(1, 50, seed)
    assert set(np.unique(dirs)) <= {-1.0, 1.0}
    many = sample_sphere_array(2, 10 ** 5, seed)
    assert abs(np.abs(many[:, 0]).mean() - 2 / np.pi) < 0.005
    eight = sample_sphere_array(8, 10 ** 5, seed)
    np.testing.assert_allclose(np.linalg.norm(eight, axis=1), 1.0,
                               atol=1e-12)
    assert all(isinstance(d, Direction) for d in sample_sphere(3, 5, seed))
    with pytest.raises(DomainError):
        Direction(np.array([1.0, 1.0]))


@pytest.mark.parametrize("n_dim", [2, 3, 8])
def test_sample_sphere_second_moment(n_dim, seed):
    dirs = sample_sphere_array(n_dim, 10 ** 5, seed)
    moment = dirs.T @ dirs / len(dirs)
    assert np.max(np.abs(moment - np.eye(n_dim) / n_dim)) <= 0.01


def test_sample_normal_cloud(seed):
    one = sample_normal_cloud(3, 1, seed)
    np.testing.assert_array_equal(one.points,
                                  sample_normal_cloud(3, 1, seed).points)
    cloud = sample_normal_cloud(8, 2 * 10 ** 5, seed)
    assert np.linalg.norm(cloud.points, axis=1).mean() == pytest.approx(
        2.7416, abs=0.01)
    line = sample_normal_cloud(1, 2 * 10 ** 5, seed.stream(1))
    assert np.abs(line.points).mean() == pytest.approx(0.7979, abs=0.005)
    assert sample_normal_cloud(2, 0, seed).count == 0


def test_sphere_and_chi_moments():
    assert sphere_abs_moment(1) == pytest.approx(1.0, rel=1e-14)
    assert sphere_abs_moment(2) == pytest.approx(2 / np.pi, rel=1e-14)
    assert sphere_abs_moment(3) == pytest.approx(0.5, rel=1e-14)
    assert normal_chi_mean(1) == pytest.approx(np.sqrt(2 / np.pi), rel=1e-14)
    assert normal_chi_mean(8) == pytest.approx(2.7416, abs=1e-4)


def test_point_cloud_validation():
    line = PointCloud([0.0, 1.0, 2.0])
    assert (line.count, line.dim) == (3, 1)
    np.testing.assert_allclose(line.mass, 1 / 3)
    with pytest.raises(ValueError):
        line.points[0, 0] = 5.0
    with pytest.raises(CloudFormatError):
        PointCloud([[0.0, np.nan]])
    with pytest.raises(CloudFormatError):
        PointCloud([[0.0], [1.0]], weights=[0.3, 0.3])
    with pytest.raises(CloudFormatError):
        PointCloud([[0.0], [1.0]], weights=[1.5, -0.5])
    empty = PointCloud(np.empty((0, 3)))
    assert (empty.count, empty.dim) == (0, 3)


def test_point_cloud_mixture():
    a = PointCloud([[0.0, 0.0]])
    b = PointCloud([[1.0, 0.0], [0.0, 1.0]])
    mix = PointCloud.mixture(a, b, 0.25)
    np.testing.assert_allclose(mix.mass, [0.75, 0.125, 0.125])
    assert not mix.is_uniform
    with pytest.raises(DomainError):
        PointCloud.mixture(a, b, 1.5)


@pytest.mark.parametrize("threads", [1, 3])
def test_run_blocks_keeps_order(threads):
    res = run_blocks(lambda i, start, stop: (i, start, stop), 10, 3, threads)
    assert res == [(0, 0, 3), (1, 3, 6), (2, 6, 9), (3, 9, 10)]
    assert run_blocks(lambda *b: b, 0, 3, threads) == []


def test_moment_merging():
    values = Seed(9).generator().standard_normal(1000)
    parts = [block_moments(values[i:i + 128]) for i in range(0, 1000, 128)]
    n, mean, m2 = combine_moments(parts)
    assert n == 1000
    assert mean == pytest.approx(values.mean(), rel=1e-12)
    assert m2 / (n - 1) == pytest.approx(values.var(ddof=1), rel=1e-12)
    est = estimate_from_moments(parts)
    assert est.std_error == pytest.approx(
        values.std(ddof=1) / np.sqrt(1000), rel=1e-12)


def test_oracle_estimate_band():
    est = OracleEstimate(1.0, 0.1, 100)
    assert est.within(1.39)
    assert not est.within(1.41)
    assert est.within(1.5, atol=0.2)
    with pytest.raises(ValueError):
        OracleEstimate(1.0, -0.1, 100)
