import numpy as np
import pytest

from ..core import (
    DomainError,
    NonConvergenceError,
    Seed,
)
from ..energy import ENERGY_KERNEL
from ..sobolev_hs import (
    HsKernel,
    HsOrders,
    HsParams,
    KernelTable,
    RadialScheme,
    TABLE_RTOL,
    TableMethod,
    build_kernel_table,
    hs_dual_norm_sq_1d,
    hs_dual_norm_sq_1d_derivative,
    hs_dual_norm_sq_1d_quadrature,
    hs_kernel_charfn,
    hs_kernel_charfn_estimate,
    hs_kernel_derivative,
    hs_kernel_pu,
    hs_kernel_quadrature,
    hs_kernel_second_derivative_zero,
    parse_kernel,
    sample_V,
    table_grading,
)
from ..xs_dist import HS_TABLE_GRID


def test_params():
    p = HsParams(1.0, 3)
    assert p.bound == pytest.approx(2 * np.pi, rel=1e-14)
    assert HsParams(2.0).bound == pytest.approx(np.pi, rel=1e-14)
    assert p.nu == 0.5
    for bad in (0.5, 0.2, np.nan):
        with pytest.raises(DomainError):
            HsParams(bad)
    with pytest.raises(DomainError):
        HsParams(1.0, 0)


def test_dual_norm_closed_form():
    r = np.array([0.0, 1e-9, 0.3, 1.0, 4.0, 30.0])
    # s=1 is the Laplace kernel
    np.testing.assert_allclose(
        hs_dual_norm_sq_1d(r, 1.0), 2 * np.pi * -np.expm1(-r),
        rtol=1e-9, atol=1e-15)
    # s=2: pi (1 - (1 + r) exp(-r))
    np.testing.assert_allclose(
        hs_dual_norm_sq_1d(r[2:], 2.0),
        np.pi * (1 - (1 + r[2:]) * np.exp(-r[2:])), rtol=1e-9)
    assert hs_dual_norm_sq_1d(0.0, 1.3) == 0.0
    assert hs_dual_norm_sq_1d(500.0, 2.0) == pytest.approx(np.pi, rel=1e-12)
    with pytest.raises(DomainError):
        hs_dual_norm_sq_1d(-1.0, 2.0)


@pytest.mark.parametrize("s", [0.75, 1.0])
def test_dual_norm_small_radius_branch(s):
    # the leading term below the cutoff joins the Bessel form above it
    below = hs_dual_norm_sq_1d(0.99e-8, s)
    above = hs_dual_norm_sq_1d(1.01e-8, s)
    assert 0 < below < above
    assert above / below < 1.1


@pytest.mark.parametrize("s", [2.5, 3.0])
@pytest.mark.parametrize("r", [0.5, 2.0])
def test_dual_norm_fourier_integral(s, r):
    assert hs_dual_norm_sq_1d_quadrature(r, s) == pytest.approx(
        hs_dual_norm_sq_1d(r, s), rel=1e-5)
    with pytest.raises(DomainError):
        hs_dual_norm_sq_1d_quadrature(r, 1.0)


@pytest.mark.parametrize("s", [0.75, 1.0, 2.5])
def test_dual_norm_derivative(s):
    h = 1e-6
    for r in (0.2, 1.3, 6.0):
        fd = (hs_dual_norm_sq_1d(r + h, s)
              - hs_dual_norm_sq_1d(r - h, s)) / (2 * h)
        assert hs_dual_norm_sq_1d_derivative(r, s) == pytest.approx(
            fd, abs=1e-7)
    assert hs_dual_norm_sq_1d_derivative(0.0, 1.0) == pytest.approx(
        2 * np.pi, rel=1e-14)
    assert hs_dual_norm_sq_1d_derivative(0.0, 2.5) == 0.0


@pytest.mark.parametrize("n_dim, s", [(2, 1.0), (4, 2.0), (8, 1.5625)])
@pytest.mark.parametrize("a", np.geomspace(0.1, 20.0, 10).tolist())
def test_kernel_cross_validation(n_dim, s, a, seed):
    params = HsParams(s, n_dim)
    ref = hs_kernel_quadrature(a, params)
    assert 0 < ref < params.bound
    count = 2 * 10 ** 5
    charfn = hs_kernel_charfn_estimate(a, params, count, seed.stream(0))
    sphere = hs_kernel_pu(a, params, count, seed.stream(1))
    assert charfn.within(ref)
    assert sphere.within(ref)
    assert charfn.n_samples == sphere.n_samples == count


def test_kernel_one_dim_and_limits():
    one = HsParams(2.0, 1)
    assert hs_kernel_quadrature(0.7, one) == pytest.approx(
        hs_dual_norm_sq_1d(0.7, 2.0), rel=1e-14)
    assert hs_kernel_quadrature(100.0, one) == pytest.approx(np.pi, abs=1e-3)
    params = HsParams(1.5, 4)
    assert hs_kernel_quadrature(0.0, params) == 0.0
    # even in a
    assert hs_kernel_quadrature(-1.2, params) == \
        hs_kernel_quadrature(1.2, params)
    values = [hs_kernel_quadrature(a, params) for a in (0.5, 1.0, 5.0, 50.0)]
    assert np.all(np.diff(values) > 0)
    assert values[-1] < params.bound


def test_kernel_numerical_fourier_orders():
    params = HsParams(3.0, 4)
    orders = HsOrders(n_u=20, n_levels=60, n_xi=64)
    assert hs_kernel_quadrature(1.5, params, orders,
                                check_convergence=False) == pytest.approx(
        hs_kernel_quadrature(1.5, params), rel=1e-5)


@pytest.mark.parametrize("a", [0.5, 2.0, 5.0])
def test_kernel_normal_chi_scheme(a):
    params = HsParams(4.0, 8)
    orders = HsOrders(scheme=RadialScheme.NORMAL_CHI)
    assert orders.as_dict() == dict(
        n_y=128, n_z=128, n_xi=0, scheme='normal-chi')
    assert hs_kernel_quadrature(a, params, orders,
                                check_convergence=False) == pytest.approx(
        hs_kernel_quadrature(a, params), rel=1e-5)
    assert hs_kernel_derivative(a, params, orders,
                                check_convergence=False) == pytest.approx(
        hs_kernel_derivative(a, params), rel=1e-4)


def test_kernel_normal_chi_limits():
    orders = HsOrders(n_y=16, n_z=16, scheme='normal-chi')
    assert orders.scheme is RadialScheme.NORMAL_CHI
    assert hs_kernel_quadrature(0.7, HsParams(2.0, 1), orders) == \
        pytest.approx(hs_dual_norm_sq_1d(0.7, 2.0), rel=1e-14)
    # the kink of |r|^(2s-1) at the origin limits the rate for small s
    with pytest.raises(NonConvergenceError):
        hs_kernel_quadrature(1.0, HsParams(0.75, 2), orders)
    with pytest.raises(ValueError):
        HsOrders(scheme='spherical')


@pytest.mark.parametrize("n_dim, expected", [(1, np.pi), (8, np.pi / 8)])
def test_kernel_second_derivative_zero(n_dim, expected):
    params = HsParams(2.0, n_dim)
    assert hs_kernel_second_derivative_zero(params) == pytest.approx(
        expected, rel=1e-14)

    def d2(h):
        return 2 * hs_kernel_quadrature(h, params) / h ** 2

    # g has a cubic term at the origin, which one extrapolation step removes
    h = 1e-3
    assert 2 * d2(h / 2) - d2(h) == pytest.approx(expected, rel=1e-4)
    with pytest.raises(DomainError):
        hs_kernel_second_derivative_zero(HsParams(1.5, 2))


def test_kernel_derivative():
    params = HsParams(2.0, 4)
    h = 1e-5
    for a in (0.3, 1.7, 6.0):
        fd = (hs_kernel_quadrature(a + h, params)
              - hs_kernel_quadrature(a - h, params)) / (2 * h)
        assert hs_kernel_derivative(a, params) == pytest.approx(fd, abs=1e-7)
    assert hs_kernel_derivative(0.0, params) == 0.0
    assert hs_kernel_derivative(-1.7, params) == \
        -hs_kernel_derivative(1.7, params)
    assert abs(hs_kernel_derivative(100.0, HsParams(2.0, 8))) <= 1e-2


def test_sample_V(seed):
    params = HsParams(2.0, 3)
    V = sample_V(params, 10 ** 5, seed)
    assert V.shape == (10 ** 5,)
    # symmetric about zero
    assert abs(np.sign(V).mean()) < 0.02
    blocked = sample_V(params, 5000, seed, block_size=1000, threads=1)
    np.testing.assert_array_equal(
        blocked, sample_V(params, 5000, seed, block_size=1000, threads=3))
    assert sample_V(params, 0, seed).shape == (0,)
    assert hs_kernel_charfn(0.0, params, 100, seed, V=V) == 0.0
    assert hs_kernel_charfn(1.0, params, 100, seed, V=V) == pytest.approx(
        params.bound * (1 - np.cos(V).mean()), rel=1e-14)


def test_sample_V_one_dim(seed):
    # without the chi-square part V = sign(X_1) T / sqrt(2s - 1)
    V = sample_V(HsParams(1.5, 1), 10 ** 5, seed)
    assert np.all(np.isfinite(V))
    est = hs_kernel_charfn_estimate(1.0, HsParams(1.5, 1), 10 ** 5, seed)
    assert est.within(hs_dual_norm_sq_1d(1.0, 1.5))


def test_kernel_table():
    params = HsParams(2.5, 4)
    table = build_kernel_table(params, 5.0, 128, validate=False)
    assert table.method == TableMethod.QUADRATURE
    assert table.radius_max == 5.0
    assert table.name == 'hs:2.5'
    assert table.values[0] == 0.0
    assert np.all(np.diff(table.values) >= 0)
    assert table.values[-1] <= params.bound
    np.testing.assert_allclose(
        table.values[1:10],
        [hs_kernel_quadrature(a, params) for a in table.grid[1:10]],
        rtol=1e-12)
    mids = 0.5 * (table.grid[:-1] + table.grid[1:])
    np.testing.assert_allclose(
        table(mids[16::16]),
        [hs_kernel_quadrature(a, params) for a in mids[16::16]],
        rtol=1e-3, atol=1e-6)
    assert table(-2.0) == table(2.0)
    assert table.derivative(1.0) == pytest.approx(
        hs_kernel_derivative(1.0, params), rel=1e-2)
    with pytest.raises(DomainError):
        table(5.5)


@pytest.mark.parametrize("s", [0.75, 1.0, 2.0])
def test_kernel_table_distance_grid(s):
    # the table xs-dist builds for large clouds
    params = HsParams(s, 2)
    table = build_kernel_table(params, 10.0, HS_TABLE_GRID)
    assert table.meta["midpoint_error"] <= TABLE_RTOL
    assert table.meta["grading"] == table_grading(params)
    assert table.radius_max == 10.0
    for a in (1e-6, 1e-3, 0.1, 3.3):
        assert abs(table(a) - hs_kernel_quadrature(a, params)) \
            <= 2 * TABLE_RTOL * params.bound


def test_kernel_table_validation():
    with pytest.raises(NonConvergenceError):
        build_kernel_table(HsParams(1.5, 2), 40.0, 16)
    with pytest.raises(DomainError):
        build_kernel_table(HsParams(1.5, 2), 4.0, 8)
    with pytest.raises(DomainError):
        build_kernel_table(HsParams(1.5, 2), 0.0, 32)
    with pytest.raises(ValueError):
        KernelTable(HsParams(1.5), np.array([0.0, 1.0]),
                    np.array([0.0, 0.5, 1.0]), TableMethod.QUADRATURE)


def test_kernel_table_csv():
    params = HsParams(2.5, 4)
    table = build_kernel_table(params, 5.0, 32, validate=False)
    text = table.to_csv(comments=('# made for a test',))
    assert '#meta ' in text
    back = KernelTable.from_csv(text)
    assert back.params == params
    assert back.method == TableMethod.QUADRATURE
    assert back.meta['n_u'] == 20
    np.testing.assert_array_equal(back.grid, table.grid)
    np.testing.assert_array_equal(back.values, table.values)
    with pytest.raises(ValueError):
        KernelTable.from_csv('a,g\n0,0\n1,1\n')


def test_charfn_table(seed):
    params = HsParams(1.5, 2)
    table = build_kernel_table(params, 5.0, 32, 'charfn', count=10 ** 4,
                               seed=seed)
    assert table.method == TableMethod.CHARFN
    assert table.meta['count'] == 10 ** 4
    assert table.meta['seed'] == seed.value
    assert np.all(np.diff(table.values) >= 0)
    with pytest.raises(ValueError):
        build_kernel_table(params, 5.0, 32, 'charfn')


def test_hs_kernel():
    params = HsParams(2.0, 3)
    kernel = HsKernel(params)
    assert kernel.radius_max == np.inf
    assert kernel.bound == params.bound
    values = kernel(np.array([0.0, 1.0, 1.0, 3.0]))
    assert values.shape == (4,)
    assert values[0] == 0.0
    assert values[1] == values[2] == hs_kernel_quadrature(1.0, params)
    assert kernel(3.0) == values[3]
    table = build_kernel_table(params, 5.0, 64, validate=False)
    tabulated = HsKernel(params, table)
    assert tabulated.radius_max == 5.0
    assert tabulated(1.0) == pytest.approx(values[1], rel=1e-3)
    with pytest.raises(ValueError):
        HsKernel(HsParams(2.5, 3), table)


def test_parse_kernel():
    assert parse_kernel('energy', 3) is ENERGY_KERNEL
    kernel = parse_kernel('hs:1.5', 3)
    assert isinstance(kernel, HsKernel)
    assert kernel.params == HsParams(1.5, 3)
    assert kernel.name == 'hs:1.5'
    for bad in ('hs:', 'hs:abc', 'matern:1', 'HS:1'):
        with pytest.raises(ValueError):
            parse_kernel(bad, 2)
    with pytest.raises(DomainError):
        parse_kernel('hs:0.5', 2)


def test_seeds_reproduce_estimates():
    params = HsParams(1.0, 2)
    one = hs_kernel_pu(1.0, params, 10 ** 4, Seed(3))
    two = hs_kernel_pu(1.0, params, 10 ** 4, Seed(3), threads=2,
                       block_size=1000)
    three = hs_kernel_pu(1.0, params, 10 ** 4, Seed(3), block_size=1000)
    assert one.value == pytest.approx(two.value, rel=0.05)
    assert two.value == three.value
