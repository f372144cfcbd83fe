import numpy as np
import pytest

from ..core import (
    DimensionMismatchError,
    DomainError,
    PointCloud,
    Seed,
    sphere_abs_moment,
)
from ..energy import (
    XiEvaluator,
    generic_xs_distance_sq,
    normal_distance_mean,
    xi,
    xi_derivative,
    xs_energy_distance_sq,
)
from ..oracle import (
    exact_w2_sq_small,
    rigid_family,
    rigid_target,
    finite_diff_check,
    geodesic_identity_residual,
    mc_dirac_to_normal,
    mc_sliced_distance_sq,
    scan_rigid,
    xs_energy_total,
)
from ..sobolev_hs import (
    HsKernel,
    HsParams,
)


@pytest.mark.parametrize("n_dim", [1, 8, 64])
@pytest.mark.parametrize("a", [0.0, 0.5, 1.0, 3.0, 10.0])
def test_dirac_to_normal(n_dim, a, seed):
    x = np.zeros(n_dim)
    x[0] = a
    est = mc_dirac_to_normal(x, 2 * 10 ** 5, seed)
    assert est.n_samples == 2 * 10 ** 5
    assert est.within(normal_distance_mean(a, n_dim))


def test_dirac_to_normal_threads(seed):
    one = mc_dirac_to_normal([1.0, 2.0], 5000, seed)
    four = mc_dirac_to_normal([1.0, 2.0], 5000, seed, threads=4)
    assert one.value == four.value


def test_sliced_single_diracs(seed):
    est = mc_sliced_distance_sq(
        PointCloud([[1.0, 0.0]]), PointCloud([[0.0, 0.0]]),
        np.abs, 10 ** 5, seed)
    assert est.within(2 / np.pi)
    # without noise the band is the atol alone
    same = mc_sliced_distance_sq(
        PointCloud([[1.0, 0.0]]), PointCloud([[1.0, 0.0]]),
        np.abs, 100, seed)
    assert same.value == 0.0


def test_sliced_matches_energy(random_clouds, seed):
    a, b = random_clouds
    est = mc_sliced_distance_sq(a, b, np.abs, 10 ** 5, seed)
    ref = sphere_abs_moment(4) * xs_energy_distance_sq(a, b).total
    assert est.within(ref)
    zero = mc_sliced_distance_sq(a, a, np.abs, 1000, seed)
    assert zero.value == 0.0
    with pytest.raises(DimensionMismatchError):
        mc_sliced_distance_sq(a, PointCloud([[0.0, 0.0]]), np.abs, 10, seed)


def test_exact_w2_rigid_family():
    t = np.linspace(-1, 1, 101)
    w2, xs = scan_rigid(t)
    np.testing.assert_allclose(
        w2, 4 + np.minimum((1 - t) ** 2, (1 + t) ** 2), atol=1e-12)
    # W2 has a local maximum in the middle, the energy scan is convex
    assert w2[50] > w2[49] and w2[50] > w2[51]
    assert np.all(np.diff(xs, 2) >= -1e-10)
    assert np.argmin(xs) == 50
    assert xs[0] == pytest.approx(xs[-1], rel=1e-12)


def test_exact_w2_small_clouds():
    a = PointCloud([[0.0], [1.0], [5.0]])
    b = PointCloud([[5.0], [0.0], [1.0]])
    assert exact_w2_sq_small(a, b) == 0.0
    assert exact_w2_sq_small(a, PointCloud([[1.0], [2.0], [6.0]])) == \
        pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DomainError):
        exact_w2_sq_small(a, PointCloud([[0.0], [1.0]]))
    with pytest.raises(DomainError):
        exact_w2_sq_small(PointCloud(np.zeros((9, 1))),
                          PointCloud(np.zeros((9, 1))))
    with pytest.raises(DomainError):
        exact_w2_sq_small(
            PointCloud([[0.0], [1.0]], weights=[0.25, 0.75]),
            PointCloud([[0.0], [1.0]]))
    with pytest.raises(DimensionMismatchError):
        exact_w2_sq_small(a, PointCloud(np.zeros((3, 2))))


def _weighted_cloud(rng, count, dim):
    w = rng.uniform(0.1, 1.0, count)
    return PointCloud(rng.standard_normal((count, dim)), weights=w / w.sum())


@pytest.mark.parametrize("n_dim", [1, 3])
def test_geodesic_identity_energy(n_dim):
    rng = Seed(17 + n_dim).generator()
    t_grid = np.linspace(0, 1, 11)
    for _ in range(50):
        mu0, mu1, nu = (_weighted_cloud(rng, k, n_dim)
                        for k in rng.integers(1, 9, 3))
        res = geodesic_identity_residual(mu0, mu1, nu, t_grid)
        assert res[0] == 0.0 and res[-1] == 0.0
        assert np.max(np.abs(res)) <= 1e-10


def test_geodesic_identity_hs():
    rng = Seed(18).generator()
    mu0, mu1, nu = (_weighted_cloud(rng, k, 2) for k in (3, 2, 3))
    kernel = HsKernel(HsParams(1.5, 2))
    res = geodesic_identity_residual(
        mu0, mu1, nu, [0.0, 0.3, 0.7, 1.0],
        distance_sq=lambda x, y: generic_xs_distance_sq(kernel, x, y).total)
    assert np.max(np.abs(res)) <= 1e-10


def test_geodesic_identity_fails_for_w2():
    nu = rigid_target()
    res = geodesic_identity_residual(
        rigid_family(-1.0), rigid_family(1.0), nu, [0.0, 0.5, 1.0],
        distance_sq=exact_w2_sq_small,
        path=lambda t: rigid_family(2 * t - 1))
    np.testing.assert_allclose(res, [0.0, 2.0, 0.0], atol=1e-12)


def test_geodesic_identity_dimension_check():
    with pytest.raises(DimensionMismatchError):
        geodesic_identity_residual(
            PointCloud([[0.0]]), PointCloud([[1.0]]),
            PointCloud([[0.0, 1.0]]), [0.5])


def test_xs_energy_total():
    assert xs_energy_total(PointCloud([-1.0, 1.0]), PointCloud([0.0])) == \
        pytest.approx(0.5)


def test_finite_diff_check():
    rng = Seed(2).generator()
    point = rng.standard_normal(6)
    c = rng.standard_normal(6)
    assert finite_diff_check(
        lambda x: 0.5 * x @ x + c @ x, lambda x: x + c, point) <= 1e-8
    # a wrong gradient is caught
    assert finite_diff_check(
        lambda x: 0.5 * x @ x, lambda x: 2 * x, point) > 0.1
    with pytest.raises(DomainError):
        finite_diff_check(lambda x: 0.0, lambda x: x, point, h=0.0)
    assert finite_diff_check(lambda x: 0.0, lambda x: x, np.empty(0)) == 0.0


def test_finite_diff_surrogate_radius():
    ev = XiEvaluator(8)
    point = np.full(8, 0.7 / np.sqrt(8))

    def f(x):
        return xi(np.linalg.norm(x), ev)

    def grad(x):
        r = np.linalg.norm(x)
        return xi_derivative(r, ev) * x / r

    assert finite_diff_check(f, grad, point) <= 1e-8
