import pytest

from datalad_xsdist.core import (
    PointCloud,
    Seed,
)
from datalad_xsdist.energy import XiEvaluator
from datalad_xsdist.train import (
    Architecture,
    eight_gaussians,
    xsvae_train,
)
from datalad_xsdist.utils import write_cloud

# std of the 8-Gaussians modes in the training data
EIGHT_GAUSSIANS_STD = 0.25


@pytest.fixture(autouse=False, scope="function")
def seed():
    return Seed(20231117)


@pytest.fixture(autouse=False, scope="function")
def random_clouds():
    """Two uniform 16-point clouds in 4 dimensions, the second shifted"""
    rng = Seed(42).generator()
    return (
        PointCloud(rng.standard_normal((16, 4))),
        PointCloud(rng.standard_normal((16, 4)) + 0.5),
    )


@pytest.fixture(autouse=False, scope="function")
def cloud_files(tmp_path):
    """CSV files of {-1, +1} and {0} on the line, and a 2-D cloud"""
    paths = dict(
        pair=tmp_path / 'pair.csv',
        origin=tmp_path / 'origin.csv',
        plane=tmp_path / 'plane.csv',
    )
    write_cloud(PointCloud([[-1.0], [1.0]]), paths['pair'])
    write_cloud(PointCloud([[0.0]]), paths['origin'])
    write_cloud(
        PointCloud(Seed(3).generator().standard_normal((5, 2))),
        paths['plane'])
    return paths


@pytest.fixture(autouse=False, scope="session")
def eight_gaussians_data():
    return eight_gaussians(1024, Seed(11), std=EIGHT_GAUSSIANS_STD)


@pytest.fixture(autouse=False, scope="session")
def trained_vaes(eight_gaussians_data):
    """XS-VAEs trained on the 8-Gaussians ring with each objective

    Maps objective name to (state, epoch logs). Latent losses are the
    exact squared distances of the codes to N(0, I). The entry
    'full-surrogate' is trained and logged with the quadratic surrogate
    of the latent loss.
    """
    arch = Architecture(2, 2, (64, 64))

    def train(objective, method):
        return xsvae_train(
            eight_gaussians_data,
            arch,
            lam=100.0,
            epochs=600,
            batch_size=128,
            seed=Seed(7),
            evaluator=XiEvaluator(2, method=method),
            objective=objective,
        )

    vaes = {
        objective: train(objective, 'poisson')
        for objective in ('full', 'reconstruction', 'latent')
    }
    vaes['full-surrogate'] = train('full', 'surrogate')
    return vaes
