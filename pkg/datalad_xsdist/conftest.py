# we are not using datalad's directly, because we are practically
# requiring whatever setup datalad_next prefers, because we employ
# its tooling
from datalad_next.conftest import setup_package

from datalad_xsdist.tests.fixtures import (
    cloud_files,
    eight_gaussians_data,
    random_clouds,
    seed,
    trained_vaes,
)
