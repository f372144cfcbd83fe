"""DataLad X-ray Sobolev distance extension"""

__docformat__ = 'restructuredtext'

import logging
lgr = logging.getLogger('datalad.xsdist')

# Defines a datalad command suite.
# This variable must be bound as a setuptools entrypoint
# to be found by datalad
command_suite = (
    # description of the command suite, displayed in cmdline help
    "DataLad X-ray Sobolev distance command suite",
    [
        # (module, command class, CLI name, Python API name)
        ('datalad_xsdist.xs_dist', 'XsDist', 'xs-dist'),
        ('datalad_xsdist.xs_dist', 'XsDistToNormal', 'xs-dist-to-normal',
         'xs_dist_to_normal'),
        ('datalad_xsdist.xs_kernel_table', 'XsKernelTable',
         'xs-kernel-table'),
        ('datalad_xsdist.xs_oracle', 'XsOracle', 'xs-oracle'),
        ('datalad_xsdist.xs_scan_geodesic', 'XsScanGeodesic',
         'xs-scan-geodesic'),
        ('datalad_xsdist.xs_flow', 'XsFlow', 'xs-flow'),
        ('datalad_xsdist.xs_train', 'XsTrain', 'xs-train'),
        ('datalad_xsdist.xs_train', 'XsGenerate', 'xs-generate',
         'xs_generate'),
    ]
)

from datalad.support.constraints import (
    EnsureFloat,
    EnsureInt,
)
from datalad.support.extensions import register_config
register_config(
    'datalad.xsdist.threads',
    'worker threads for X-ray distance computations',
    description="Maximum number of threads that block-parallel loops "
    "(pairwise sums, Monte-Carlo sampling, kernel tables) may use. "
    "Results do not depend on this setting.",
    type=EnsureInt(),
    default=1,
    dialog='question',
)
register_config(
    'datalad.xsdist.block-size',
    'block size of parallel X-ray distance loops',
    description="Rows per tile of pairwise sums and samples per random "
    "stream block of Monte-Carlo estimates. Monte-Carlo results are "
    "reproducible for a fixed block size.",
    type=EnsureInt(),
    default=1024,
    dialog='question',
)
register_config(
    'datalad.xsdist.xi-tolerance',
    'truncation tolerance of the Dirac-to-normal series',
    description="Series evaluating the squared X-ray distance of a Dirac "
    "to the standard normal stop once the remaining terms fall below this "
    "tolerance.",
    type=EnsureFloat(),
    default=1e-14,
    dialog='question',
)

from ._version import __version__
