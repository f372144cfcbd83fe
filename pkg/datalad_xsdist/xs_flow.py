"""Particle flow towards the standard normal"""

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
    EnsureBool,
    EnsureChoice,
    EnsureFloat,
    EnsureInt,
    EnsurePath,
    EnsureRange,
)

from datalad_xsdist.core import Seed
from datalad_xsdist.energy import (
    XiEvaluator,
    XiMethod,
)
from datalad_xsdist.train import (
    FlowConfig,
    cluster_cloud,
    particle_flow,
)
from datalad_xsdist.utils import (
    csv_command_results,
    output_param,
    render_csv,
    render_csv_result,
    resolve_threads,
    seed_param,
    threads_param,
    write_cloud,
)


lgr = logging.getLogger('datalad.xsdist.xs_flow')

INIT_CHOICES = ('normal', 'cluster')


@build_doc
class XsFlow(ValidatedInterface):
    """Move a cloud of particles towards N(0, I)

    Particles descend the squared energy X-ray distance to the standard
    normal directly, without any network. The report lists the latent
    loss after every step; the final cloud can be written with
    --particles-out.

    By default a step that raises the loss is rejected and the step size
    halved. With --fixed-step every step is taken, and the run fails once
    the loss rose for 10 consecutive steps.
    """

    _examples_ = [
        dict(
            text="Flow a tight cluster of 256 particles in 8 dimensions",
            code_py="xs_flow(init='cluster', steps=2000, seed=1)",
            code_cmd="datalad xs-flow --init cluster --steps 2000 --seed 1",
        ),
    ]

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            particles=EnsureInt() & EnsureRange(min=1),
            dim=EnsureInt() & EnsureRange(min=1),
            step_size=EnsureFloat() & EnsureRange(min=0.0),
            steps=EnsureInt() & EnsureRange(min=0),
            seed=EnsureInt() & EnsureRange(min=0),
            init=EnsureChoice(*INIT_CHOICES),
            method=EnsureChoice(*(m.value for m in XiMethod)),
            fixed_step=EnsureBool(),
            particles_out=EnsurePath(),
            output=EnsurePath(),
            threads=EnsureInt() & EnsureRange(min=1),
        ),
    )

    _params_ = dict(
        particles=Parameter(
            args=('--particles',),
            metavar='K',
            doc="""number of particles"""),
        dim=Parameter(
            args=('--dim',),
            metavar='N',
            doc="""dimension"""),
        step_size=Parameter(
            args=('--step-size',),
            metavar='STEP',
            doc="""per-particle step size"""),
        steps=Parameter(
            args=('--steps',),
            metavar='COUNT',
            doc="""number of gradient steps"""),
        seed=seed_param,
        init=Parameter(
            args=('--init',),
            choices=INIT_CHOICES,
            doc="""initial cloud: a normal sample or a tight cluster at
            distance 5 from the origin"""),
        method=Parameter(
            args=('--method',),
            choices=tuple(m.value for m in XiMethod),
            doc="""evaluator of the Dirac-to-normal distance"""),
        fixed_step=Parameter(
            args=('--fixed-step',),
            action='store_true',
            doc="""never reduce the step size"""),
        particles_out=Parameter(
            args=('--particles-out',),
            metavar='PATH',
            doc="""file to write the final particles to"""),
        output=output_param,
        threads=threads_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            *,
            particles: int = 256,
            dim: int = 8,
            step_size: float = 0.1,
            steps: int = 500,
            seed: int | None = None,
            init: str = 'normal',
            method: str = 'surrogate',
            fixed_step: bool = False,
            particles_out: Path | None = None,
            output: Path | None = None,
            threads: int | None = None,
    ):
        config = dict(
            command='flow',
            particles=particles,
            dim=dim,
            step_size=step_size,
            steps=steps,
            seed=seed,
            init=init,
            method=method,
            adaptive=not fixed_step,
            threads=resolve_threads(threads),
        )

        def compute():
            if seed is None:
                raise ValueError('--seed is required for particle flows')
            rng_seed = Seed(seed)
            cfg = FlowConfig(
                n_particles=particles,
                n_dim=dim,
                step_size=step_size,
                n_steps=steps,
                evaluator=XiEvaluator(dim, method=method),
                seed=rng_seed,
                adaptive=not fixed_step,
            )
            start = cluster_cloud(dim, particles, rng_seed) \
                if init == 'cluster' else None
            cloud, trajectory = particle_flow(cfg, start)
            if particles_out:
                write_cloud(cloud, particles_out)
            radius = float(np.linalg.norm(cloud.points, axis=1).mean())
            lgr.info('Flow finished with latent loss %g, mean radius %g',
                     trajectory[-1], radius)
            return render_csv(
                ('step', 'latent_loss'), enumerate(trajectory)), dict(
                final_loss=float(trajectory[-1]), mean_radius=radius)

        yield from csv_command_results(
            'xs_flow', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)
