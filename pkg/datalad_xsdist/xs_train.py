"""Train an XS-VAE and sample from it"""

from __future__ import annotations

__docformat__ = "numpy"

import logging
from pathlib import Path

from datalad_next.commands import (
    EnsureCommandParameterization,
    Parameter,
    ValidatedInterface,
    build_doc,
    eval_results,
)
from datalad_next.constraints import (
    EnsureChoice,
    EnsureFloat,
    EnsureInt,
    EnsurePath,
    EnsureRange,
    EnsureStr,
)

from datalad_xsdist.core import (
    PointCloud,
    Seed,
)
from datalad_xsdist.train import (
    Activation,
    AdamConfig,
    Architecture,
    Objective,
    eight_gaussians,
    generate,
    load_checkpoint,
    save_checkpoint,
    spherical_shell,
    two_moons,
    xsvae_train,
)
from datalad_xsdist.utils import (
    cloud_to_csv,
    csv_command_results,
    output_param,
    read_cloud,
    read_idx_images,
    render_csv,
    render_csv_result,
    seed_param,
)


lgr = logging.getLogger('datalad.xsdist.xs_train')

SYNTHETIC_DATASETS = ('8gaussians', 'moons', 'shell')
EPOCH_HEADER = ('step', 'loss_rec', 'loss_lat', 'loss_global')


def parse_hidden(spec: str) -> tuple[int, ...]:
    """Hidden layer sizes from a comma-separated string"""
    try:
        sizes = tuple(int(v) for v in spec.split(',') if v.strip())
    except ValueError:
        raise ValueError(f'invalid hidden layer sizes {spec!r}')
    if not sizes:
        raise ValueError('at least one hidden layer is required')
    return sizes


def load_dataset(name: str, samples: int, dim: int, seed: Seed
                 ) -> tuple[PointCloud, Activation]:
    """Training data and the output activation suited to it

    Besides the synthetic sets, ``name`` can be a point cloud CSV file or
    an IDX image file, whose pixels lie in [0, 1].
    """
    if name == '8gaussians':
        return eight_gaussians(samples, seed), Activation.IDENTITY
    if name == 'moons':
        return two_moons(samples, seed), Activation.IDENTITY
    if name == 'shell':
        return spherical_shell(dim, samples, seed), Activation.IDENTITY
    path = Path(name)
    if not path.exists():
        raise ValueError(
            f'unknown dataset {name!r}: neither one of '
            f'{", ".join(SYNTHETIC_DATASETS)} nor an existing file')
    if path.suffix == '.csv':
        return read_cloud(path), Activation.IDENTITY
    return read_idx_images(path, limit=samples), Activation.SIGMOID


@build_doc
class XsTrain(ValidatedInterface):
    """Train an XS-VAE on synthetic data or an image file

    The encoder and decoder are dense ReLU networks trained with Adam on
    the objective loss_rec + lambda * loss_lat, where loss_lat is the
    squared energy X-ray distance of each batch of codes to N(0, I). The
    objectives 'reconstruction' and 'latent' train one of the two terms
    only.

    The report lists reconstruction, latent and global loss on the
    training data before training and after every epoch.
    """

    _examples_ = [
        dict(
            text="Train on the 8-Gaussians ring and keep the weights",
            code_py="xs_train(dataset='8gaussians', epochs=200, seed=0, "
                    "checkpoint='vae.ckpt')",
            code_cmd="datalad xs-train --dataset 8gaussians --epochs 200 "
                     "--seed 0 --checkpoint vae.ckpt",
        ),
    ]

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            dataset=EnsureStr(),
            samples=EnsureInt() & EnsureRange(min=2),
            dim=EnsureInt() & EnsureRange(min=1),
            latent_dim=EnsureInt() & EnsureRange(min=1),
            hidden=EnsureStr(),
            epochs=EnsureInt() & EnsureRange(min=0),
            batch_size=EnsureInt() & EnsureRange(min=2),
            lam=EnsureFloat() & EnsureRange(min=0.0),
            lr=EnsureFloat() & EnsureRange(min=0.0),
            seed=EnsureInt() & EnsureRange(min=0),
            objective=EnsureChoice(*(o.value for o in Objective)),
            checkpoint=EnsurePath(),
            output=EnsurePath(),
        ),
    )

    _params_ = dict(
        dataset=Parameter(
            args=('--dataset',),
            metavar='NAME|PATH',
            doc="""'8gaussians', 'moons', 'shell', a point cloud CSV
            file or an IDX image file"""),
        samples=Parameter(
            args=('--samples',),
            metavar='COUNT',
            doc="""number of synthetic samples, or the maximum number of
            images read"""),
        dim=Parameter(
            args=('--dim',),
            metavar='N',
            doc="""dimension of the 'shell' dataset"""),
        latent_dim=Parameter(
            args=('--latent-dim',),
            metavar='N',
            doc="""dimension of the codes"""),
        hidden=Parameter(
            args=('--hidden',),
            metavar='SIZES',
            doc="""comma-separated hidden layer sizes of the encoder, the
            decoder mirrors them"""),
        epochs=Parameter(
            args=('--epochs',),
            metavar='COUNT',
            doc="""number of passes over the data"""),
        batch_size=Parameter(
            args=('--batch-size',),
            metavar='K',
            doc="""batch size"""),
        lam=Parameter(
            args=('--lam',),
            metavar='LAMBDA',
            doc="""weight of the latent loss"""),
        lr=Parameter(
            args=('--lr',),
            metavar='RATE',
            doc="""Adam learning rate"""),
        seed=seed_param,
        objective=Parameter(
            args=('--objective',),
            choices=tuple(o.value for o in Objective),
            doc="""which loss terms to train"""),
        checkpoint=Parameter(
            args=('--checkpoint',),
            metavar='PATH',
            doc="""file to save the trained weights to"""),
        output=output_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            *,
            dataset: str = '8gaussians',
            samples: int = 1024,
            dim: int = 2,
            latent_dim: int = 2,
            hidden: str = '64,64',
            epochs: int = 100,
            batch_size: int = 128,
            lam: float = 100.0,
            lr: float = 1e-3,
            seed: int | None = None,
            objective: str = 'full',
            checkpoint: Path | None = None,
            output: Path | None = None,
    ):
        config = dict(
            command='train',
            dataset=dataset,
            samples=samples,
            dim=dim,
            latent_dim=latent_dim,
            hidden=hidden,
            epochs=epochs,
            batch_size=batch_size,
            lam=lam,
            lr=lr,
            seed=seed,
            objective=objective,
        )

        def compute():
            if seed is None:
                raise ValueError('--seed is required for training')
            rng_seed = Seed(seed)
            data, activation = load_dataset(
                dataset, samples, dim, rng_seed.stream(2))
            arch = Architecture(
                data.dim, latent_dim, parse_hidden(hidden),
                output_activation=activation)
            config['architecture'] = arch.as_dict()
            state, logs = xsvae_train(
                data, arch,
                lam=lam,
                adam=AdamConfig(lr=lr),
                epochs=epochs,
                batch_size=batch_size,
                seed=rng_seed,
                objective=objective,
            )
            if checkpoint:
                save_checkpoint(state, checkpoint)
            lgr.info('Trained %i steps, final losses %s', state.step, logs[-1])
            return render_csv(EPOCH_HEADER, [log.as_row() for log in logs]), \
                dict(final=dict(zip(EPOCH_HEADER, logs[-1].as_row())))

        yield from csv_command_results(
            'xs_train', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)


@build_doc
class XsGenerate(ValidatedInterface):
    """Decode standard normal codes with a trained XS-VAE

    Writes the generated samples in the point cloud CSV format.
    """

    _validator_ = EnsureCommandParameterization(
        param_constraints=dict(
            checkpoint=EnsurePath(lexists=True),
            samples=EnsureInt() & EnsureRange(min=1),
            seed=EnsureInt() & EnsureRange(min=0),
            output=EnsurePath(),
        ),
    )

    _params_ = dict(
        checkpoint=Parameter(
            args=('checkpoint',),
            metavar='CHECKPOINT',
            doc="""weights saved by xs-train"""),
        samples=Parameter(
            args=('--samples',),
            metavar='COUNT',
            doc="""number of samples to generate"""),
        seed=seed_param,
        output=output_param,
    )

    @staticmethod
    @eval_results
    def __call__(
            checkpoint: Path,
            *,
            samples: int = 1000,
            seed: int | None = None,
            output: Path | None = None,
    ):
        config = dict(
            command='generate',
            checkpoint=checkpoint,
            samples=samples,
            seed=seed,
        )

        def compute():
            if seed is None:
                raise ValueError('--seed is required for generation')
            state = load_checkpoint(checkpoint)
            return cloud_to_csv(generate(state, samples, Seed(seed)))

        yield from csv_command_results(
            'xs_generate', config, compute, output=output, logger=lgr)

    custom_result_renderer = staticmethod(render_csv_result)
