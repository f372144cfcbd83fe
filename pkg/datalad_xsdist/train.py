"""Optimization against the standard normal: particle flow and XS-VAE

The XS-VAE is a dense encoder/decoder pair trained with the additive
objective

    loss_global = loss_rec + lambda * loss_lat

where ``loss_rec`` is the mean squared reconstruction error per sample and
``loss_lat`` the squared energy X-ray distance of the batch codes to
N(0, I) (``energy.latent_loss``). Backpropagation and Adam are written out
on numpy arrays.
"""

from __future__ import annotations

__docformat__ = "numpy"

import json
import logging
from dataclasses import (
    asdict,
    dataclass,
    field,
)
from enum import Enum
from pathlib import Path

import numpy as np

from datalad_xsdist.core import (
    DimensionMismatchError,
    DivergenceError,
    DomainError,
    PointCloud,
    Seed,
    sample_normal_cloud,
)
from datalad_xsdist.energy import (
    XiEvaluator,
    latent_loss,
    latent_loss_gradient,
)
from datalad_xsdist.utils import format_row

lgr = logging.getLogger('datalad.xsdist.train')

# a step may raise the loss by this much before it counts as an increase
FLOW_TOLERANCE = 1e-6
# consecutive increases after which a fixed-step flow is declared divergent
FLOW_MAX_RISES = 10
# per-particle step above which the flow is likely to oscillate
FLOW_STEP_WARNING = 0.5
# at most this many samples enter the per-epoch evaluation
EVAL_SAMPLES = 2048


#
# Particle flow
#
@dataclass(frozen=True)
class FlowConfig:
    """Gradient descent of particle positions on the latent loss

    Every particle moves by ``step_size`` times K times its partial
    derivative, i.e. along the first variation of the loss, which keeps
    the displacement per step independent of the number of particles.
    """
    n_particles: int
    n_dim: int
    step_size: float
    n_steps: int
    evaluator: XiEvaluator
    seed: Seed
    adaptive: bool = True

    def __post_init__(self):
        if self.n_particles < 1 or self.n_steps < 0:
            raise DomainError('need at least one particle and n_steps >= 0')
        if not self.step_size > 0:
            raise DomainError('step size must be positive')
        if self.evaluator.n_dim != self.n_dim:
            raise DimensionMismatchError(
                f'evaluator dimension {self.evaluator.n_dim} != {self.n_dim}')
        if self.step_size > FLOW_STEP_WARNING:
            lgr.warning(
                'Flow step size %g (gradient scale step_size*K = %g) exceeds '
                '%g, particles may oscillate',
                self.step_size, self.step_size * self.n_particles,
                FLOW_STEP_WARNING)


def cluster_cloud(n_dim: int, count: int, seed: Seed, distance: float = 5.0,
                  spread: float = 0.1) -> PointCloud:
    """Tight normal cluster centred at ``distance`` along the first axis"""
    center = np.zeros(n_dim)
    center[0] = distance
    return PointCloud(
        center + spread * seed.generator().standard_normal((count, n_dim)))


def particle_flow(
        cfg: FlowConfig,
        init: PointCloud | None = None,
) -> tuple[PointCloud, np.ndarray]:
    """Move particles towards N(0, I) by descending the latent loss

    Returns the final cloud and the loss after every step. In adaptive
    mode a step that raises the loss is rejected and the step size halved
    (it regrows by 10% per accepted step up to the configured value), which
    makes the trajectory nonincreasing.
    """
    ev = cfg.evaluator
    if init is None:
        init = sample_normal_cloud(cfg.n_dim, cfg.n_particles, cfg.seed)
    if init.dim != cfg.n_dim:
        raise DimensionMismatchError(
            f'initial cloud has dimension {init.dim}, expected {cfg.n_dim}')
    x = np.array(init.points)
    K = len(x)

    def loss(points):
        return latent_loss(PointCloud(points), ev).total

    current = loss(x)
    trajectory = [current]
    step = cfg.step_size
    rises = 0
    for i in range(cfg.n_steps):
        grad = latent_loss_gradient(PointCloud(x), ev)
        candidate = x - step * K * grad
        if not np.all(np.isfinite(candidate)):
            raise DivergenceError(f'particle positions diverged at step {i}')
        new = loss(candidate)
        if new > current + FLOW_TOLERANCE:
            if cfg.adaptive:
                step *= 0.5
                lgr.debug('Flow step %i rejected, step size now %g', i, step)
                trajectory.append(current)
                continue
            rises += 1
            if rises >= FLOW_MAX_RISES:
                raise DivergenceError(
                    f'latent loss increased {rises} consecutive steps '
                    f'(now {new!r}) at step {i}')
        else:
            rises = 0
            if cfg.adaptive:
                step = min(cfg.step_size, 1.1 * step)
        x, current = candidate, new
        trajectory.append(current)
        if i % 100 == 0:
            lgr.debug('Flow step %i: latent loss %g', i, current)
    if cfg.adaptive and step < cfg.step_size:
        lgr.info('Flow ended with reduced step size %g', step)
    return PointCloud(x), np.array(trajectory)


#
# Dense networks
#
class Activation(str, Enum):
    IDENTITY = 'identity'
    RELU = 'relu'
    SIGMOID = 'sigmoid'


def _activate(z: np.ndarray, act: Activation) -> np.ndarray:
    if act == Activation.RELU:
        return np.maximum(z, 0.0)
    if act == Activation.SIGMOID:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _activation_grad(z: np.ndarray, out: np.ndarray,
                     act: Activation) -> np.ndarray | float:
    if act == Activation.RELU:
        return (z > 0).astype(float)
    if act == Activation.SIGMOID:
        return out * (1.0 - out)
    return 1.0


@dataclass(frozen=True)
class Architecture:
    """Layer sizes of the encoder and decoder

    Hidden layers use ReLU, the code layer is linear and the output layer
    applies ``output_activation``. ``decoder_hidden`` defaults to the
    encoder's hidden sizes in reverse order.
    """
    input_dim: int
    latent_dim: int
    encoder_hidden: tuple[int, ...] = (64, 64)
    decoder_hidden: tuple[int, ...] | None = None
    output_activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        object.__setattr__(self, 'encoder_hidden', tuple(self.encoder_hidden))
        if self.decoder_hidden is None:
            object.__setattr__(
                self, 'decoder_hidden', self.encoder_hidden[::-1])
        else:
            object.__setattr__(
                self, 'decoder_hidden', tuple(self.decoder_hidden))
        object.__setattr__(
            self, 'output_activation', Activation(self.output_activation))
        if min((self.input_dim, self.latent_dim) + self.encoder_hidden
               + self.decoder_hidden) < 1:
            raise DomainError('layer sizes must be positive')

    @classmethod
    def for_images(cls, input_dim: int = 784, latent_dim: int = 8):
        """Three 200-unit ReLU layers per side and a sigmoid output"""
        return cls(input_dim, latent_dim, (200, 200, 200),
                   output_activation=Activation.SIGMOID)

    @property
    def encoder_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.encoder_hidden, self.latent_dim)

    @property
    def decoder_sizes(self) -> tuple[int, ...]:
        return (self.latent_dim, *self.decoder_hidden, self.input_dim)

    def as_dict(self) -> dict:
        d = asdict(self)
        d['output_activation'] = self.output_activation.value
        return d


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class TrainState:
    """Encoder/decoder parameters with their Adam moment buffers

    The training loop owns and updates a state in place, use
    ``snapshot()`` for an independent copy.
    """
    arch: Architecture
    encoder: list[DenseLayer]
    decoder: list[DenseLayer]
    lam: float = 100.0
    step: int = 0
    adam_m: list[np.ndarray] = field(default_factory=list)
    adam_v: list[np.ndarray] = field(default_factory=list)
    seed: Seed | None = None

    def __post_init__(self):
        for layers, sizes in ((self.encoder, self.arch.encoder_sizes),
                              (self.decoder, self.arch.decoder_sizes)):
            shapes = [lyr.weights.shape for lyr in layers]
            if shapes != list(zip(sizes[:-1], sizes[1:])) or any(
                    lyr.bias.shape != (lyr.weights.shape[1],)
                    for lyr in layers):
                raise DimensionMismatchError(
                    f'layer shapes {shapes} do not chain through {sizes}')
        if self.lam < 0:
            raise DomainError('lambda must be nonnegative')
        if not self.adam_m:
            self.adam_m = [np.zeros_like(p) for p in self.parameters()]
            self.adam_v = [np.zeros_like(p) for p in self.parameters()]

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases, encoder first, in layer order"""
        return [p for lyr in self.encoder + self.decoder
                for p in (lyr.weights, lyr.bias)]

    def snapshot(self) -> TrainState:
        def copy(layers):
            return [DenseLayer(lyr.weights.copy(), lyr.bias.copy())
                    for lyr in layers]
        return TrainState(
            self.arch, copy(self.encoder), copy(self.decoder), self.lam,
            self.step, [m.copy() for m in self.adam_m],
            [v.copy() for v in self.adam_v], self.seed)


def init_state(arch: Architecture, seed: Seed, lam: float = 100.0
               ) -> TrainState:
    """Weights uniform in +-1/sqrt(fan_in), zero biases"""
    rng = seed.generator()

    def layers(sizes):
        out = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            out.append(DenseLayer(
                rng.uniform(-bound, bound, (fan_in, fan_out)),
                np.zeros(fan_out)))
        return out

    return TrainState(arch, layers(arch.encoder_sizes),
                      layers(arch.decoder_sizes), lam=lam, seed=seed)


def _as_batch(batch: PointCloud | np.ndarray, dim: int) -> np.ndarray:
    x = batch.points if isinstance(batch, PointCloud) else np.asarray(
        batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != dim:
        raise DimensionMismatchError(
            f'batch of shape {x.shape} does not match input dimension {dim}')
    return x


def _forward(layers: list[DenseLayer], x: np.ndarray, final: Activation):
    acts, pre = [x], []
    for i, lyr in enumerate(layers):
        z = acts[-1] @ lyr.weights + lyr.bias
        act = final if i == len(layers) - 1 else Activation.RELU
        pre.append(z)
        acts.append(_activate(z, act))
    return acts, pre


def _backward(layers: list[DenseLayer], acts, pre, grad_out: np.ndarray,
              final: Activation):
    grads = []
    g = grad_out
    for i in reversed(range(len(layers))):
        act = final if i == len(layers) - 1 else Activation.RELU
        g = g * _activation_grad(pre[i], acts[i + 1], act)
        grads[:0] = [acts[i].T @ g, g.sum(axis=0)]
        g = g @ layers[i].weights.T
    return grads, g


def dense_forward(state: TrainState, batch) -> tuple[np.ndarray, np.ndarray]:
    """Codes and reconstructions of a batch"""
    x = _as_batch(batch, state.arch.input_dim)
    codes = _forward(state.encoder, x, Activation.IDENTITY)[0][-1]
    recon = _forward(
        state.decoder, codes, state.arch.output_activation)[0][-1]
    return codes, recon


def dense_backward(
        state: TrainState,
        batch,
        grad_codes: np.ndarray,
        grad_recon: np.ndarray,
) -> list[np.ndarray]:
    """Parameter gradients given the loss gradients with respect to the
    codes and the reconstructions, aligned with ``state.parameters()``"""
    x = _as_batch(batch, state.arch.input_dim)
    enc_acts, enc_pre = _forward(state.encoder, x, Activation.IDENTITY)
    codes = enc_acts[-1]
    dec_acts, dec_pre = _forward(
        state.decoder, codes, state.arch.output_activation)
    if grad_codes.shape != codes.shape or \
            grad_recon.shape != dec_acts[-1].shape:
        raise DimensionMismatchError('gradient shapes do not match outputs')
    dec_grads, through_decoder = _backward(
        state.decoder, dec_acts, dec_pre, grad_recon,
        state.arch.output_activation)
    enc_grads, _ = _backward(
        state.encoder, enc_acts, enc_pre, through_decoder + grad_codes,
        Activation.IDENTITY)
    return enc_grads + dec_grads


class Objective(str, Enum):
    FULL = 'full'
    RECONSTRUCTION = 'reconstruction'
    LATENT = 'latent'


def reconstruction_loss(recon: np.ndarray, x: np.ndarray) -> float:
    """(1/K) sum_k ||recon_k - x_k||^2"""
    return float(np.sum((recon - x) ** 2) / len(x))


def xsvae_loss_and_gradients(
        state: TrainState,
        batch,
        ev: XiEvaluator,
        objective: Objective = Objective.FULL,
) -> tuple[float, float, list[np.ndarray]]:
    """Reconstruction loss, latent loss and the gradients of the objective

    The full objective is loss_rec + lambda * loss_lat. The two ablations
    drop one of the terms; the latent-only objective is loss_lat.
    """
    x = _as_batch(batch, state.arch.input_dim)
    codes, recon = dense_forward(state, x)
    if not (np.all(np.isfinite(codes)) and np.all(np.isfinite(recon))):
        raise DivergenceError(
            f'network outputs became non-finite at step {state.step}')
    loss_rec = reconstruction_loss(recon, x)
    code_cloud = PointCloud(codes)
    loss_lat = latent_loss(code_cloud, ev).total
    objective = Objective(objective)

    grad_recon = 2.0 * (recon - x) / len(x)
    grad_codes = np.zeros_like(codes)
    if objective != Objective.RECONSTRUCTION:
        weight = 1.0 if objective == Objective.LATENT else state.lam
        if weight:
            grad_codes = weight * latent_loss_gradient(code_cloud, ev)
    if objective == Objective.LATENT:
        grad_recon = np.zeros_like(recon)
    grads = dense_backward(state, x, grad_codes, grad_recon)
    return loss_rec, loss_lat, grads


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_update(state: TrainState, grads: list[np.ndarray],
                cfg: AdamConfig = AdamConfig()) -> None:
    """One bias-corrected Adam step, in place"""
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for p, g, m, v in zip(state.parameters(), grads, state.adam_m,
                          state.adam_v):
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


@dataclass(frozen=True)
class EpochLog:
    step: int
    loss_rec: float
    loss_lat: float
    loss_global: float

    @classmethod
    def from_losses(cls, step: int, loss_rec: float, loss_lat: float,
                    lam: float) -> EpochLog:
        return cls(step, loss_rec, loss_lat, loss_rec + lam * loss_lat)

    def as_row(self) -> tuple:
        return (self.step, self.loss_rec, self.loss_lat, self.loss_global)


def evaluate(state: TrainState, data: PointCloud, ev: XiEvaluator
             ) -> tuple[float, float]:
    """Reconstruction and latent loss over (a prefix of) a dataset"""
    x = data.points[:EVAL_SAMPLES]
    codes, recon = dense_forward(state, x)
    return reconstruction_loss(recon, x), \
        latent_loss(PointCloud(codes), ev).total


def xsvae_train(
        dataset: PointCloud,
        arch: Architecture,
        *,
        lam: float = 100.0,
        adam: AdamConfig = AdamConfig(),
        epochs: int = 100,
        batch_size: int = 128,
        seed: Seed,
        evaluator: XiEvaluator | None = None,
        objective: Objective | str = Objective.FULL,
        state: TrainState | None = None,
) -> tuple[TrainState, list[EpochLog]]:
    """Train an XS-VAE, logging both losses before and after every epoch

    Batches are drawn without replacement from a fresh permutation each
    epoch; an incomplete last batch is dropped.
    """
    if dataset.dim != arch.input_dim:
        raise DimensionMismatchError(
            f'data dimension {dataset.dim} != input dimension '
            f'{arch.input_dim}')
    ev = evaluator or XiEvaluator(arch.latent_dim)
    if ev.n_dim != arch.latent_dim:
        raise DimensionMismatchError(
            f'evaluator dimension {ev.n_dim} != latent dimension '
            f'{arch.latent_dim}')
    if not 2 <= batch_size <= dataset.count:
        raise DomainError(
            f'batch size must be within 2..{dataset.count}, got {batch_size}')
    objective = Objective(objective)
    if state is None:
        state = init_state(arch, seed.stream(0), lam)
    rng = seed.stream(1).generator()
    data = dataset.points
    n_batches = len(data) // batch_size

    logs = [EpochLog.from_losses(state.step, *evaluate(state, dataset, ev),
                                 state.lam)]
    for epoch in range(epochs):
        order = rng.permutation(len(data))
        for b in range(n_batches):
            batch = data[order[b * batch_size:(b + 1) * batch_size]]
            loss_rec, loss_lat, grads = xsvae_loss_and_gradients(
                state, batch, ev, objective)
            if not (np.isfinite(loss_rec) and np.isfinite(loss_lat)
                    and all(np.all(np.isfinite(g)) for g in grads)):
                raise DivergenceError(
                    f'non-finite loss or gradient at step {state.step} '
                    f'(epoch {epoch}): loss_rec={loss_rec!r}, '
                    f'loss_lat={loss_lat!r}')
            adam_update(state, grads, adam)
        logs.append(EpochLog.from_losses(
            state.step, *evaluate(state, dataset, ev), state.lam))
        lgr.debug('Epoch %i: %s', epoch, logs[-1])
    return state, logs


def generate(state: TrainState, n_samples: int, seed: Seed) -> PointCloud:
    """Decode ``n_samples`` standard normal codes"""
    z = sample_normal_cloud(state.arch.latent_dim, n_samples, seed).points
    recon = _forward(state.decoder, z, state.arch.output_activation)[0][-1]
    return PointCloud(recon.reshape(n_samples, state.arch.input_dim))


#
# Synthetic data
#
def eight_gaussians_modes(radius: float = 2.0) -> np.ndarray:
    angles = np.arange(8) * np.pi / 4
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def eight_gaussians(count: int, seed: Seed, radius: float = 2.0,
                    std: float = 0.1) -> PointCloud:
    """Mixture of 8 isotropic normals evenly spaced on a circle"""
    rng = seed.generator()
    modes = eight_gaussians_modes(radius)
    return PointCloud(
        modes[rng.integers(0, 8, count)]
        + std * rng.standard_normal((count, 2)))


def two_moons(count: int, seed: Seed, noise: float = 0.05) -> PointCloud:
    """Two interleaving half circles"""
    rng = seed.generator()
    upper = rng.random(count) < 0.5
    angle = np.pi * rng.random(count)
    x = np.where(upper, np.cos(angle), 1.0 - np.cos(angle))
    y = np.where(upper, np.sin(angle), 0.5 - np.sin(angle))
    return PointCloud(
        np.column_stack([x, y]) + noise * rng.standard_normal((count, 2)))


def spherical_shell(n_dim: int, count: int, seed: Seed, radius: float = 1.0,
                    width: float = 0.05) -> PointCloud:
    """Uniform directions at normally perturbed radius"""
    rng = seed.generator()
    g = rng.standard_normal((count, n_dim))
    g /= np.linalg.norm(g, axis=1)[:, None]
    r = radius + width * rng.standard_normal(count)
    return PointCloud(g * r[:, None])


#
# Checkpoints
#
def save_checkpoint(state: TrainState, path: Path | str) -> Path:
    """JSON header line followed by one CSV line per parameter array"""
    path = Path(path)
    params = state.parameters()
    header = {
        "architecture": state.arch.as_dict(),
        "shapes": [list(p.shape) for p in params],
        "lambda": state.lam,
        "seed": None if state.seed is None else [
            state.seed.value, state.seed.stream_id],
        "step": state.step,
    }
    lines = ['# ' + json.dumps(header, sort_keys=True)]
    lines.extend(format_row(p.ravel().tolist()) for p in params)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    lgr.debug('Saved checkpoint at step %i to %s', state.step, path)
    return path


def load_checkpoint(path: Path | str) -> TrainState:
    """State saved by ``save_checkpoint()``, with zeroed Adam moments"""
    path = Path(path)
    lines = path.read_text(encoding='utf-8').splitlines()
    if not lines or not lines[0].startswith('# '):
        raise ValueError(f'{path} is not a checkpoint (no header line)')
    header = json.loads(lines[0][2:])
    arch_spec = header['architecture']
    arch = Architecture(
        input_dim=arch_spec['input_dim'],
        latent_dim=arch_spec['latent_dim'],
        encoder_hidden=tuple(arch_spec['encoder_hidden']),
        decoder_hidden=tuple(arch_spec['decoder_hidden']),
        output_activation=arch_spec['output_activation'],
    )
    shapes = header['shapes']
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != len(shapes):
        raise ValueError(
            f'{path}: header lists {len(shapes)} arrays, found {len(rows)}')
    arrays = [
        np.array([float(v) for v in row.split(',')]).reshape(shape)
        for row, shape in zip(rows, shapes)
    ]
    layers = [DenseLayer(w, b) for w, b in zip(arrays[::2], arrays[1::2])]
    n_enc = len(arch.encoder_sizes) - 1
    seed = header.get('seed')
    return TrainState(
        arch, layers[:n_enc], layers[n_enc:], lam=header['lambda'],
        step=header['step'], seed=None if seed is None else Seed(*seed))
