"""Training loop: SGD with momentum, linear warmup + cosine decay, global-norm clipping."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import datagen
from ._rng import stream
from .config import RunConfig, pair_policy
from .encoder import (
    MlpSpec,
    ModelParams,
    backward,
    forward,
    grad_global_norm,
    init_params,
    update_running_stats,
)
from .errors import TrainingDiverged, UsageError
from .loss import SinkhornSettings, loss_bam, loss_contrastive_baseline, loss_vanilla
from .teacher import TeacherState, loss_bam_teacher

log = logging.getLogger(__name__)


@dataclass
class StepLog:
    step: int
    loss: float
    entropy_A: float
    entropy_B: float
    latent_std: float
    effective_rank: float
    sinkhorn_warning: bool
    lr: float

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    params: ModelParams
    logs: list[StepLog]
    teacher: TeacherState | None = None


def lr_at(step: int, base: float, warmup_steps: int, total_steps: int) -> float:
    """Linear warmup to ``base`` at ``warmup_steps``, then cosine decay to 0 at ``total_steps``."""
    if warmup_steps > 0 and step <= warmup_steps:
        return base * step / warmup_steps
    span = total_steps - warmup_steps
    if span <= 0:
        return base
    frac = min(max((step - warmup_steps) / span, 0.0), 1.0)
    return base * 0.5 * (1.0 + math.cos(math.pi * frac))


def collapse_indicators(h) -> tuple[float, float]:
    """``(latent_std, effective_rank)`` of a batch of representations.

    ``latent_std`` is the per-dimension standard deviation averaged over
    dimensions; ``effective_rank`` is the exponential of the entropy of the
    normalized singular values of the centered batch (1 for a constant batch).
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        raise UsageError("collapse indicators need at least 2 rows")
    latent_std = float(h.std(axis=0).mean())
    centered = h - h.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    total = sv.sum()
    if total <= 1e-12 * max(1.0, float(np.abs(h).max())):
        return latent_std, 1.0
    p = sv[sv > 0] / total
    erank = float(np.exp(-(p * np.log(p)).sum()))
    return latent_std, min(max(erank, 1.0), float(min(h.shape)))


def model_specs(cfg: RunConfig, d_in: int) -> tuple[MlpSpec, MlpSpec]:
    m = cfg.model
    spec_f = MlpSpec((d_in,) + tuple(m.encoder_dims), m.encoder_batchnorm)
    spec_g = MlpSpec((spec_f.out_dim,) + tuple(m.projector_dims), m.projector_batchnorm)
    return spec_f, spec_g


def augment_spec(cfg: RunConfig) -> datagen.AugmentSpec:
    a = cfg.augment
    return datagen.AugmentSpec(a.noise_sigma, (a.scale_lo, a.scale_hi), a.dropout_prob,
                               a.rotate_angle_max)


def build_datasets(cfg: RunConfig):
    """``(train, held_out)`` splits of the configured dataset."""
    d = cfg.data
    if d.kind == "mixture":
        ds = datagen.make_gaussian_mixture(d.num_classes, d.per_class, d.d_in, d.center_sigma,
                                           d.cluster_sigma, d.seed)
    elif d.kind == "rings":
        ds = datagen.make_two_rings(d.per_class, d.radii, d.noise, d.seed)
    else:
        ds = datagen.load_csv(d.path)
    return datagen.split_dataset(ds, d.holdout_fraction, d.seed)


def embed(params: ModelParams, x) -> np.ndarray:
    """Encoder output ``h`` in inference mode."""
    h, _, _ = forward(params, x, train=False)
    return h


def compute_loss(cfg: RunConfig, z, z_teacher=None):
    lc = cfg.loss
    policy = pair_policy(cfg)
    mask_mode = lc.mask_mode if lc.mask_positives else None
    sk = SinkhornSettings(cfg.sinkhorn.max_iters, cfg.sinkhorn.tol, cfg.sinkhorn.relaxation)
    if lc.mode == "bam":
        return loss_bam(z, policy, lc.temperature, lc.target_temperature, mask_mode, sk,
                        lc.global_norm)
    if lc.mode == "bam_teacher":
        return loss_bam_teacher(z, z_teacher, policy, lc.temperature, lc.target_temperature,
                                mask_mode, sk, lc.global_norm)
    if lc.mode == "vanilla":
        return loss_vanilla(z, policy, lc.temperature, mask_mode, lc.global_norm,
                            lc.vanilla_symmetric_grad)
    return loss_contrastive_baseline(z, policy, lc.temperature)


def _all_finite(arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def train(cfg: RunConfig, ds: datagen.Dataset, on_checkpoint=None, on_log=None) -> TrainResult:
    """Run ``cfg.optim.steps`` optimizer steps on ``ds``.

    ``on_checkpoint(step, params, teacher)`` fires every
    ``run.checkpoint_every`` steps (if > 0) and after the last step;
    ``on_log(StepLog)`` fires at every logged step.
    """
    o, seed, n, k = cfg.optim, cfg.run.seed, cfg.batch.n, cfg.batch.k
    spec_f, spec_g = model_specs(cfg, ds.dim)
    params = init_params(spec_f, spec_g, seed)
    teacher = None
    if cfg.loss.mode == "bam_teacher":
        teacher = TeacherState.from_student(params, cfg.teacher.momentum)
    aug = augment_spec(cfg)
    velocity = [np.zeros_like(a) for a in params.trainable()]
    per_epoch = len(datagen.epoch_batches(len(ds), n, 0, seed))
    logs: list[StepLog] = []
    epoch_cache = (-1, None)

    for step in range(1, o.steps + 1):
        epoch, pos = divmod(step - 1, per_epoch)
        if epoch_cache[0] != epoch:
            epoch_cache = (epoch, datagen.epoch_batches(len(ds), n, epoch, seed))
        idx = epoch_cache[1][pos]
        view_seed = int(stream(seed, "augment", step).integers(2**62))
        vb = datagen.sample_views(ds, idx, k, aug, view_seed)

        h, z, tape = forward(params, vb.views, train=True)
        z_t = None
        if teacher is not None:
            # inference-mode batchnorm statistics on the teacher path
            _, z_t, _ = forward(teacher.params, vb.views, train=False)
        out = compute_loss(cfg, z, z_t)
        grads = backward(params, tape, out.grad_z)
        g_list = grads.trainable()
        if not (math.isfinite(out.value) and _all_finite(g_list)):
            raise TrainingDiverged(step, logs[-1] if logs else None)

        lr = lr_at(step, o.lr, o.warmup_steps, o.steps)
        if o.grad_clip > 0:
            gnorm = grad_global_norm(grads)
            if gnorm > o.grad_clip:
                scale = o.grad_clip / gnorm
                for g in g_list:
                    g *= scale
        for w, g, v in zip(params.trainable(), g_list, velocity):
            if o.weight_decay:
                g += o.weight_decay * w
            v *= o.momentum
            v += g
            w -= lr * v
        update_running_stats(params, tape)
        if not _all_finite(params.trainable()):
            raise TrainingDiverged(step, logs[-1] if logs else None)
        if teacher is not None:
            teacher.update(params)

        if step == 1 or step % cfg.run.log_every == 0 or step == o.steps:
            std, erank = collapse_indicators(h)
            entry = StepLog(step, float(out.value), out.entropy.mean_row_entropy_A,
                            out.entropy.mean_row_entropy_B, std, erank,
                            bool(out.sinkhorn_warning), lr)
            logs.append(entry)
            if out.sinkhorn_warning:
                log.debug("step %d: sinkhorn did not reach tolerance", step)
            if on_log is not None:
                on_log(entry)
        if on_checkpoint is not None and (
                (cfg.run.checkpoint_every and step % cfg.run.checkpoint_every == 0)
                or step == o.steps):
            on_checkpoint(step, params, teacher)

    return TrainResult(params, logs, teacher)
