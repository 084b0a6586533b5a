"""Swapped cross-entropy losses over self-attention rows, with analytic ``dL/dZ``.

All losses share one pattern: a source attention matrix ``A`` (softmax over
similarity logits), a constant target matrix, and a sum of cross-entropies
``CE(target row of view j, source row of view j')`` over the allowed ordered
view pairs of every image.  Values are reported as the mean over
``len(pairs) * n`` terms; ``total`` keeps the plain sum.

For a source row ``a = softmax(l / tau)`` and any fixed non-negative target
``t``, ``d CE(t, a) / d l = (a * sum(t) - t) / tau``; with block-wise
normalization the same holds inside each block with ``a`` renormalized to
the block.  The logit gradient is then pulled back through the cosine
similarity and the row normalization of ``Z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .attention import (
    AttnMatrix,
    SimMatrix,
    cosine_similarity,
    exclude_diagonal,
    mask_positives,
    normalize_rows,
    positive_mask,
    softmax_blocks,
    softmax_rows,
)
from .balancing import (
    TRAIN_MAX_ITERS,
    TRAIN_RELAXATION,
    TRAIN_TOL,
    BalancedMatrix,
    EntropyReport,
    entropy_report,
    sinkhorn_balance,
    sinkhorn_blocks,
)
from .errors import ConfigError, UsageError


@dataclass(frozen=True)
class PairPolicy:
    """Ordered ``(target_view, source_view)`` pairs entering the loss."""

    k: int
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("a pair policy needs k >= 2 views")
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        if not pairs:
            raise ConfigError("pair policy is empty")
        for a, b in pairs:
            if a == b:
                raise ConfigError(f"self-pair ({a}, {b}) not allowed")
            if not (0 <= a < self.k and 0 <= b < self.k):
                raise ConfigError(f"pair ({a}, {b}) outside k={self.k}")
        if len(set(pairs)) != len(pairs):
            raise ConfigError("duplicate pairs in policy")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def all_pairs(cls, k: int) -> "PairPolicy":
        return cls(k, tuple(permutations(range(k), 2)))

    @classmethod
    def without_local_pairs(cls, k: int, local_views) -> "PairPolicy":
        """All ordered pairs except those between two 'local' views (multi-crop rule)."""
        local = set(local_views)
        return cls(k, tuple((a, b) for a, b in permutations(range(k), 2)
                            if not (a in local and b in local)))

    @property
    def is_symmetric(self) -> bool:
        s = set(self.pairs)
        return all((b, a) in s for a, b in s)


@dataclass(frozen=True)
class SinkhornSettings:
    max_iters: int = TRAIN_MAX_ITERS
    tol: float = TRAIN_TOL
    relaxation: float = TRAIN_RELAXATION


@dataclass
class LossOutput:
    value: float
    grad_z: np.ndarray
    entropy: EntropyReport
    sinkhorn_warning: bool = False
    total: float = 0.0
    num_terms: int = 0
    attn: AttnMatrix | None = None
    target: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def _split_rows(num_rows: int, policy: PairPolicy) -> int:
    if num_rows % policy.k:
        raise UsageError(f"{num_rows} latent rows are not a multiple of k={policy.k}")
    return num_rows // policy.k


def _pairs_to_source_targets(target: np.ndarray, n: int, policy: PairPolicy) -> np.ndarray:
    """Per source row, the sum of all target rows it is matched against."""
    out = np.zeros_like(target)
    for jt, js in policy.pairs:
        out[js * n:(js + 1) * n] += target[jt * n:(jt + 1) * n]
    return out


def _safe_dot_log(t: np.ndarray, logp: np.ndarray) -> np.ndarray:
    """Elementwise ``t * logp`` with ``0 * log 0 = 0``."""
    return np.where(t > 0, t * np.where(t > 0, logp, 0.0), 0.0)


def swapped_ce(attn: AttnMatrix, source_targets: np.ndarray):
    """Return ``(total, dTotal/dlogits)`` where logits = similarities before the temperature."""
    total = -float(_safe_dot_log(source_targets, attn.log_values).sum())
    grad = np.empty_like(attn.values)
    for g in attn.groups:
        a = attn.values[:, g]
        p = a / a.sum(axis=1, keepdims=True)
        grad[:, g] = p * source_targets[:, g].sum(axis=1, keepdims=True) - source_targets[:, g]
    return total, grad / attn.temperature


def _target_side_grad(attn: AttnMatrix, n: int, policy: PairPolicy) -> np.ndarray:
    """Gradient of the summed CE w.r.t. the logits of the target rows, when A is also the target."""
    logp = np.where(attn.values > 0, attn.log_values, 0.0)
    c = np.zeros_like(logp)
    for jt, js in policy.pairs:
        c[jt * n:(jt + 1) * n] += logp[js * n:(js + 1) * n]
    grad = np.empty_like(logp)
    for g in attn.groups:
        a = attn.values[:, g]
        p = a / a.sum(axis=1, keepdims=True)
        inner = (p * c[:, g]).sum(axis=1, keepdims=True)
        grad[:, g] = -a * (c[:, g] - inner)
    return grad / attn.temperature


def _renorm_backward(d_u: np.ndarray, u: np.ndarray, norms: np.ndarray) -> np.ndarray:
    radial = np.einsum("ij,ij->i", u, d_u)[:, None]
    return (d_u - u * radial) / norms[:, None]


def self_sim_backward(grad_s: np.ndarray, z, fixed: np.ndarray | None) -> np.ndarray:
    """Pull ``dL/dS`` back to ``dL/dZ`` for ``S = sim(Z, Z)`` (diagonal constant)."""
    u, norms = normalize_rows(z)
    g = grad_s.copy()
    if fixed is not None:
        g[fixed] = 0.0
    np.fill_diagonal(g, 0.0)
    return _renorm_backward((g + g.T) @ u, u, norms)


def cross_sim_backward(grad_s: np.ndarray, z, z_cols, fixed: np.ndarray | None) -> np.ndarray:
    """``dL/dZ`` for ``S = sim(Z, Z_cols)`` with the columns held constant."""
    u, norms = normalize_rows(z)
    v, _ = normalize_rows(z_cols)
    g = grad_s.copy()
    if fixed is not None:
        g[fixed] = 0.0
    return _renorm_backward(g @ v, u, norms)


def masked_similarity(s: SimMatrix, mask_mode: str | None) -> SimMatrix:
    return s if mask_mode is None else mask_positives(s, mask_mode)


def source_attention(s: SimMatrix, temperature: float, global_norm: bool) -> AttnMatrix:
    return softmax_rows(s, temperature) if global_norm else softmax_blocks(s, temperature)


def balanced_target(s: SimMatrix, target_temperature: float, sinkhorn: SinkhornSettings,
                    global_norm: bool) -> BalancedMatrix:
    if global_norm:
        return sinkhorn_balance(s, target_temperature, sinkhorn.max_iters, sinkhorn.tol,
                                relaxation=sinkhorn.relaxation)
    return sinkhorn_blocks(s, target_temperature, sinkhorn.max_iters, sinkhorn.tol,
                           relaxation=sinkhorn.relaxation)


def _check_temps(*temps):
    for t in temps:
        if not t > 0:
            raise ConfigError("temperatures must be positive")


def _fixed_entries(s: SimMatrix) -> np.ndarray | None:
    return positive_mask(s.n, s.k) if s.masked else None


def loss_vanilla(z, policy: PairPolicy, temperature: float = 0.1, mask_mode: str | None = "zero",
                 global_norm: bool = True, symmetric_grad: bool = False) -> LossOutput:
    """Self-attention matching with ``A`` as both target and source.

    The target side is treated as constant unless ``symmetric_grad`` is set.
    """
    _check_temps(temperature)
    z = np.asarray(z, dtype=np.float64)
    n = _split_rows(z.shape[0], policy)
    s = masked_similarity(cosine_similarity(z, n), mask_mode)
    attn = source_attention(s, temperature, global_norm)
    src_t = _pairs_to_source_targets(attn.values, n, policy)
    total, g_logits = swapped_ce(attn, src_t)
    if symmetric_grad:
        g_logits = g_logits + _target_side_grad(attn, n, policy)
    count = len(policy.pairs) * n
    grad_z = self_sim_backward(g_logits / count, z, _fixed_entries(s))
    return LossOutput(total / count, grad_z, entropy_report(attn, attn.values), False,
                      total, count, attn, attn.values)


def loss_bam(z, policy: PairPolicy, temperature: float = 0.1, target_temperature: float = 0.05,
             mask_mode: str | None = "zero", sinkhorn: SinkhornSettings = SinkhornSettings(),
             global_norm: bool = True, target: np.ndarray | None = None) -> LossOutput:
    """Cross-entropy between Sinkhorn-balanced target rows and swapped attention rows.

    ``target`` overrides the balanced matrix (it is a constant either way);
    passing a frozen ``B`` lets callers differentiate through ``A`` alone.
    """
    _check_temps(temperature, target_temperature)
    z = np.asarray(z, dtype=np.float64)
    n = _split_rows(z.shape[0], policy)
    s = masked_similarity(cosine_similarity(z, n), mask_mode)
    attn = source_attention(s, temperature, global_norm)
    warn = False
    if target is None:
        bal = balanced_target(s, target_temperature, sinkhorn, global_norm)
        target, warn = bal.values, bal.warning
    src_t = _pairs_to_source_targets(target, n, policy)
    total, g_logits = swapped_ce(attn, src_t)
    count = len(policy.pairs) * n
    grad_z = self_sim_backward(g_logits / count, z, _fixed_entries(s))
    return LossOutput(total / count, grad_z, entropy_report(attn, target), warn,
                      total, count, attn, target)


def contrastive_targets(n: int, policy: PairPolicy) -> np.ndarray:
    """One-hot positive-pair targets, summed per source row."""
    t = np.zeros((n * policy.k, n * policy.k))
    idx = np.arange(n)
    for jt, js in policy.pairs:
        t[js * n + idx, jt * n + idx] += 1.0
    return t


def loss_contrastive_baseline(z, policy: PairPolicy, temperature: float = 0.1) -> LossOutput:
    """InfoNCE-style baseline: each source row must put its mass on its positive view.

    Self-similarities are excluded from the softmax; no positive masking.
    """
    _check_temps(temperature)
    z = np.asarray(z, dtype=np.float64)
    n = _split_rows(z.shape[0], policy)
    s = exclude_diagonal(cosine_similarity(z, n))
    attn = softmax_rows(s, temperature)
    src_t = contrastive_targets(n, policy)
    total, g_logits = swapped_ce(attn, src_t)
    count = len(policy.pairs) * n
    grad_z = self_sim_backward(g_logits / count, z, None)
    # per-row target distribution for entropy bookkeeping
    row_mass = src_t.sum(axis=1, keepdims=True)
    tgt = np.divide(src_t, row_mass, out=np.zeros_like(src_t), where=row_mass > 0)
    return LossOutput(total / count, grad_z, entropy_report(attn, tgt), False,
                      total, count, attn, tgt)
