"""EMA-teacher variant of the balanced attention loss.

Source attention compares student latents against teacher latents,
``A = softmax(sim(Z, Z_t) / tau)``, and the target is balanced from the
teacher alone, ``B = sinkhorn(sim(Z_t, Z_t) / tau_B)``.  Only the student
receives gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import cosine_similarity, cross_similarity
from .encoder import ModelParams, ema_update
from .errors import ConfigError, UsageError
from .loss import (
    LossOutput,
    PairPolicy,
    SinkhornSettings,
    _fixed_entries,
    _pairs_to_source_targets,
    _split_rows,
    balanced_target,
    cross_sim_backward,
    masked_similarity,
    source_attention,
    swapped_ce,
)
from .balancing import entropy_report

DEFAULT_MOMENTUM = 0.99


@dataclass
class TeacherState:
    params: ModelParams
    momentum: float = DEFAULT_MOMENTUM

    def __post_init__(self):
        if not 0.0 <= self.momentum <= 1.0:
            raise ConfigError("teacher momentum must lie in [0, 1]")

    @classmethod
    def from_student(cls, student: ModelParams, momentum: float = DEFAULT_MOMENTUM):
        return cls(student.copy(), momentum)

    def update(self, student: ModelParams):
        """EMA step toward ``student``; call after each optimizer step."""
        self.params = ema_update(student, self.params, self.momentum)


def loss_bam_teacher(z_student, z_teacher, policy: PairPolicy, temperature: float = 0.1,
                     target_temperature: float = 0.05, mask_mode: str | None = "zero",
                     sinkhorn: SinkhornSettings = SinkhornSettings(), global_norm: bool = True,
                     target: np.ndarray | None = None) -> LossOutput:
    """Balanced swapped cross-entropy; ``grad_z`` refers to student rows only."""
    if not (temperature > 0 and target_temperature > 0):
        raise ConfigError("temperatures must be positive")
    zs = np.asarray(z_student, dtype=np.float64)
    zt = np.asarray(z_teacher, dtype=np.float64)
    if zs.shape != zt.shape:
        raise UsageError(f"student {zs.shape} and teacher {zt.shape} latents differ in layout")
    n = _split_rows(zs.shape[0], policy)
    s_src = masked_similarity(cross_similarity(zs, zt, n), mask_mode)
    attn = source_attention(s_src, temperature, global_norm)
    warn = False
    if target is None:
        s_tgt = masked_similarity(cosine_similarity(zt, n), mask_mode)
        bal = balanced_target(s_tgt, target_temperature, sinkhorn, global_norm)
        target, warn = bal.values, bal.warning
    src_t = _pairs_to_source_targets(target, n, policy)
    total, g_logits = swapped_ce(attn, src_t)
    count = len(policy.pairs) * n
    grad_z = cross_sim_backward(g_logits / count, zs, zt, _fixed_entries(s_src))
    return LossOutput(total / count, grad_z, entropy_report(attn, target), warn,
                      total, count, attn, target)
