"""Balanced self-attention matching for self-supervised learning on vector data."""

from .attention import (
    AttnMatrix,
    SimMatrix,
    cosine_similarity,
    cross_similarity,
    mask_positives,
    softmax_blocks,
    softmax_rows,
)
from .balancing import BalancedMatrix, EntropyReport, entropy_report, ot_objective, sinkhorn_balance
from .config import RunConfig, parse_config, parse_config_text
from .datagen import (
    AugmentSpec,
    Dataset,
    ViewBatch,
    load_csv,
    make_gaussian_mixture,
    make_two_rings,
    sample_views,
)
from .encoder import MlpSpec, ModelParams, backward, ema_update, forward, init_params
from .evaluate import ari, kmeans, linear_probe, nmi
from .loss import LossOutput, PairPolicy, SinkhornSettings, loss_bam, loss_contrastive_baseline, loss_vanilla
from .teacher import TeacherState, loss_bam_teacher
from .trainer import StepLog, collapse_indicators, train

__version__ = "0.1.0"
