"""Run configuration: INI-style ``key = value`` text with one level of sections."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import logging
import typing
from dataclasses import dataclass, field

from .errors import ConfigError

log = logging.getLogger(__name__)

LOSS_MODES = ("vanilla", "bam", "bam_teacher", "contrastive")
DATA_KINDS = ("mixture", "rings", "csv")


@dataclass
class DataConfig:
    kind: str = "mixture"
    num_classes: int = 8
    per_class: int = 128
    d_in: int = 32
    center_sigma: float = 5.0
    cluster_sigma: float = 1.0
    radii: tuple[float, ...] = (1.0, 3.0)
    noise: float = 0.05
    path: str = ""
    holdout_fraction: float = 0.5
    seed: int = 7


@dataclass
class AugmentConfig:
    noise_sigma: float = 0.5
    scale_lo: float = 0.8
    scale_hi: float = 1.2
    dropout_prob: float = 0.1
    rotate_angle_max: float = 0.3


@dataclass
class BatchConfig:
    n: int = 64
    k: int = 2


@dataclass
class ModelConfig:
    encoder_dims: tuple[int, ...] = (64, 32)
    projector_dims: tuple[int, ...] = (256, 256, 64)
    encoder_batchnorm: bool = False
    projector_batchnorm: bool = False


@dataclass
class LossConfig:
    mode: str = "bam"
    temperature: float = 0.1
    target_temperature: float = 0.05
    mask_positives: bool = True
    mask_mode: str = "zero"
    global_norm: bool = True
    # "all" or "exclude_local:<view>,<view>,..."
    pair_policy: str = "all"
    vanilla_symmetric_grad: bool = False


@dataclass
class SinkhornConfig:
    max_iters: int = 5
    tol: float = 1e-3
    relaxation: float = 1.0


@dataclass
class OptimConfig:
    steps: int = 2000
    lr: float = 0.05
    warmup_steps: int = 100
    momentum: float = 0.9
    weight_decay: float = 1e-6
    # <= 0 disables clipping
    grad_clip: float = 1.0


@dataclass
class TeacherConfig:
    momentum: float = 0.99


@dataclass
class RunSection:
    seed: int = 0
    out_dir: str = "runs/default"
    log_every: int = 10
    checkpoint_every: int = 0


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    batch: BatchConfig = field(default_factory=BatchConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    run: RunSection = field(default_factory=RunSection)

    def validate(self) -> "RunConfig":
        validate(self)
        return self

    def with_changes(self, **sections) -> "RunConfig":
        """Copy with per-section overrides, e.g. ``with_changes(loss={"mode": "vanilla"})``."""
        kw = {}
        for name, changes in sections.items():
            kw[name] = dataclasses.replace(getattr(self, name), **changes)
        return dataclasses.replace(self, **kw).validate()


SECTIONS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _section_types():
    hints = typing.get_type_hints(RunConfig)
    return {name: hints[name] for name in SECTIONS}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(text: str, tp):
    origin = typing.get_origin(tp)
    if origin is tuple:
        (inner, _) = typing.get_args(tp)
        items = [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]
        return tuple(_convert(p, inner) for p in items)
    if tp is bool:
        return _parse_bool(text)
    if tp is int:
        return int(text)
    if tp is float:
        return float(text)
    return text.strip()


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse INI text; ``overrides`` maps ``"section.key"`` to string values."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    entries = {(s, k): v for s in cp.sections() for k, v in cp.items(s)}
    for dotted, v in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        entries[(sec, key)] = str(v)

    types = _section_types()
    built = {}
    for sec, cls in types.items():
        hints = typing.get_type_hints(cls)
        kwargs = {}
        for (s, key), raw in entries.items():
            if s != sec:
                continue
            if key not in hints:
                raise ConfigError(f"unknown key {sec}.{key}")
            try:
                kwargs[key] = _convert(raw, hints[key])
            except ValueError as e:
                raise ConfigError(f"{sec}.{key}: {e}") from None
        built[sec] = cls(**kwargs)
    for s, key in entries:
        if s not in types:
            raise ConfigError(f"unknown section [{s}]")
    return RunConfig(**built).validate()


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load a config file (or defaults when ``path`` is None) and validate it."""
    text = ""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
    return parse_config_text(text, overrides)


def to_text(cfg: RunConfig) -> str:
    """Resolved config with every default materialized."""
    buf = io.StringIO()
    for sec in SECTIONS:
        buf.write(f"[{sec}]\n")
        for f in dataclasses.fields(getattr(cfg, sec)):
            buf.write(f"{f.name} = {_format(getattr(getattr(cfg, sec), f.name))}\n")
        buf.write("\n")
    return buf.getvalue()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(to_text(cfg).encode()).hexdigest()[:16]


def _require(cond: bool, key: str, constraint: str):
    if not cond:
        raise ConfigError(f"{key} must {constraint}")


def validate(cfg: RunConfig):
    d, a, b, m, l, sk, o, t, r = (cfg.data, cfg.augment, cfg.batch, cfg.model, cfg.loss,
                                  cfg.sinkhorn, cfg.optim, cfg.teacher, cfg.run)
    _require(d.kind in DATA_KINDS, "data.kind", f"be one of {DATA_KINDS}")
    _require(d.per_class >= 1, "data.per_class", "be >= 1")
    _require(0 < d.holdout_fraction < 1, "data.holdout_fraction", "lie in (0, 1)")
    if d.kind == "csv":
        _require(bool(d.path), "data.path", "be set when data.kind = csv")
    if d.kind == "rings":
        _require(len(d.radii) == 2, "data.radii", "have two entries")
    _require(a.noise_sigma >= 0, "augment.noise_sigma", "be >= 0")
    _require(0 < a.scale_lo <= a.scale_hi, "augment.scale_lo", "satisfy 0 < scale_lo <= scale_hi")
    _require(0 <= a.dropout_prob < 1, "augment.dropout_prob", "lie in [0, 1)")
    _require(a.rotate_angle_max >= 0, "augment.rotate_angle_max", "be >= 0")
    _require(b.n >= 2, "batch.n", "be >= 2")
    _require(b.k >= 2, "batch.k", "be >= 2")
    _require(len(m.encoder_dims) >= 1 and min(m.encoder_dims) >= 1, "model.encoder_dims",
             "list >= 1 positive width")
    _require(len(m.projector_dims) >= 1 and min(m.projector_dims) >= 1, "model.projector_dims",
             "list >= 1 positive width")
    _require(l.mode in LOSS_MODES, "loss.mode", f"be one of {LOSS_MODES}")
    _require(l.temperature > 0, "loss.temperature", "be positive")
    _require(l.target_temperature > 0, "target_temperature", "be positive")
    _require(l.mask_mode in ("zero", "neg_inf"), "loss.mask_mode", "be 'zero' or 'neg_inf'")
    _require(l.pair_policy == "all" or l.pair_policy.startswith("exclude_local:"),
             "loss.pair_policy", "be 'all' or 'exclude_local:<views>'")
    _require(sk.max_iters >= 1, "sinkhorn.max_iters", "be >= 1")
    _require(sk.tol > 0, "sinkhorn.tol", "be positive")
    _require(0 < sk.relaxation < 2, "sinkhorn.relaxation", "lie in (0, 2)")
    _require(o.steps >= 1, "optim.steps", "be >= 1")
    _require(o.lr >= 0, "optim.lr", "be >= 0")
    _require(0 <= o.warmup_steps <= o.steps, "optim.warmup_steps", "lie in [0, steps]")
    _require(0 <= o.momentum < 1, "optim.momentum", "lie in [0, 1)")
    _require(o.weight_decay >= 0, "optim.weight_decay", "be >= 0")
    _require(0 <= t.momentum <= 1, "teacher.momentum", "lie in [0, 1]")
    _require(r.seed >= 0, "run.seed", "be >= 0")
    _require(r.log_every >= 1, "run.log_every", "be >= 1")
    _require(r.checkpoint_every >= 0, "run.checkpoint_every", "be >= 0")
    if l.mode in ("bam", "bam_teacher") and l.target_temperature >= l.temperature:
        log.warning("target_temperature %.3g >= temperature %.3g: without an entropy gap "
                    "balanced training is known to collapse near this setting",
                    l.target_temperature, l.temperature)


def pair_policy(cfg: RunConfig):
    from .loss import PairPolicy

    spec = cfg.loss.pair_policy
    if spec == "all":
        return PairPolicy.all_pairs(cfg.batch.k)
    views = [int(v) for v in spec.split(":", 1)[1].split(",") if v.strip()]
    return PairPolicy.without_local_pairs(cfg.batch.k, views)
