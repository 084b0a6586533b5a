"""Run directories: training with persisted logs, checkpoint evaluation, ablation sweeps."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint, datagen
from .attention import cosine_similarity, mask_positives, softmax_rows
from .balancing import entropy_report, sinkhorn_balance
from .config import RunConfig, config_hash, parse_config, to_text
from .errors import ConfigError
from .evaluate import cluster, linear_probe
from .trainer import StepLog, build_datasets, embed, train

log = logging.getLogger(__name__)

OUTPUT_ENV = "BAM_OUTPUT_DIR"
STEPLOG_FIELDS = [f.name for f in dataclasses.fields(StepLog)]


def resolve_out_dir(cfg: RunConfig, out: str | None = None) -> Path:
    if out:
        return Path(out)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(cfg.run.out_dir)


def sig6(x) -> str:
    return f"{x:.6g}"


def is_collapsed(logs: list[StepLog], nk: int, k: int) -> bool:
    """Constant collapse (std or rank) or spread collapse (attention entropy at its ceiling)."""
    first, last = logs[0], logs[-1]
    if last.latent_std < 0.01 * first.latent_std or last.effective_rank < 2:
        return True
    return last.entropy_A >= 0.99 * math.log(nk - k)


def evaluation_report(params, ds: datagen.Dataset, seed: int = 0, cfg: RunConfig | None = None,
                      restarts: int = 10) -> dict:
    """k-means NMI / ARI over all of ``ds`` plus a linear probe on a stratified split."""
    h = embed(params, ds.points)
    c = cluster(h, ds.labels, ds.num_classes, restarts=restarts, seed=seed)
    tr, te = datagen.split_dataset(ds, 0.5, seed)
    probe = linear_probe(embed(params, tr.points), tr.labels, embed(params, te.points),
                         te.labels, seed=seed)
    return {
        "config_hash": config_hash(cfg) if cfg is not None else None,
        "num_points": len(ds),
        "num_classes": ds.num_classes,
        "nmi": c.nmi,
        "ari": c.ari,
        "inertia": c.inertia,
        "probe_accuracy": probe.accuracy,
        "per_class_accuracy": [None if np.isnan(v) else float(v)
                               for v in probe.per_class_accuracy],
    }


def write_logs(logs: list[StepLog], out_dir: Path):
    with open(out_dir / "steps.jsonl", "w", encoding="utf-8") as fh:
        for entry in logs:
            fh.write(json.dumps(entry.to_dict()) + "\n")
    with open(out_dir / "steps.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=STEPLOG_FIELDS)
        w.writeheader()
        for entry in logs:
            w.writerow({k: (repr(v) if isinstance(v, float) else v)
                        for k, v in entry.to_dict().items()})


@dataclass
class RunOutcome:
    cfg: RunConfig
    out_dir: Path
    logs: list[StepLog]
    report: dict
    collapsed: bool


def run_training(cfg: RunConfig, out_dir: Path, config_path=None) -> RunOutcome:
    """Train, then write config copies, step logs, checkpoints and the evaluation report."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if config_path is not None:
        shutil.copyfile(config_path, out_dir / "config.ini")
    (out_dir / "resolved.ini").write_text(to_text(cfg), encoding="utf-8")
    train_ds, held_out = build_datasets(cfg)

    def on_checkpoint(step, params, teacher):
        t = teacher.params if teacher is not None else None
        if step == cfg.optim.steps:
            checkpoint.save(out_dir / "checkpoint.bin", params, t)
        else:
            checkpoint.save(out_dir / f"checkpoint_{step:06d}.bin", params, t)

    result = train(cfg, train_ds, on_checkpoint=on_checkpoint)
    write_logs(result.logs, out_dir)
    report = evaluation_report(result.params, held_out, cfg.run.seed, cfg)
    nk = cfg.batch.n * cfg.batch.k
    collapsed = is_collapsed(result.logs, nk, cfg.batch.k)
    report["collapsed"] = collapsed
    with open(out_dir / "eval_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    return RunOutcome(cfg, out_dir, result.logs, report, collapsed)


def parse_dataset_spec(spec: str) -> datagen.Dataset:
    """``mixture:num_classes=8,per_class=64,...``, ``rings:...`` or ``csv:<path>`` (or a bare path)."""
    kind, sep, rest = spec.partition(":")
    if not sep:
        return datagen.load_csv(spec)
    if kind == "csv":
        return datagen.load_csv(rest)
    kv = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"dataset option {item!r} is not key=value")
        kv[key.strip()] = val.strip()
    if kind not in ("mixture", "rings"):
        raise ConfigError(f"unknown dataset kind {kind!r}")
    try:
        if kind == "mixture":
            ds = datagen.make_gaussian_mixture(
                int(kv.pop("num_classes", 8)), int(kv.pop("per_class", 64)),
                int(kv.pop("d_in", 32)), float(kv.pop("center_sigma", 5.0)),
                float(kv.pop("cluster_sigma", 1.0)), int(kv.pop("seed", 7)))
        else:
            radii = [float(r) for r in kv.pop("radii", "1/3").split("/")]
            ds = datagen.make_two_rings(int(kv.pop("per_class", 100)), radii,
                                        float(kv.pop("noise", 0.05)), int(kv.pop("seed", 0)))
    except ValueError as e:
        raise ConfigError(f"dataset spec {spec!r}: {e}") from None
    if kv:
        raise ConfigError(f"unknown dataset options: {sorted(kv)}")
    return ds


def evaluate_checkpoint(path, ds: datagen.Dataset, seed: int = 0) -> dict:
    params, _ = checkpoint.load(path)
    if params.spec_f.in_dim != ds.dim:
        raise ConfigError(f"checkpoint expects {params.spec_f.in_dim}-dim inputs, "
                          f"dataset has {ds.dim}")
    report = evaluation_report(params, ds, seed)
    resolved = Path(path).parent / "resolved.ini"
    if resolved.exists():
        report["config_hash"] = config_hash(parse_config(resolved))
    return report


ABLATIONS = {
    "full": {},
    "-mask": {"loss": {"mask_positives": False}},
    "-global": {"loss": {"global_norm": False}},
    "-balance": {"loss": {"mode": "vanilla"}},
    "-teacher": {"loss": {"mode": "bam"}},
}


def ablation_configs(cfg: RunConfig) -> dict[str, RunConfig]:
    """Base config plus one-switch-off variants (a teacher-less base keeps '-teacher' identical)."""
    return {name: cfg.with_changes(**changes) if changes else cfg
            for name, changes in ABLATIONS.items()}


def run_ablation(cfg: RunConfig, out_dir: Path, seeds=None) -> list[dict]:
    seeds = list(seeds) if seeds else [cfg.run.seed]
    rows = []
    for name, variant in ablation_configs(cfg).items():
        nmis, aris, collapsed = [], [], []
        for s in seeds:
            vcfg = variant.with_changes(run={"seed": s})
            sub = out_dir / name.lstrip("-") / f"seed{s}"
            outcome = run_training(vcfg, sub)
            nmis.append(outcome.report["nmi"])
            aris.append(outcome.report["ari"])
            collapsed.append(outcome.collapsed)
        rows.append({"variant": name, "nmi": float(np.mean(nmis)), "ari": float(np.mean(aris)),
                     "collapsed": any(collapsed), "seeds": seeds,
                     "nmi_per_seed": nmis, "ari_per_seed": aris})
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "ablation.json", "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
    with open(out_dir / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "nmi", "ari", "collapsed"])
        for r in rows:
            w.writerow([r["variant"], repr(r["nmi"]), repr(r["ari"]), str(r["collapsed"]).lower()])
    return rows


def format_table(rows: list[dict]) -> str:
    lines = [f"{'variant':<10} {'nmi':>10} {'ari':>10}  collapsed"]
    for r in rows:
        lines.append(f"{r['variant']:<10} {sig6(r['nmi']):>10} {sig6(r['ari']):>10}  "
                     f"{str(r['collapsed']).lower()}")
    return "\n".join(lines)


def random_similarity(n: int, k: int, d: int, seed: int, mask_mode="zero"):
    from ._rng import stream

    z = stream(seed, "diag").standard_normal((n * k, d))
    s = cosine_similarity(z, n)
    return mask_positives(s, mask_mode) if mask_mode else s


def diag_sinkhorn(n=64, k=2, d=32, target_temperature=0.05, max_iters=100, tol=1e-6, seed=0):
    """Per-iteration max marginal error of Sinkhorn on random latents."""
    s = random_similarity(n, k, d, seed)
    bal = sinkhorn_balance(s, target_temperature, max_iters, tol, record=True)
    return bal.history


def diag_entropy(n=64, k=2, d=32, temperature=0.1, target_temperatures=(0.02, 0.05, 0.075, 0.1),
                 seed=0):
    """Mean row entropies of A and B on random latents for a sweep of target temperatures."""
    s = random_similarity(n, k, d, seed)
    a = softmax_rows(s, temperature)
    rows = []
    for tb in target_temperatures:
        rep = entropy_report(a, sinkhorn_balance(s, tb))
        rows.append((tb, rep.mean_row_entropy_A, rep.mean_row_entropy_B))
    return rows
