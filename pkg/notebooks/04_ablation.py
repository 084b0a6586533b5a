"""One-switch-off ablations of the full method, plus the contrastive baseline.

Run with ``python notebooks/04_ablation.py`` (a few minutes).
"""

# %% Variants
import numpy as np

from bamlearn.config import RunConfig
from bamlearn.evaluate import cluster
from bamlearn.runs import ablation_configs, is_collapsed
from bamlearn.trainer import build_datasets, embed, train

base = RunConfig().with_changes(data={"center_sigma": 1.1, "d_in": 16},
                                loss={"mode": "bam_teacher"}, optim={"steps": 800})
variants = dict(ablation_configs(base))
variants["contrastive"] = base.with_changes(loss={"mode": "contrastive"})

# %% Train each variant once and cluster the held-out embeddings
print(f"{'variant':<12} {'nmi':>6} {'ari':>6}  collapsed  final H(A)")
for name, cfg in variants.items():
    tr, te = build_datasets(cfg)
    res = train(cfg, tr)
    c = cluster(embed(res.params, te.points), te.labels, cfg.data.num_classes)
    nk = cfg.batch.n * cfg.batch.k
    print(f"{name:<12} {c.nmi:6.3f} {c.ari:6.3f}  {str(is_collapsed(res.logs, nk, cfg.batch.k)):9s}"
          f"  {res.logs[-1].entropy_A:.3f} / log(nk-k)={np.log(nk - cfg.batch.k):.3f}")
