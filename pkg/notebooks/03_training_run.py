"""A short BAM training run on the Gaussian mixture, with entropy curves.

Run with ``python notebooks/03_training_run.py`` (about half a minute).
"""

# %% Configuration
from bamlearn.config import RunConfig
from bamlearn.evaluate import cluster
from bamlearn.trainer import build_datasets, embed, train

cfg = RunConfig().with_changes(data={"center_sigma": 1.1, "d_in": 16},
                               optim={"steps": 600}, run={"log_every": 50})
train_ds, held_out = build_datasets(cfg)
print(f"{len(train_ds)} training points, {len(held_out)} held out, {cfg.data.num_classes} classes")

# %% Before training
from bamlearn.encoder import init_params
from bamlearn.trainer import model_specs

init = init_params(*model_specs(cfg, train_ds.dim), cfg.run.seed)
print("NMI at init:", round(cluster(embed(init, held_out.points), held_out.labels, 8).nmi, 3))

# %% Train; entropy of A should fall while B stays below it
result = train(cfg, train_ds)
print(f"{'step':>5} {'loss':>8} {'H(A)':>7} {'H(B)':>7} {'erank':>7}")
for e in result.logs:
    print(f"{e.step:5d} {e.loss:8.4f} {e.entropy_A:7.3f} {e.entropy_B:7.3f} {e.effective_rank:7.2f}")

# %% After training
c = cluster(embed(result.params, held_out.points), held_out.labels, 8)
print(f"held-out NMI={c.nmi:.3f} ARI={c.ari:.3f}")
