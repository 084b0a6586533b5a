"""The three attention-matching losses on a toy batch, and a gradient check.

Run with ``python notebooks/02_attention_losses.py``.
"""

# %% A batch of two views of four "images"
import numpy as np

from bamlearn.loss import PairPolicy, loss_bam, loss_contrastive_baseline, loss_vanilla

rng = np.random.default_rng(1)
base = rng.standard_normal((4, 8))
z = np.vstack([base + 0.1 * rng.standard_normal(base.shape),
               base + 0.1 * rng.standard_normal(base.shape)])
policy = PairPolicy.all_pairs(2)

for name, out in [("vanilla", loss_vanilla(z, policy)),
                  ("bam", loss_bam(z, policy)),
                  ("contrastive", loss_contrastive_baseline(z, policy))]:
    print(f"{name:12s} loss={out.value:.4f}  H(A)={out.entropy.mean_row_entropy_A:.3f}  "
          f"H(target)={out.entropy.mean_row_entropy_B:.3f}")

# %% Vanilla matching is minimized by collapse: identical latents give zero gradient
flat = np.tile(base[:1], (8, 1))
print("vanilla grad norm at a constant batch:", np.linalg.norm(loss_vanilla(flat, policy).grad_z))

# %% Central finite differences against the analytic gradient (B held fixed)
out = loss_bam(z, policy)
eps, fd = 1e-5, np.zeros_like(z)
for idx in np.ndindex(z.shape):
    zp, zm = z.copy(), z.copy()
    zp[idx] += eps
    zm[idx] -= eps
    fd[idx] = (loss_bam(zp, policy, target=out.target).value
               - loss_bam(zm, policy, target=out.target).value) / (2 * eps)
print("max relative error:", np.abs(fd - out.grad_z).max() / np.abs(fd).max())
