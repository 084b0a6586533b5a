"""Balancing a similarity kernel with Sinkhorn-Knopp.

Run with ``python notebooks/01_sinkhorn_balancing.py``.
"""

# %% Random latents and their masked similarity matrix
import numpy as np

from bamlearn.attention import cosine_similarity, mask_positives, softmax_rows
from bamlearn.balancing import entropy_report, sinkhorn_balance

n, k, d = 32, 2, 32
z = np.random.default_rng(0).standard_normal((n * k, d))
s_hat = mask_positives(cosine_similarity(z, n))
print("masked similarity:", s_hat.values.shape, "symmetric:", np.array_equal(s_hat.values, s_hat.values.T))

# %% Convergence of the marginals, plain versus over-relaxed updates
for w in (1.0, 1.7):
    bal = sinkhorn_balance(s_hat, 0.05, record=True, relaxation=w)
    print(f"relaxation {w}: {bal.iterations_used} iterations, "
          f"final marginal error {bal.marginal_error:.2e}")
    print("   first errors:", " ".join(f"{e:.1e}" for e in bal.history[:6]))

# %% The first row normalization is the ordinary row softmax
bal = sinkhorn_balance(s_hat, 0.1, keep_first=True)
gap = np.abs(bal.first_row_pass - softmax_rows(s_hat, 0.1).values).max()
print("max |first row pass - softmax| =", gap)

# %% B is symmetric and lower-entropy than A when tau_B < tau
b = sinkhorn_balance(s_hat, 0.05)
print("max |B - B^T| =", np.abs(b.values - b.values.T).max())
for tau_b in (0.02, 0.05, 0.1):
    rep = entropy_report(softmax_rows(s_hat, 0.1), sinkhorn_balance(s_hat, tau_b))
    print(f"tau_B={tau_b}: mean row entropy A={rep.mean_row_entropy_A:.3f} "
          f"B={rep.mean_row_entropy_B:.3f} (ceiling log(nk)={np.log(n * k):.3f})")
