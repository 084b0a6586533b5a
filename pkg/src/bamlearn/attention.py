"""Global cosine-similarity matrix, positive masking and row softmax.

Rows and columns index the ``n * k`` views in view-major order, so two
entries belong to the same image exactly when their indices agree mod ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError, UsageError

MASK_MODES = ("zero", "neg_inf")
_CHUNK = 64


@dataclass
class SimMatrix:
    values: np.ndarray
    n: int
    k: int
    masked: bool = False
    mask_mode: str | None = None

    @property
    def size(self) -> int:
        return self.n * self.k


@dataclass
class AttnMatrix:
    values: np.ndarray
    temperature: float
    # log-probabilities, kept for stable cross-entropy; -inf where values == 0
    log_values: np.ndarray | None = None
    # column groups the softmax was normalized over (one group = global)
    groups: tuple[slice, ...] = ()


def normalize_rows(z: np.ndarray):
    """Return ``(u, norms)`` with unit rows; zero rows raise :class:`NumericalError`."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", z, z))
    bad = np.flatnonzero(~(norms > 0))
    if bad.size:
        raise NumericalError(f"latent row {int(bad[0])} has zero norm")
    return z / norms[:, None], norms


def _pairwise_dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Elementwise products reduced along a contiguous axis: entry (p, q) depends
    # only on rows u[p], v[q], so sim(Z, Z) is exactly symmetric and bit-equal
    # to the cross-similarity of two equal latent sets.
    out = np.empty((u.shape[0], v.shape[0]))
    for s in range(0, u.shape[0], _CHUNK):
        out[s:s + _CHUNK] = (u[s:s + _CHUNK, None, :] * v[None, :, :]).sum(axis=-1)
    return out


def _check_layout(num_rows: int, n: int):
    if n < 1 or num_rows % n:
        raise UsageError(f"{num_rows} rows cannot be split into blocks of n={n}")
    return num_rows // n


def cosine_similarity(z, n: int) -> SimMatrix:
    u, _ = normalize_rows(z)
    k = _check_layout(u.shape[0], n)
    s = _pairwise_dot(u, u)
    np.fill_diagonal(s, 1.0)
    return SimMatrix(s, n, k)


def cross_similarity(z, z_other, n: int) -> SimMatrix:
    """``sim(Z, Z')`` with rows from ``z`` and columns from ``z_other``."""
    u, _ = normalize_rows(z)
    v, _ = normalize_rows(z_other)
    if u.shape != v.shape:
        raise UsageError(f"latent sets differ in shape: {u.shape} vs {v.shape}")
    k = _check_layout(u.shape[0], n)
    return SimMatrix(_pairwise_dot(u, v), n, k)


def positive_mask(n: int, k: int) -> np.ndarray:
    """Boolean ``nk x nk`` mask of same-image entries (row == col mod n), diagonal included."""
    idx = np.arange(n * k) % n
    return idx[:, None] == idx[None, :]


def mask_positives(s: SimMatrix, mode: str = "zero") -> SimMatrix:
    if s.masked:
        raise UsageError("similarity matrix is already masked")
    if mode not in MASK_MODES:
        raise UsageError(f"mask mode must be one of {MASK_MODES}, got {mode!r}")
    vals = s.values.copy()
    vals[positive_mask(s.n, s.k)] = 0.0 if mode == "zero" else -np.inf
    return replace(s, values=vals, masked=True, mask_mode=mode)


def exclude_diagonal(s: SimMatrix) -> SimMatrix:
    """Set self-pairs to -inf (the contrastive baseline's source logits)."""
    vals = s.values.copy()
    np.fill_diagonal(vals, -np.inf)
    return replace(s, values=vals)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        row = int(np.flatnonzero(~np.isfinite(m[:, 0]))[0])
        raise NumericalError(f"softmax row {row} has no finite entry")
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_rows(s: SimMatrix | np.ndarray, temperature: float) -> AttnMatrix:
    """One softmax over each full ``nk``-wide row, at the given temperature."""
    if not temperature > 0:
        raise UsageError("temperature must be positive")
    vals = s.values if isinstance(s, SimMatrix) else np.asarray(s, dtype=np.float64)
    logp = _log_softmax(vals / temperature)
    return AttnMatrix(np.exp(logp), temperature, logp, (slice(0, vals.shape[1]),))


def softmax_blocks(s: SimMatrix, temperature: float) -> AttnMatrix:
    """Softmax separately inside each ``n``-wide column block, scaled by ``1/k``.

    The local-normalization alternative: every block row is a distribution,
    and the ``1/k`` factor keeps each full row summing to one.
    """
    if not temperature > 0:
        raise UsageError("temperature must be positive")
    n, k = s.n, s.k
    logp = np.empty_like(s.values)
    groups = tuple(slice(j * n, (j + 1) * n) for j in range(k))
    for g in groups:
        logp[:, g] = _log_softmax(s.values[:, g] / temperature)
    logp -= np.log(k)
    return AttnMatrix(np.exp(logp), temperature, logp, groups)


def row_entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy of each row, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def dump_csv(matrix, path, n: int, k: int, tau: float, masked: str | None):
    """Write a square matrix as CSV preceded by a one-line ``# n=.. k=.. tau=.. masked=..`` header."""
    vals = matrix.values if hasattr(matrix, "values") else np.asarray(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={n} k={k} tau={tau} masked={masked or 'none'}\n")
        np.savetxt(fh, vals, delimiter=",", fmt="%.17g")
