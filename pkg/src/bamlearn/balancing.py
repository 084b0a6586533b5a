"""Sinkhorn-Knopp balancing of the similarity kernel and entropy accounting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .attention import AttnMatrix, SimMatrix, row_entropy
from .errors import UsageError

log = logging.getLogger(__name__)

TRAIN_MAX_ITERS = 5
TRAIN_TOL = 1e-3
DIAG_MAX_ITERS = 100
DIAG_TOL = 1e-6
# plain iterations during training; over-relaxed when true convergence is demanded
TRAIN_RELAXATION = 1.0
DIAG_RELAXATION = 1.7


@dataclass
class BalancedMatrix:
    values: np.ndarray
    target_temperature: float
    iterations_used: int
    marginal_error: float
    converged: bool
    # per-iteration max marginal error, populated when requested
    history: list = field(default_factory=list)
    # the kernel right after the first row normalization, when requested
    first_row_pass: np.ndarray | None = None

    @property
    def warning(self) -> bool:
        return not self.converged


def _kernel(vals: np.ndarray, tau: float) -> np.ndarray:
    finite = np.isfinite(vals)
    if not finite.any():
        raise UsageError("similarity matrix has no finite entry")
    m = vals[finite].max()
    # exp(-inf) == 0 keeps fully masked entries at exactly zero
    return np.exp((vals - m) / tau)


def _marginal_error(kmat: np.ndarray) -> float:
    return max(float(np.abs(kmat.sum(axis=1) - 1.0).max()),
               float(np.abs(kmat.sum(axis=0) - 1.0).max()))


def sinkhorn_matrix(vals, tau, max_iters, tol, record=False, keep_first=False, relaxation=1.0):
    """Balance ``exp(vals / tau)`` by alternating row then column normalization.

    The scalings are updated as ``u <- u**(1 - w) * u_new**w``; ``w = 1`` is plain
    Sinkhorn-Knopp, ``1 < w < 2`` over-relaxes towards the same fixed point. The
    first iteration is always plain, so its row pass is the row softmax.
    """
    if not tau > 0:
        raise UsageError("target_temperature must be positive")
    if not tol > 0 or max_iters < 1:
        raise UsageError("need tol > 0 and max_iters >= 1")
    if not 0 < relaxation < 2:
        raise UsageError("relaxation must lie in (0, 2)")
    kernel = _kernel(np.asarray(vals, dtype=np.float64), tau)
    u = np.ones(kernel.shape[0])
    v = np.ones(kernel.shape[1])
    history, first = [], None
    err, it, bmat = np.inf, 0, kernel
    for it in range(1, max_iters + 1):
        w = 1.0 if it == 1 else relaxation
        u_new = 1.0 / (kernel @ v)
        u = u_new if w == 1.0 else u ** (1 - w) * u_new ** w
        if it == 1 and keep_first:
            first = u[:, None] * kernel * v[None, :]
        v_new = 1.0 / (u @ kernel)
        v = v_new if w == 1.0 else v ** (1 - w) * v_new ** w
        bmat = u[:, None] * kernel * v[None, :]
        err = _marginal_error(bmat)
        if record:
            history.append(err)
        if err <= tol:
            break
    return BalancedMatrix(bmat, tau, it, err, err <= tol, history, first)


def sinkhorn_balance(s: SimMatrix | np.ndarray, target_temperature: float,
                     max_iters: int = DIAG_MAX_ITERS, tol: float = DIAG_TOL,
                     record: bool = False, keep_first: bool = False,
                     relaxation: float = DIAG_RELAXATION) -> BalancedMatrix:
    """Doubly-stochastic matrix closest (in KL) to ``exp(S / target_temperature)``.

    Non-convergence within ``max_iters`` is reported through ``converged``
    rather than raised.
    """
    vals = s.values if isinstance(s, SimMatrix) else s
    out = sinkhorn_matrix(vals, target_temperature, max_iters, tol, record, keep_first, relaxation)
    if not out.converged:
        log.debug("sinkhorn stopped at %d iterations, marginal error %.3g",
                  out.iterations_used, out.marginal_error)
    return out


def sinkhorn_blocks(s: SimMatrix, target_temperature: float, max_iters: int = DIAG_MAX_ITERS,
                    tol: float = DIAG_TOL, relaxation: float = DIAG_RELAXATION) -> BalancedMatrix:
    """Balance each ``n x n`` block separately, then scale by ``1/k`` so rows and columns sum to one."""
    n, k = s.n, s.k
    out = np.empty_like(s.values)
    worst, iters, ok = 0.0, 0, True
    for a in range(k):
        for b in range(k):
            blk = sinkhorn_matrix(s.values[a * n:(a + 1) * n, b * n:(b + 1) * n],
                                  target_temperature, max_iters, tol, relaxation=relaxation)
            out[a * n:(a + 1) * n, b * n:(b + 1) * n] = blk.values / k
            worst = max(worst, blk.marginal_error)
            iters = max(iters, blk.iterations_used)
            ok &= blk.converged
    return BalancedMatrix(out, target_temperature, iters, worst, ok)


@dataclass
class EntropyReport:
    mean_row_entropy_A: float
    mean_row_entropy_B: float
    matrix_entropy: float


def matrix_entropy(m: np.ndarray) -> float:
    """``h(M) = -sum m log m`` over all entries."""
    return float(row_entropy(np.asarray(m).reshape(1, -1))[0])


def entropy_report(a: AttnMatrix | np.ndarray, b: BalancedMatrix | np.ndarray) -> EntropyReport:
    av = a.values if isinstance(a, AttnMatrix) else np.asarray(a)
    bv = b.values if isinstance(b, BalancedMatrix) else np.asarray(b)
    if av.shape != bv.shape:
        raise UsageError("A and B shapes differ")
    if (av < 0).any() or (bv < 0).any():
        raise UsageError("entropy of a matrix with negative entries")
    return EntropyReport(float(row_entropy(av).mean()), float(row_entropy(bv).mean()),
                         matrix_entropy(bv))


def ot_objective(s: SimMatrix | np.ndarray, b, temperature: float) -> float:
    """Entropy-regularized transport objective ``<-S, B> - temperature * h(B)``."""
    sv = s.values if isinstance(s, SimMatrix) else np.asarray(s, dtype=np.float64)
    bv = b.values if isinstance(b, BalancedMatrix) else np.asarray(b, dtype=np.float64)
    if sv.shape != bv.shape:
        raise UsageError(f"shape mismatch {sv.shape} vs {bv.shape}")
    if (bv < 0).any():
        raise UsageError("transport plan must be non-negative")
    support = bv > 0
    return float(-(sv[support] * bv[support]).sum() - temperature * matrix_entropy(bv))
