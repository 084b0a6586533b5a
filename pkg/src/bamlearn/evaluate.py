"""Representation quality: k-means with NMI / ARI, and a linear probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .errors import ConfigError, UsageError


@dataclass
class ClusterResult:
    assignments: np.ndarray
    nmi: float
    ari: float
    inertia: float


@dataclass
class KMeansResult:
    assignments: np.ndarray
    inertia: float
    centers: np.ndarray
    inertia_trace: list


@dataclass
class ProbeResult:
    accuracy: float
    per_class_accuracy: np.ndarray
    loss_trace: list


def _sq_dists(x, centers):
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)


def _kmeans_pp(x, k, rng):
    centers = [x[rng.integers(x.shape[0])]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(x.shape[0])
        else:
            idx = rng.choice(x.shape[0], p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(x, centers, max_iters):
    k = centers.shape[0]
    assign = None
    trace = []
    for _ in range(max_iters):
        d = _sq_dists(x, centers)
        new = d.argmin(axis=1)
        inertia = float(d[np.arange(x.shape[0]), new].sum())
        if trace and inertia > trace[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError("k-means inertia increased between iterations")
        trace.append(inertia)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        centers = centers.copy()
        for c in range(k):
            members = assign == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
            else:
                # re-seed from the point farthest from its current center
                far = int(d[np.arange(x.shape[0]), assign].argmax())
                centers[c] = x[far]
                assign[far] = c
    d = _sq_dists(x, centers)
    assign = d.argmin(axis=1)
    inertia = float(d[np.arange(x.shape[0]), assign].sum())
    return assign, inertia, centers, trace


def kmeans(h, k: int, restarts: int = 10, max_iters: int = 300, seed: int = 0) -> KMeansResult:
    """Best-of-``restarts`` Lloyd iterations from k-means++ seeds (ties go to the earliest restart)."""
    x = np.asarray(h, dtype=np.float64)
    if k < 1 or k > x.shape[0]:
        raise UsageError(f"k={k} must lie in [1, {x.shape[0]}]")
    if restarts < 1:
        raise UsageError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = stream(seed, "eval", r)
        res = _lloyd(x, _kmeans_pp(x, k, rng), max_iters)
        if best is None or res[1] < best[1]:
            best = res
    return KMeansResult(*best)


def _check_pair(pred, truth, min_len):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise UsageError("label vectors must be 1-D and of equal length")
    if pred.size < min_len:
        raise UsageError(f"need at least {min_len} labels")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information normalized by the arithmetic mean of the two entropies."""
    pred, truth = _check_pair(pred, truth, 1)
    table = contingency(pred, truth)
    hp, ht = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if hp == 0 and ht == 0:
        return 1.0
    if hp == 0 or ht == 0:
        return 0.0
    total = table.sum()
    pij = table / total
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / total**2
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    return float(min(max(mi / ((hp + ht) / 2), 0.0), 1.0))


def ari(pred, truth) -> float:
    pred, truth = _check_pair(pred, truth, 2)
    table = contingency(pred, truth)
    comb = lambda x: x * (x - 1) / 2  # noqa: E731
    sum_ij = comb(table).sum()
    sum_a = comb(table.sum(axis=1)).sum()
    sum_b = comb(table.sum(axis=0)).sum()
    total = comb(pred.size)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def cluster(h, labels, num_classes: int, restarts: int = 10, seed: int = 0) -> ClusterResult:
    res = kmeans(h, num_classes, restarts=restarts, seed=seed)
    return ClusterResult(res.assignments, nmi(res.assignments, labels),
                         ari(res.assignments, labels), res.inertia)


def _probe_loss_grad(w, b, x, y_onehot, l2):
    logits = x @ w + b
    logits -= logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    m = x.shape[0]
    loss = -float((y_onehot * logp).sum()) / m + l2 * float((w * w).sum())
    d = (np.exp(logp) - y_onehot) / m
    return loss, x.T @ d + 2 * l2 * w, d.sum(axis=0)


def linear_probe(h_train, y_train, h_test, y_test, l2: float = 1e-4, epochs: int = 500,
                 lr: float = 0.5, seed: int = 0) -> ProbeResult:
    """Multinomial logistic regression by full-batch gradient descent.

    Features are standardized with training statistics and the step size is
    capped by the objective's smoothness constant.  If the training
    loss rises after warm-up the step size is halved and the step retried,
    so the recorded loss trace is non-increasing from step 10 on.
    """
    h_train = np.asarray(h_train, dtype=np.float64)
    h_test = np.asarray(h_test, dtype=np.float64)
    y_train, y_test = np.asarray(y_train), np.asarray(y_test)
    if h_train.shape[1] != h_test.shape[1]:
        raise ConfigError("train and test features differ in width")
    classes = np.unique(np.concatenate([y_train, y_test]))
    missing = set(classes.tolist()) - set(np.unique(y_train).tolist())
    if missing:
        raise ConfigError(f"classes absent from training data: {sorted(missing)}")
    mu, sd = h_train.mean(axis=0), h_train.std(axis=0)
    sd[sd == 0] = 1.0
    xtr, xte = (h_train - mu) / sd, (h_test - mu) / sd
    c = int(classes.max()) + 1
    y1 = np.eye(c)[y_train]
    rng = stream(seed, "eval", 1_000_003)
    w = 1e-3 * rng.standard_normal((xtr.shape[1], c))
    b = np.zeros(c)
    loss, gw, gb = _probe_loss_grad(w, b, xtr, y1, l2)
    trace = [loss]
    # softmax cross-entropy has curvature <= 1/2 per unit of feature variance, so
    # this cap keeps plain gradient descent stable even under heavy l2
    lip = 0.5 * (np.linalg.norm(xtr, 2) ** 2 / xtr.shape[0] + 1.0) + 2 * l2
    step = min(lr, 1.0 / lip)
    for epoch in range(epochs):
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            new_loss, ngw, ngb = _probe_loss_grad(w_new, b_new, xtr, y1, l2)
            if epoch < 10 or new_loss <= loss or step < 1e-12:
                break
            step /= 2
        w, b, loss, gw, gb = w_new, b_new, new_loss, ngw, ngb
        trace.append(loss)
    pred = (xte @ w + b).argmax(axis=1)
    correct = pred == y_test
    per_class = np.array([correct[y_test == cl].mean() if (y_test == cl).any() else np.nan
                          for cl in range(c)])
    return ProbeResult(float(correct.mean()), per_class, trace)
