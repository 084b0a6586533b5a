"""Synthetic datasets and stochastic view sampling.

The augmentation family here (additive noise, scale jitter, coordinate
dropout, planar rotation) is our own construction for vector data; it plays
the role image augmentations play for pixels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .errors import ConfigError, DataError


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 2:
            raise DataError("points must be a 2-D matrix")
        if self.labels.shape != (self.points.shape[0],):
            raise DataError("labels must have one entry per point")
        if not np.all(np.isfinite(self.points)):
            raise DataError("points contain non-finite entries")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        present = np.unique(self.labels)
        if present.size != self.num_classes:
            missing = sorted(set(range(self.num_classes)) - set(present.tolist()))
            raise DataError(f"classes without points: {missing}")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.points[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class AugmentSpec:
    noise_sigma: float = 0.0
    scale_range: tuple[float, float] = (1.0, 1.0)
    dropout_prob: float = 0.0
    rotate_angle_max: float = 0.0

    def __post_init__(self):
        lo, hi = self.scale_range
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0 < lo <= hi:
            raise ConfigError("scale_range must satisfy 0 < lo <= hi")
        if not 0 <= self.dropout_prob < 1:
            raise ConfigError("dropout_prob must lie in [0, 1)")
        if self.rotate_angle_max < 0:
            raise ConfigError("rotate_angle_max must be >= 0")

    @property
    def is_identity(self) -> bool:
        return (self.noise_sigma == 0 and self.scale_range == (1.0, 1.0)
                and self.dropout_prob == 0 and self.rotate_angle_max == 0)


@dataclass
class ViewBatch:
    """``n * k`` views stacked view-major: row ``j * n + i`` is view j of image i."""

    views: np.ndarray
    n: int
    k: int
    indices: np.ndarray

    def row_of(self, i: int, j: int) -> int:
        if not (0 <= i < self.n and 0 <= j < self.k):
            raise IndexError(f"(i={i}, j={j}) outside n={self.n}, k={self.k}")
        return j * self.n + i


def make_gaussian_mixture(num_classes, per_class, d_in, center_sigma, cluster_sigma, seed):
    """Isotropic Gaussian blobs around centers drawn from N(0, center_sigma^2 I)."""
    if num_classes < 2 or per_class < 1 or d_in < 1:
        raise ConfigError("need num_classes >= 2, per_class >= 1, d_in >= 1")
    if not center_sigma > cluster_sigma > 0:
        raise ConfigError("need center_sigma > cluster_sigma > 0")
    rng = stream(seed, "data")
    centers = rng.normal(0.0, center_sigma, size=(num_classes, d_in))
    labels = np.repeat(np.arange(num_classes), per_class)
    points = centers[labels] + rng.normal(0.0, cluster_sigma, size=(labels.size, d_in))
    return Dataset(points, labels, num_classes)


def make_two_rings(per_class, radii, noise, seed):
    """Two concentric noisy circles in 2-D, labelled by ring."""
    r0, r1 = float(radii[0]), float(radii[1])
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    if not 0 < r0 < r1:
        raise ConfigError("radii must satisfy 0 < r0 < r1")
    if not 0 <= noise < (r1 - r0) / 4:
        raise ConfigError("noise must be below a quarter of the ring gap")
    rng = stream(seed, "data")
    points, labels = [], []
    for c, r in enumerate((r0, r1)):
        theta = rng.uniform(0.0, 2 * np.pi, size=per_class)
        rad = r + noise * rng.standard_normal(per_class)
        points.append(np.column_stack([rad * np.cos(theta), rad * np.sin(theta)]))
        labels.append(np.full(per_class, c))
    return Dataset(np.vstack(points), np.concatenate(labels), 2)


def load_csv(path) -> Dataset:
    """Read a ``label,f0,f1,...`` CSV file.  Malformed rows raise :class:`DataError`."""
    points, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        expected = ["label"] + [f"f{i}" for i in range(len(header) - 1)]
        if [h.strip() for h in header] != expected or len(header) < 2:
            raise DataError(f"{path}:1: header must be 'label,f0,f1,...'")
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}:{line}: expected {width} fields, got {len(row)}")
            try:
                lab = int(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError as e:
                raise DataError(f"{path}:{line}: {e}") from None
            if lab < 0 or not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{line}: negative label or non-finite value")
            labels.append(lab)
            points.append(vals)
    if not points:
        raise DataError(f"{path}: no data rows")
    labels = np.array(labels)
    # relabel to contiguous ids so that every class is present
    uniq, labels = np.unique(labels, return_inverse=True)
    return Dataset(np.array(points), labels, uniq.size)


def save_csv(ds: Dataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"f{i}" for i in range(ds.dim)])
        for lab, row in zip(ds.labels, ds.points):
            w.writerow([int(lab)] + [repr(float(v)) for v in row])


def split_dataset(ds: Dataset, holdout_fraction: float, seed: int):
    """Stratified split into (train, held_out)."""
    if not 0 < holdout_fraction < 1:
        raise ConfigError("holdout_fraction must lie in (0, 1)")
    rng = stream(seed, "data", 1)
    train_idx, test_idx = [], []
    for c in range(ds.num_classes):
        idx = np.flatnonzero(ds.labels == c)
        idx = idx[rng.permutation(idx.size)]
        cut = int(round(idx.size * holdout_fraction))
        if cut == 0 or cut == idx.size:
            raise ConfigError(f"class {c} has too few points to split")
        test_idx.append(idx[:cut])
        train_idx.append(idx[cut:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


def augment(x: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply one independently sampled transformation to a single vector."""
    out = np.array(x, dtype=np.float64, copy=True)
    if spec.is_identity:
        return out
    d = out.size
    if spec.rotate_angle_max > 0 and d >= 2:
        a, b = rng.choice(d, size=2, replace=False)
        theta = rng.uniform(-spec.rotate_angle_max, spec.rotate_angle_max)
        c, s = math.cos(theta), math.sin(theta)
        xa, xb = out[a], out[b]
        out[a], out[b] = c * xa - s * xb, s * xa + c * xb
    lo, hi = spec.scale_range
    if hi > lo or lo != 1.0:
        out *= rng.uniform(lo, hi)
    if spec.dropout_prob > 0:
        out[rng.random(d) < spec.dropout_prob] = 0.0
    if spec.noise_sigma > 0:
        out += rng.normal(0.0, spec.noise_sigma, size=d)
    return out


def sample_views(ds: Dataset, indices, k: int, spec: AugmentSpec, seed: int) -> ViewBatch:
    if k < 2:
        raise ConfigError("k must be >= 2: the loss needs pairs of distinct views")
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1 or indices.size == 0:
        raise ConfigError("indices must be a non-empty vector")
    if indices.min() < 0 or indices.max() >= len(ds):
        raise ConfigError("indices out of range")
    n = indices.size
    rng = stream(seed, "augment")
    views = np.empty((n * k, ds.dim))
    for j in range(k):
        for i, idx in enumerate(indices):
            views[j * n + i] = augment(ds.points[idx], spec, rng)
    return ViewBatch(views, n, k, indices)


def epoch_batches(num_points: int, n: int, epoch: int, seed: int):
    """Batches of a reshuffled epoch, sampled without replacement; a partial tail is dropped."""
    if n > num_points:
        raise ConfigError(f"batch size {n} exceeds dataset size {num_points}")
    perm = stream(seed, "batch", epoch).permutation(num_points)
    return [perm[s:s + n] for s in range(0, num_points - n + 1, n)]
