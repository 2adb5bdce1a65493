"""Seeded synthetic datasets for benchmarks and end-to-end tests."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .formats import LabelSet


def two_moons(n: int, noise: float = 0.1, seed: int = 0):
    """Two interleaving half circles; returns (X (n, 2), y (n,))."""
    if n < 4:
        raise ConfigError("two_moons needs n >= 4")
    rng = np.random.default_rng(seed)
    n0 = (n + 1) // 2
    n1 = n - n0
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    outer = np.column_stack([np.cos(t0), np.sin(t0)])
    inner = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.vstack([outer, inner]) + rng.normal(0.0, noise, size=(n, 2))
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return x, y


def blobs(n: int, classes: int = 4, noise: float = 1.0, sep: float = 6.0, dim: int = 2, seed: int = 0):
    """Gaussian blobs with centers evenly spaced on a circle of radius ``sep``."""
    if classes < 2 or n < classes or dim < 2:
        raise ConfigError("blobs needs classes >= 2, n >= classes, dim >= 2")
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(classes) / classes
    centers = np.zeros((classes, dim))
    centers[:, 0] = sep * np.cos(angles)
    centers[:, 1] = sep * np.sin(angles)
    counts = np.full(classes, n // classes)
    counts[: n % classes] += 1
    y = np.repeat(np.arange(classes, dtype=np.int64), counts)
    x = centers[y] + rng.normal(0.0, noise, size=(n, dim))
    return x, y


def sample_labels(truth, per_class: int, seed: int = 0, num_classes: int | None = None) -> LabelSet:
    """Stratified seeded pick of ``per_class`` labeled nodes per class."""
    truth = np.asarray(truth, dtype=np.int64)
    c = num_classes if num_classes is not None else int(truth.max()) + 1
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    pairs = []
    for cls in range(c):
        ids = np.nonzero(truth == cls)[0]
        if len(ids) < per_class:
            raise ConfigError(f"class {cls} has {len(ids)} nodes, cannot label {per_class}")
        pick = ids[rng.permutation(len(ids))[:per_class]]
        pairs.extend((int(i), cls) for i in pick)
    pairs.sort()
    return LabelSet(n=len(truth), num_classes=c, labeled=tuple(pairs))
