"""Harden scores into labels and weight pseudo-labels by entropy certainty.

A score row is turned into a probability vector by shifting to
non-negativity (subtract the row minimum when any entry is negative) and
normalizing by the sum; the certainty is 1 - M(p)/ln(C) with M the Shannon
entropy, so a uniform row scores 0 and a one-hot row scores 1. Natural logs
throughout; any common base cancels in the ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonFiniteError
from .formats import LabelSet, atomic_write_text


def harden_labels(h) -> np.ndarray:
    """Row argmax, ties broken toward the smallest class index."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise ConfigError(f"score matrix must be 2-D, got shape {h.shape}")
    if h.size and not np.isfinite(h).all():
        raise NonFiniteError("score matrix has non-finite entries")
    if h.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return h.argmax(axis=1).astype(np.int64)


def certainty_weights(h) -> np.ndarray:
    """Per-row certainty xi in [0, 1] for an (n, C) score matrix."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] < 2:
        raise ConfigError(f"need an (n, C) matrix with C >= 2, got shape {h.shape}")
    if h.size and not np.isfinite(h).all():
        raise NonFiniteError("score matrix has non-finite entries")
    mins = h.min(axis=1, keepdims=True)
    shifted = h - np.minimum(mins, 0.0)
    sums = shifted.sum(axis=1)
    xi = np.zeros(h.shape[0])
    ok = sums > 0
    if ok.any():
        p = shifted[ok] / sums[ok, None]
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        entropy = -plogp.sum(axis=1)
        xi[ok] = 1.0 - entropy / np.log(h.shape[1])
    # uniform rows (all entries equal, with or without spread) are exactly 0;
    # the explicit zeroing avoids ~1e-16 residue from log(1/C) != -log(C)
    xi[(shifted == shifted[:, :1]).all(axis=1)] = 0.0
    return np.clip(xi, 0.0, 1.0)


def entropy_certainty(row, num_classes: int | None = None) -> float:
    """Scalar certainty for one score row."""
    row = np.asarray(row, dtype=np.float64).ravel()
    c = num_classes if num_classes is not None else len(row)
    if c < 2:
        raise ConfigError(f"need at least 2 classes, got {c}")
    if len(row) != c:
        raise ConfigError(f"row has {len(row)} entries, expected {c}")
    return float(certainty_weights(row[None, :])[0])


@dataclass(frozen=True)
class PseudoLabelSet:
    """Inferred labels and certainty weights covering exactly the unlabeled ids."""

    ids: np.ndarray
    labels: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not (ids.shape == labels.shape == weights.shape) or ids.ndim != 1:
            raise ConfigError("ids, labels, weights must be equal-length 1-D arrays")
        if ids.size and len(np.unique(ids)) != len(ids):
            raise ConfigError("duplicate pseudo-label id")
        if weights.size and ((weights < 0).any() or (weights > 1).any()):
            raise ConfigError("certainty weights must lie in [0, 1]")
        order = np.argsort(ids)
        object.__setattr__(self, "ids", ids[order])
        object.__setattr__(self, "labels", labels[order])
        object.__setattr__(self, "weights", weights[order])

    def __len__(self) -> int:
        return len(self.ids)


def extract_pseudo_labels(h, labels: LabelSet, balance: bool = False) -> PseudoLabelSet:
    """Pseudo-labels with certainty weights for every unlabeled node.

    With ``balance`` on, each weight is scaled by (n_u / C) divided by its
    pseudo-class population and re-clamped to [0, 1], damping classes the
    diffusion over-assigns.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] != labels.n:
        raise ConfigError(f"score matrix covers {h.shape[0]} nodes, labels expect {labels.n}")
    unlabeled = labels.unlabeled_ids()
    if len(unlabeled) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return PseudoLabelSet(ids=empty, labels=empty.copy(), weights=np.zeros(0))
    yhat = harden_labels(h)[unlabeled]
    xi = certainty_weights(h)[unlabeled]
    if balance:
        counts = np.bincount(yhat, minlength=h.shape[1]).astype(np.float64)
        target = len(unlabeled) / h.shape[1]
        factor = np.ones_like(counts)
        nonzero = counts > 0
        factor[nonzero] = target / counts[nonzero]
        xi = np.clip(xi * factor[yhat], 0.0, 1.0)
    return PseudoLabelSet(ids=unlabeled, labels=yhat, weights=xi)


def write_pseudo_labels(ps: PseudoLabelSet, path) -> None:
    """Serialize as the ``id,label,weight`` CSV the extractor protocol consumes."""
    lines = ["id,label,weight"]
    lines.extend(
        f"{i},{y},{format(w, '.9g')}" for i, y, w in zip(ps.ids, ps.labels, ps.weights)
    )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_pseudo_labels(path) -> PseudoLabelSet:
    from .errors import LabelsError

    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "id,label,weight":
        raise LabelsError(f"{path}: expected 'id,label,weight' header")
    ids, labels, weights = [], [], []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise LabelsError(f"{path}:{ln}: expected 'id,label,weight', got {line!r}")
        try:
            ids.append(int(parts[0]))
            labels.append(int(parts[1]))
            weights.append(float(parts[2]))
        except ValueError:
            raise LabelsError(f"{path}:{ln}: malformed row {line!r}")
    return PseudoLabelSet(
        ids=np.array(ids, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        weights=np.array(weights),
    )
