"""Accuracy and ROC-AUC scoring against ground truth.

AUC uses the Mann-Whitney formulation with half credit for ties, computed
from tied ranks. All intermediates are dyadic rationals below 2**53, so the
single final division is correctly rounded and the result equals the exact
pairwise-counting value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError


def accuracy(pred, truth) -> float:
    """Fraction of exact matches."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ConfigError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ConfigError("empty input")
    return float(np.mean(pred == truth))


def binary_auc(scores, truth) -> float:
    """P(score_pos > score_neg) + 0.5 * P(tie) over all (pos, neg) pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise ConfigError("scores and truth must be equal-length vectors")
    pos = truth == 1
    n_pos = int(pos.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigError("AUC needs both classes present in truth")
    ranks = rankdata(scores, method="average")
    r_pos = float(ranks[pos].sum())
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class MetricReport:
    """Evaluation summary; ``per_class_auc`` holds None for absent classes."""

    accuracy: float
    per_class_auc: tuple
    macro_auc: float
    n: int
    missing_classes: tuple

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_auc": list(self.per_class_auc),
            "macro_auc": self.macro_auc,
            "n": self.n,
            "missing_classes": list(self.missing_classes),
        }


def macro_auc(h, truth):
    """One-vs-rest AUC per class (column k as score) and their unweighted mean.

    Classes absent from ``truth`` are reported as None and excluded from the
    mean; their indices come back in the second position of the tuple.
    """
    h = np.asarray(h, dtype=np.float64)
    truth = np.asarray(truth)
    if h.ndim != 2 or h.shape[0] != len(truth):
        raise ConfigError(f"score matrix shape {h.shape} does not match truth length {len(truth)}")
    per_class: list[float | None] = []
    missing: list[int] = []
    for c in range(h.shape[1]):
        mask = (truth == c).astype(np.int64)
        if mask.sum() == 0 or mask.sum() == len(truth):
            per_class.append(None)
            missing.append(c)
            continue
        per_class.append(binary_auc(h[:, c], mask))
    present = [a for a in per_class if a is not None]
    if not present:
        raise ConfigError("no class is scorable (every class missing or exhaustive)")
    return per_class, float(np.mean(present)), missing


def evaluate(pred_labels, scores, truth) -> MetricReport:
    """Bundle accuracy plus per-class and macro AUC into one report."""
    per_class, mean_auc, missing = macro_auc(scores, truth)
    return MetricReport(
        accuracy=accuracy(pred_labels, truth),
        per_class_auc=tuple(per_class),
        macro_auc=mean_auc,
        n=len(truth),
        missing_classes=tuple(missing),
    )
