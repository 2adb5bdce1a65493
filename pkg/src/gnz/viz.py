"""Figure rendering for report directories.

Every helper writes a PNG next to the delimited outputs; all use the Agg
backend so they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_projection_scatter(points, labels, path, title="2-D projection") -> None:
    """Scatter an (n, 2) projection colored by hard label."""
    points = np.asarray(points)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(6, 5))
    for c in np.unique(labels):
        mask = labels == c
        ax.scatter(points[mask, 0], points[mask, 1], s=8, label=f"class {c}")
    ax.set_title(title)
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_epoch_metrics(records, path) -> None:
    """Accuracy (when truth is known) and mean certainty across epochs."""
    epochs = [r.epoch for r in records]
    xi = [r.mean_certainty for r in records]
    acc = [r.accuracy_vs_truth for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, xi, marker="o", label="mean certainty")
    if any(a is not None for a in acc):
        ax.plot(epochs, [a if a is not None else np.nan for a in acc], marker="s", label="accuracy")
    ax.set_xlabel("epoch")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="best", fontsize="small")
    ax.set_title("per-epoch pipeline metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_certainty_histogram(weights, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(weights), bins=20, range=(0.0, 1.0), color="#4878a8")
    ax.set_xlabel("certainty")
    ax.set_ylabel("pseudo-labels")
    ax.set_title("pseudo-label certainty")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_class_histogram(hist, path) -> None:
    hist = np.asarray(hist)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(len(hist)), hist, color="#6a9a58")
    ax.set_xlabel("class")
    ax.set_ylabel("pseudo-labels")
    ax.set_title("pseudo-label class histogram")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_alpha_table(table, path) -> None:
    """Holdout accuracy against each grid alpha."""
    alphas = [a for a, _ in table]
    accs = [acc for _, acc in table]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(alphas, accs, marker="o")
    ax.set_xlabel("alpha")
    ax.set_ylabel("holdout accuracy")
    ax.set_ylim(0, 1.05)
    ax.set_title("alpha grid search")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
