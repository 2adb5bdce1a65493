"""p=2 label diffusion: solve (I - alpha*S) H = Y.

Two interchangeable solvers: a sparse-LU closed form (small/medium n) and
the fixed-point iteration ``H <- alpha*S*H + Y``, which converges because the
spectral radius of alpha*S is strictly below 1 for alpha in [0, 1). There is
deliberately no (1 - alpha) prefactor: positive scaling of H cannot change
argmax labels, so the two conventions predict identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, NonConvergenceError, SolverError
from .formats import LabelSet

DENSE_SOLVE_CAP = 5000
_CLOSED_FORM_RESIDUAL = 1e-10


@dataclass(frozen=True)
class DiffusionConfig:
    """Knobs for the fixed-point solver."""

    alpha: float = 0.99
    tol: float = 1e-8
    max_iter: int = 10000

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")


@dataclass(frozen=True)
class IterationReport:
    iterations: int
    residual: float


def seed_matrix(labels: LabelSet) -> np.ndarray:
    """One-hot (n, C) matrix: labeled rows one-hot, unlabeled rows zero."""
    y = np.zeros((labels.n, labels.num_classes), dtype=np.float64)
    y[labels.labeled_ids, labels.labels] = 1.0
    return y


def _check_system(s, y, alpha):
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"alpha must lie in [0, 1), got {alpha}")
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] != s.shape[0]:
        raise ConfigError(f"seed matrix shape {y.shape} does not match operator {s.shape}")
    return y


def diffuse_closed_form(s, y, alpha: float, cap: int = DENSE_SOLVE_CAP) -> np.ndarray:
    """Direct solve of (I - alpha*S) H = Y via sparse LU."""
    y = _check_system(s, y, alpha)
    n = s.shape[0]
    if n > cap:
        raise ConfigError(f"n={n} exceeds the direct-solve cap {cap}; use diffuse_iterative")
    if alpha == 0.0:
        return y.copy()
    a = (sp.identity(n, format="csc") - alpha * s.tocsc()).tocsc()
    try:
        h = spla.splu(a).solve(y)
    except RuntimeError as e:  # factorization failure; cannot occur for alpha < 1
        raise SolverError(f"direct solve failed: {e}") from e
    residual = np.linalg.norm(a @ h - y) / max(np.linalg.norm(y), 1.0)
    if residual > _CLOSED_FORM_RESIDUAL:
        raise SolverError(f"direct solve residual {residual:.3e} exceeds {_CLOSED_FORM_RESIDUAL}")
    # Neumann-series nonnegativity can be violated by ~1e-18 rounding; clamp.
    if (y >= 0).all():
        np.maximum(h, 0.0, out=h)
    return h


def diffuse_iterative(s, y, cfg: DiffusionConfig = DiffusionConfig()):
    """Fixed-point iteration H <- alpha*S*H + Y from H_0 = Y.

    Terminates when the relative update ||H_{t+1} - H_t||_F / ||H_t||_F drops
    below ``cfg.tol``; returns (H, IterationReport). Raises carrying the last
    iterate if ``cfg.max_iter`` is exhausted.
    """
    y = _check_system(s, y, cfg.alpha)
    h = y.copy()
    residual = np.inf
    for it in range(1, cfg.max_iter + 1):
        h_next = cfg.alpha * (s @ h) + y
        num = np.linalg.norm(h_next - h)
        den = max(np.linalg.norm(h), np.finfo(np.float64).tiny)
        h = h_next
        residual = num / den
        if residual <= cfg.tol:
            return h, IterationReport(iterations=it, residual=float(residual))
    raise NonConvergenceError(
        f"no convergence after {cfg.max_iter} iterations (residual {residual:.3e})",
        last_iterate=h,
        residual=float(residual),
        iterations=cfg.max_iter,
    )


def fixed_point_residual(s, y, alpha: float, h) -> float:
    """||H - (alpha*S*H + Y)||_F / ||H||_F, the invariant every output obeys."""
    h = np.asarray(h, dtype=np.float64)
    num = np.linalg.norm(h - (alpha * (s @ h) + np.asarray(y, dtype=np.float64)))
    return float(num / max(np.linalg.norm(h), np.finfo(np.float64).tiny))


@dataclass(frozen=True)
class AlphaSelection:
    alpha: float
    table: tuple[tuple[float, float], ...]  # (alpha, holdout accuracy), grid order


def _stratified_split(labels: LabelSet, holdout_fraction: float, seed: int):
    """Per-class seeded split into (seed LabelSet, holdout ids, holdout classes)."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ConfigError(f"holdout fraction must lie in (0, 1), got {holdout_fraction}")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, c in labels.labeled:
        by_class.setdefault(c, []).append(i)
    seed_ids, hold_ids, hold_classes = [], [], []
    for c in sorted(by_class):
        ids = np.array(sorted(by_class[c]), dtype=np.int64)
        if len(ids) < 2:
            raise ConfigError(
                f"class {c} has only {len(ids)} labeled node(s); holdout would leave it with no seeds"
            )
        n_hold = int(round(len(ids) * holdout_fraction))
        n_hold = min(max(n_hold, 1), len(ids) - 1)
        perm = rng.permutation(len(ids))
        hold = ids[perm[:n_hold]]
        hold_ids.extend(int(i) for i in hold)
        hold_classes.extend([c] * len(hold))
        seed_ids.extend(int(i) for i in ids[perm[n_hold:]])
    return labels.restricted_to(seed_ids), np.array(hold_ids), np.array(hold_classes)


def select_alpha(
    s,
    labels: LabelSet,
    grid,
    holdout_fraction: float = 0.25,
    seed: int = 0,
    cfg: DiffusionConfig | None = None,
) -> AlphaSelection:
    """Grid-search alpha on a stratified holdout split of the labeled set.

    Returns the alpha maximizing holdout accuracy, ties broken toward the
    smaller value, along with the full (alpha, accuracy) table.
    """
    grid = [float(a) for a in grid]
    if not grid:
        raise ConfigError("alpha grid is empty")
    for a in grid:
        if not 0.0 <= a < 1.0:
            raise ConfigError(f"grid value {a} outside [0, 1)")
    seeds, hold_ids, hold_classes = _stratified_split(labels, holdout_fraction, seed)
    y = seed_matrix(seeds)
    base = cfg or DiffusionConfig()
    table = []
    for a in sorted(set(grid)):
        if s.shape[0] <= DENSE_SOLVE_CAP:
            h = diffuse_closed_form(s, y, a)
        else:
            h, _ = diffuse_iterative(s, y, DiffusionConfig(alpha=a, tol=base.tol, max_iter=base.max_iter))
        pred = h[hold_ids].argmax(axis=1)
        table.append((a, float(np.mean(pred == hold_classes))))
    best_alpha, best_acc = table[0]
    for a, acc in table[1:]:
        if acc > best_acc:
            best_alpha, best_acc = a, acc
    return AlphaSelection(alpha=best_alpha, table=tuple(table))
