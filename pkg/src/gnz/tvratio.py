"""p=1 diffusion: nonlocal-TV ratio minimization with labeled-node pins.

For one class the solver minimizes TV(u) / |u| subject to u = +1 on that
class's labeled nodes and u = -1 on every other labeled node, where
TV(u) = sum over edges of w_ij |u_i - u_j| (optionally with a degree
pre-normalization u -> D^{-1} u) and |u| is the l1 norm (optionally
median-centered).

The outer loop linearizes the denominator: with lambda_t the current ratio
and s_t a subgradient of |u_t|, the inner problem

    min_u  TV(u) - lambda_t * <s_t, u>    over the constraint set

is solved by a primal-dual splitting on the weighted incidence operator.
Exact inner solves guarantee a non-increasing ratio; because the inner
solver is iterative, a candidate whose ratio would increase is rejected and
the loop stops at the previous iterate, so emitted ratios are always
monotone. Multi-class output is one-vs-rest, hardened by argmax.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, SolverError
from .formats import LabelSet
from .graph import Graph, degree_vector

_TV_MODES = ("plain", "degree")
_DENOMINATORS = ("l1", "l1-median-centered")


@dataclass(frozen=True)
class L1Config:
    """Solver knobs; step sizes obey tau*sigma*||K||^2 <= step_scale^2 < 1."""

    outer_iters: int = 20
    inner_iters: int = 500
    tol: float = 1e-6
    step_scale: float = 0.99
    tv_normalization: str = "plain"
    denominator: str = "l1"

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ConfigError("iteration counts must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if not 0.0 < self.step_scale < 1.0:
            raise ConfigError("step_scale must lie in (0, 1)")
        if self.tv_normalization not in _TV_MODES:
            raise ConfigError(f"tv_normalization must be one of {_TV_MODES}")
        if self.denominator not in _DENOMINATORS:
            raise ConfigError(f"denominator must be one of {_DENOMINATORS}")


@dataclass
class RatioSolveReport:
    """Outer-iteration trace for one class solve."""

    ratios: list[float]
    outer_accepted: int
    stopped: str


def _edge_arrays(g: Graph):
    coo = sp.triu(g.weights, k=1).tocoo()
    return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(np.float64)


def tv_energy(g: Graph, u, normalization: str = "plain") -> float:
    """Nonlocal total variation: (1/2) sum_ij w_ij |u_i - u_j|.

    ``degree`` mode applies the energy to D^{-1} u instead of u.
    """
    if normalization not in _TV_MODES:
        raise ConfigError(f"normalization must be one of {_TV_MODES}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (g.n,):
        raise ConfigError(f"u has shape {u.shape}, graph has {g.n} nodes")
    if normalization == "degree":
        u = u / degree_vector(g)
    ei, ej, w = _edge_arrays(g)
    return float(np.sum(w * np.abs(u[ei] - u[ej])))


def _denominator(u: np.ndarray, mode: str) -> float:
    if mode == "l1-median-centered":
        return float(np.abs(u - np.median(u)).sum())
    return float(np.abs(u).sum())


def _subgradient(u: np.ndarray, mode: str) -> np.ndarray:
    # sign with the subgradient at 0 taken as 0
    if mode == "l1-median-centered":
        return np.sign(u - np.median(u))
    return np.sign(u)


def ratio_energy(g: Graph, u, cfg: L1Config = L1Config()) -> float:
    """TV(u) / |u|; scale-invariant, the quantity the outer loop drives down."""
    u = np.asarray(u, dtype=np.float64)
    den = _denominator(u, cfg.denominator)
    if den == 0.0:
        raise ConfigError("ratio undefined: denominator |u| is zero")
    return tv_energy(g, u, cfg.tv_normalization) / den


def _incidence(g: Graph, normalization: str) -> sp.csr_matrix:
    """Weighted incidence K: (Ku)_e = w_e (u_i - u_j), one row per edge."""
    ei, ej, w = _edge_arrays(g)
    if normalization == "degree":
        d = degree_vector(g)
        left, right = w / d[ei], w / d[ej]
    else:
        left = right = w
    e = len(w)
    rows = np.concatenate([np.arange(e), np.arange(e)])
    cols = np.concatenate([ei, ej])
    data = np.concatenate([left, -right])
    return sp.coo_matrix((data, (rows, cols)), shape=(e, g.n)).tocsr()


def _operator_norm(k: sp.csr_matrix, iters: int = 100) -> float:
    """Deterministic power-iteration estimate of ||K||, padded 2%.

    The start vector must not be constant: constants span the incidence
    operator's null space.
    """
    n = k.shape[1]
    kt = k.T.tocsr()
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        v = kt @ (k @ v)
        lam = np.linalg.norm(v)
        if lam == 0.0:
            return 1.0
        v /= lam
    return float(np.sqrt(lam) * 1.02)


def _project(u, c_idx, c_val):
    np.clip(u, -1.0, 1.0, out=u)
    u[c_idx] = c_val
    return u


def _inner_pdhg(k, kt, u0, s, lam, c_idx, c_val, tau, sigma, iters, tol):
    """Primal-dual splitting for min_u ||Ku||_1 - lam*<s,u> over the pin set."""
    u = _project(u0.copy(), c_idx, c_val)
    ubar = u.copy()
    y = np.zeros(k.shape[0])
    drift = tau * lam * s
    for _ in range(iters):
        y += sigma * (k @ ubar)
        np.clip(y, -1.0, 1.0, out=y)
        u_new = _project(u - tau * (kt @ y) + drift, c_idx, c_val)
        delta = np.linalg.norm(u_new - u)
        ubar = 2.0 * u_new - u
        u = u_new
        if delta <= tol * max(np.linalg.norm(u), 1.0):
            break
    return u


def _check_constraints(g: Graph, constraints):
    c_idx = np.array([i for i, _ in constraints], dtype=np.int64)
    c_val = np.array([v for _, v in constraints], dtype=np.float64)
    if len(c_idx) == 0:
        raise ConfigError("no constraints given")
    if len(np.unique(c_idx)) != len(c_idx):
        raise ConfigError("duplicate constrained node")
    if c_idx.min() < 0 or c_idx.max() >= g.n:
        raise ConfigError("constrained node outside [0, n)")
    if not np.isin(c_val, (-1.0, 1.0)).all():
        raise ConfigError("constraint values must be +1 or -1")
    if not (c_val > 0).any() or not (c_val < 0).any():
        raise ConfigError("need at least one +1 and one -1 constraint")
    return c_idx, c_val


def minimize_class_ratio(g: Graph, constraints, cfg: L1Config = L1Config()):
    """Ratio-minimization for one class; returns (u, RatioSolveReport).

    ``constraints`` is a list of (node id, value) with values in {+1, -1}.
    Labeled entries sit exactly at their constraint values in the returned
    vector; unlabeled entries lie in [-1, 1].
    """
    c_idx, c_val = _check_constraints(g, constraints)
    k = _incidence(g, cfg.tv_normalization)
    kt = k.T.tocsr()
    norm = _operator_norm(k)
    tau = sigma = cfg.step_scale / norm

    u = _project(np.zeros(g.n), c_idx, c_val)
    lam = ratio_energy(g, u, cfg)
    ratios = [lam]
    stopped = "outer budget exhausted"
    accepted = 0
    for _ in range(cfg.outer_iters):
        s = _subgradient(u, cfg.denominator)
        cand = _inner_pdhg(k, kt, u, s, lam, c_idx, c_val, tau, sigma, cfg.inner_iters, cfg.tol)
        if not np.isfinite(cand).all():
            raise SolverError("inner solver produced non-finite iterate")
        r = ratio_energy(g, cand, cfg)
        if r > lam + 1e-12:
            stopped = "inner candidate would raise the ratio"
            break
        u = cand
        accepted += 1
        ratios.append(r)
        if lam - r <= cfg.tol * max(abs(lam), 1e-12):
            lam = r
            stopped = "ratio converged"
            break
        lam = r
    u[c_idx] = c_val
    return u, RatioSolveReport(ratios=ratios, outer_accepted=accepted, stopped=stopped)


def diffuse_l1(g: Graph, labels: LabelSet, cfg: L1Config = L1Config(), threads: int = 1):
    """One-vs-rest TV-ratio diffusion; returns (ScoreMatrix, per-class reports).

    Column k solves with +1 pins on nodes labeled k and -1 pins on every
    other labeled node; hardening is the row argmax.
    """
    if labels.n != g.n:
        raise ConfigError(f"label set covers {labels.n} nodes, graph has {g.n}")
    present = set(labels.labels.tolist())
    for c in range(labels.num_classes):
        if c not in present:
            raise ConfigError(f"class {c} has no labeled node")

    ids, ys = labels.labeled_ids, labels.labels

    def solve(c: int):
        constraints = [(int(i), 1.0 if y == c else -1.0) for i, y in zip(ids, ys)]
        return minimize_class_ratio(g, constraints, cfg)

    h = np.zeros((g.n, labels.num_classes))
    reports = [None] * labels.num_classes
    if threads > 1 and labels.num_classes > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, range(labels.num_classes)))
    else:
        results = [solve(c) for c in range(labels.num_classes)]
    for c, (u, rep) in enumerate(results):
        h[:, c] = u
        reports[c] = rep
    return h, reports
