"""Symmetric weighted kNN graphs and the normalized diffusion operator.

Construction is exact (all-pairs distances, chunked over query rows) and
deterministic: distance ties are broken toward the smaller node id, the
directed kNN edge set is symmetrized by union with ``w_ij = max(w_ij, w_ji)``,
and weights are rounded to 32-bit precision so the in-memory graph matches
its GNZG file bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import formats
from .errors import ConfigError, GraphError, IsolatedNodeError

_CHUNK = 1024


@dataclass(eq=False)
class Graph:
    """Symmetric weighted adjacency with strictly positive degrees.

    ``weights`` is a CSR matrix with a zero diagonal, exact symmetry, and
    non-negative finite entries. ``report`` carries construction notes
    (duplicate-point fallbacks); it is not part of the persisted format.
    """

    weights: sp.csr_matrix
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        w = self.weights.tocsr()
        w.sort_indices()
        if w.shape[0] != w.shape[1]:
            raise GraphError(f"adjacency must be square, got {w.shape}")
        if w.shape[0] < 2:
            raise GraphError("graph needs at least 2 nodes")
        if w.nnz and not np.isfinite(w.data).all():
            raise GraphError("adjacency has non-finite weights")
        if w.nnz and (w.data < 0).any():
            raise GraphError("adjacency has negative weights")
        if w.diagonal().any():
            raise GraphError("adjacency must have a zero diagonal")
        if (w != w.T).nnz != 0:
            raise GraphError("adjacency must be exactly symmetric")
        self.weights = w
        degree_vector(self)  # raises IsolatedNodeError on zero-degree nodes

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def nnz(self) -> int:
        return self.weights.nnz

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        a, b = self.weights, other.weights
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )


def degree_vector(g: Graph) -> np.ndarray:
    """Row sums d_i = sum_j w_ij; raises naming the node if any is zero."""
    d = np.asarray(g.weights.sum(axis=1)).ravel()
    if (d <= 0).any():
        raise IsolatedNodeError(int(np.nonzero(d <= 0)[0][0]))
    return d


def compute_edge_weights(distances, kernel: str, sigma_i=None, sigma_j=None) -> np.ndarray:
    """Turn edge distances into similarity weights in (0, 1].

    ``gaussian-local`` uses w = exp(-d^2 / (sigma_i * sigma_j)) with the
    per-node scales supplied by the caller. Zero scales arise when duplicate
    points exhaust a neighborhood: exact-duplicate edges (d = 0) fall back to
    weight 1, and a single zero scale borrows the opposite endpoint's scale.
    """
    d = np.asarray(distances, dtype=np.float64)
    if (d < 0).any():
        raise ConfigError("distances must be non-negative")
    if kernel == "binary":
        return np.ones_like(d)
    if kernel != "gaussian-local":
        raise ConfigError(f"unknown kernel {kernel!r}")
    if sigma_i is None or sigma_j is None:
        raise ConfigError("gaussian-local kernel needs sigma_i and sigma_j")
    si = np.asarray(sigma_i, dtype=np.float64)
    sj = np.asarray(sigma_j, dtype=np.float64)
    if (si < 0).any() or (sj < 0).any():
        raise ConfigError("scales must be non-negative")
    si_eff = np.where(si > 0, si, sj)
    sj_eff = np.where(sj > 0, sj, si)
    prod = si_eff * sj_eff
    w = np.ones_like(d)
    far = d > 0
    if (far & (prod == 0)).any():
        raise ConfigError("zero local scale on an edge with positive distance")
    w[far] = np.exp(-d[far] ** 2 / prod[far])
    return w


def _knn_search(x: np.ndarray, k: int, metric: str):
    """Exact kNN: (n, k) neighbor ids and distances, ties to smaller id."""
    n = x.shape[0]
    if metric == "cosine":
        norms = np.linalg.norm(x, axis=1)
        if (norms == 0).any():
            bad = int(np.nonzero(norms == 0)[0][0])
            raise ConfigError(f"cosine metric undefined for zero-norm row {bad}")
        base = x / norms[:, None]
    elif metric == "euclidean":
        base = x
        sq = np.einsum("ij,ij->i", x, x)
    else:
        raise ConfigError(f"unknown metric {metric!r}")

    nbrs = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        if metric == "euclidean":
            d = sq[start:stop, None] + sq[None, :] - 2.0 * (base[start:stop] @ base.T)
            np.maximum(d, 0.0, out=d)
            np.sqrt(d, out=d)
        else:
            d = 1.0 - base[start:stop] @ base.T
            np.maximum(d, 0.0, out=d)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        nbrs[start:stop] = order
        dists[start:stop] = np.take_along_axis(d, order, axis=1)
    return nbrs, dists


def build_knn_graph(m, k: int, metric: str = "euclidean", kernel: str = "gaussian-local") -> Graph:
    """Build the union-symmetrized kNN graph over embedding rows.

    Each node connects to its k nearest neighbors (self excluded, exact
    search); the directed edges are merged with w_ij = max(w_ij, w_ji).
    """
    x = np.asarray(m, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError(f"embeddings must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if not 1 <= k < n:
        raise ConfigError(f"need 1 <= k < n, got k={k}, n={n}")

    nbrs, dists = _knn_search(x, k, metric)
    report = {"duplicate_edges": int((dists == 0).sum()), "sigma_zero_nodes": []}
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = nbrs.ravel()
    flat = dists.ravel()
    if kernel == "gaussian-local":
        sigma = dists.mean(axis=1)
        report["sigma_zero_nodes"] = [int(i) for i in np.nonzero(sigma == 0)[0]]
        w = compute_edge_weights(flat, kernel, sigma[rows], sigma[cols])
    else:
        w = compute_edge_weights(flat, kernel)

    a = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    a = a.maximum(a.T)
    # round through f32 so persisting to GNZG is lossless
    a.data = a.data.astype(np.float32).astype(np.float64)
    a.eliminate_zeros()
    return Graph(a, report=report)


def normalized_operator(g: Graph) -> sp.csr_matrix:
    """S = D^{-1/2} W D^{-1/2}, same sparsity pattern as W."""
    d = degree_vector(g)
    inv = sp.diags(1.0 / np.sqrt(d))
    return (inv @ g.weights @ inv).tocsr()


def write_graph(g: Graph, path) -> None:
    """Persist in the GNZG layout (both edge directions, sorted)."""
    coo = g.weights.tocoo()
    order = np.lexsort((coo.col, coo.row))
    buf = formats.encode_graph_triplets(
        g.n, coo.row[order], coo.col[order], coo.data[order].astype(np.float32)
    )
    formats.atomic_write_bytes(path, buf)


def read_graph(path) -> Graph:
    with open(path, "rb") as fh:
        return decode_graph(fh.read())


def decode_graph(buf: bytes) -> Graph:
    n, i, j, w = formats.decode_graph_triplets(buf)
    mat = sp.coo_matrix((w, (i, j)), shape=(n, n)).tocsr()
    return Graph(mat)


def write_edge_list(g: Graph, path) -> None:
    """Plain-text ``i j w`` lines (each undirected edge once, i < j)."""
    coo = sp.triu(g.weights, k=1).tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [
        f"{coo.row[e]} {coo.col[e]} {format(coo.data[e], '.9g')}" for e in order
    ]
    formats.atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
