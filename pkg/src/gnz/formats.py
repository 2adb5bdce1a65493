"""Readers and writers for the on-disk formats.

Binary layouts are little-endian throughout, with 32-bit reals:

* embeddings (``.gnze``)::

      magic "GNZE" | u32 version=1 | u64 n | u64 P | n*P f32 row-major

* graph (``.gnzg``)::

      magic "GNZG" | u32 version=1 | u64 n | u64 nnz | nnz * (u32 i, u32 j, f32 w)

  Both (i, j) and (j, i) are stored, sorted lexicographically, with no
  diagonal entries.

Text formats are plain CSV:

* labels: header ``id,label``, optional comment line ``# classes=C``
* predictions: header ``id,label,score_0,...,score_{C-1}``, scores printed
  with 9 significant digits, rows ordered by id
* projection: header ``id,x,y``

All writers go through a write-to-temp / rename-on-success path so a failed
run never leaves a partial output file behind.
"""

from __future__ import annotations

import contextlib
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetryError,
    BadMagicError,
    ConfigError,
    FormatError,
    IndexRangeError,
    LabelsError,
    NegativeWeightError,
    NonFiniteError,
    TruncatedError,
    VersionError,
)

FORMAT_VERSION = 1

_EMB_MAGIC = b"GNZE"
_GRAPH_MAGIC = b"GNZG"
_HEADER = struct.Struct("<4sIQQ")
_TRIPLET_DTYPE = np.dtype([("i", "<u4"), ("j", "<u4"), ("w", "<f4")])


# ---------------------------------------------------------------------------
# atomic writes


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to ``path`` atomically (temp file + rename)."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gnz-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# embeddings (GNZE)


def _as_storage_matrix(m) -> np.ndarray:
    """Validate an embedding matrix and return it as C-ordered float32."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ConfigError(f"embedding matrix must be 2-D, got shape {arr.shape}")
    n, p = arr.shape
    if n < 1 or p < 1:
        raise ConfigError(f"embedding matrix must be at least 1x1, got {n}x{p}")
    with np.errstate(over="ignore"):
        arr32 = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.isfinite(arr32).all():
        raise NonFiniteError("embedding matrix has non-finite values (or values that overflow 32-bit storage)")
    return arr32


def write_embeddings(m, path) -> None:
    """Write an n x P feature matrix in the GNZE layout."""
    arr = _as_storage_matrix(m)
    header = _HEADER.pack(_EMB_MAGIC, FORMAT_VERSION, arr.shape[0], arr.shape[1])
    atomic_write_bytes(path, header + arr.tobytes(order="C"))


def _split_header(buf: bytes, magic: bytes, what: str):
    if len(buf) < 4:
        raise TruncatedError(f"{what}: file shorter than magic")
    if buf[:4] != magic:
        raise BadMagicError(f"{what}: bad magic {buf[:4]!r}, expected {magic!r}")
    if len(buf) < _HEADER.size:
        raise TruncatedError(f"{what}: truncated header ({len(buf)} bytes)")
    _, version, a, b = _HEADER.unpack_from(buf)
    if version != FORMAT_VERSION:
        raise VersionError(f"{what}: unsupported version {version}")
    return a, b, buf[_HEADER.size:]


def decode_embeddings(buf: bytes) -> np.ndarray:
    """Decode GNZE bytes into an (n, P) float32 array."""
    n, p, payload = _split_header(buf, _EMB_MAGIC, "embeddings")
    if n < 1 or p < 1:
        raise FormatError(f"embeddings: declared shape {n}x{p} is empty")
    expected = n * p * 4
    if len(payload) < expected:
        raise TruncatedError(
            f"embeddings: payload holds {len(payload) // 4} values, header declares {n * p}"
        )
    if len(payload) > expected:
        raise FormatError(f"embeddings: {len(payload) - expected} trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(n, p).copy()
    if not np.isfinite(data).all():
        raise NonFiniteError("embeddings: payload contains non-finite values")
    return data


def read_embeddings(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_embeddings(fh.read())


# ---------------------------------------------------------------------------
# labels CSV


@dataclass(frozen=True)
class LabelSet:
    """Labeled node ids with classes, over a dataset of ``n`` nodes.

    ``labeled`` is sorted by node id; ids are dense 0-based row indices into
    the embedding matrix they were collected against.
    """

    n: int
    num_classes: int
    labeled: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("label set needs n >= 1")
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if not 1 <= len(self.labeled) <= self.n:
            raise ConfigError(f"need between 1 and {self.n} labeled nodes, got {len(self.labeled)}")
        seen = set()
        for i, c in self.labeled:
            if i in seen:
                raise ConfigError(f"duplicate labeled id {i}")
            seen.add(i)
            if not 0 <= i < self.n:
                raise ConfigError(f"labeled id {i} outside [0, {self.n})")
            if not 0 <= c < self.num_classes:
                raise ConfigError(f"class {c} outside [0, {self.num_classes})")

    @property
    def labeled_ids(self) -> np.ndarray:
        return np.array([i for i, _ in self.labeled], dtype=np.int64)

    @property
    def labels(self) -> np.ndarray:
        return np.array([c for _, c in self.labeled], dtype=np.int64)

    def unlabeled_ids(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.labeled_ids] = False
        return np.nonzero(mask)[0]

    def restricted_to(self, ids) -> "LabelSet":
        """A LabelSet over the same n keeping only the given labeled ids."""
        keep = set(int(i) for i in ids)
        kept = tuple((i, c) for i, c in self.labeled if i in keep)
        return LabelSet(self.n, self.num_classes, kept)


def read_labels(path, n: int, num_classes: int | None = None) -> LabelSet:
    """Parse a labels CSV against a dataset of ``n`` nodes.

    The class count is inferred as (max class + 1) unless a ``# classes=C``
    comment or the ``num_classes`` argument overrides it.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    meta_classes = None
    header_seen = False
    pairs: list[tuple[int, int]] = []
    seen: dict[int, int] = {}
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("classes="):
                try:
                    meta_classes = int(body.split("=", 1)[1])
                except ValueError:
                    raise LabelsError(f"{path}:{ln}: malformed classes comment {line!r}")
            continue
        if not header_seen:
            if line.replace(" ", "") != "id,label":
                raise LabelsError(f"{path}:{ln}: expected header 'id,label', got {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise LabelsError(f"{path}:{ln}: expected 'id,label', got {line!r}")
        try:
            i, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise LabelsError(f"{path}:{ln}: non-integer field in {line!r}")
        if c < 0:
            raise LabelsError(f"{path}:{ln}: negative class {c}")
        if not 0 <= i < n:
            raise LabelsError(f"{path}:{ln}: id {i} outside [0, {n})")
        if i in seen:
            raise LabelsError(f"{path}:{ln}: duplicate id {i} (first at line {seen[i]})")
        seen[i] = ln
        pairs.append((i, c))

    if not header_seen:
        raise LabelsError(f"{path}: missing 'id,label' header")
    if not pairs:
        raise LabelsError(f"{path}: no labeled rows")

    max_class = max(c for _, c in pairs)
    inferred = max_class + 1
    c_final = num_classes if num_classes is not None else (meta_classes if meta_classes is not None else inferred)
    if c_final < inferred:
        raise LabelsError(f"{path}: declared classes={c_final} but labels reach {max_class}")
    if c_final < 2:
        raise LabelsError(f"{path}: need at least 2 classes, inferred {c_final}")
    pairs.sort()
    return LabelSet(n=n, num_classes=c_final, labeled=tuple(pairs))


def write_labels(ls: LabelSet, path, classes_comment: bool = True) -> None:
    out = []
    if classes_comment:
        out.append(f"# classes={ls.num_classes}")
    out.append("id,label")
    out.extend(f"{i},{c}" for i, c in ls.labeled)
    atomic_write_text(path, "\n".join(out) + "\n")


def read_truth(path, n: int, num_classes: int | None = None) -> np.ndarray:
    """Read a fully-labeled CSV (one row per node) as a ground-truth vector."""
    ls = read_labels(path, n, num_classes)
    if len(ls.labeled) != n:
        raise LabelsError(f"{path}: ground truth must label all {n} nodes, found {len(ls.labeled)}")
    return ls.labels


# ---------------------------------------------------------------------------
# predictions CSV


@dataclass(frozen=True)
class PredictionTable:
    """Per node: hard label plus the full class-score row.

    Node ids are implicit, dense 0..n-1. Built from scores, the hard label is
    the row argmax with ties broken toward the smallest class index; parsed
    from disk, the stored labels are kept verbatim (9-digit score rounding
    could otherwise manufacture ties that did not exist when written).
    """

    labels: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2 or labels.shape != (scores.shape[0],):
            raise ConfigError("labels must be (n,), scores (n, C)")
        if scores.size and not np.isfinite(scores).all():
            raise NonFiniteError("prediction scores contain non-finite values")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_scores(cls, scores) -> "PredictionTable":
        scores = np.asarray(scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ConfigError("scores must be an (n, C) matrix")
        labels = scores.argmax(axis=1) if scores.shape[0] else np.zeros(0, dtype=np.int64)
        return cls(labels=labels, scores=scores)

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]


def _fmt9(x: float) -> str:
    return format(float(x), ".9g")


def write_predictions(t: PredictionTable, path) -> None:
    cols = ",".join(f"score_{k}" for k in range(t.num_classes))
    lines = [f"id,label,{cols}" if t.num_classes else "id,label"]
    for i in range(t.n):
        scores = ",".join(_fmt9(v) for v in t.scores[i])
        lines.append(f"{i},{t.labels[i]},{scores}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_predictions(path) -> PredictionTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty predictions file")
    header = lines[0].split(",")
    if header[:2] != ["id", "label"]:
        raise FormatError(f"{path}: expected 'id,label,score_*' header, got {lines[0]!r}")
    c = len(header) - 2
    for k, name in enumerate(header[2:]):
        if name != f"score_{k}":
            raise FormatError(f"{path}: unexpected score column {name!r}")
    n = len(lines) - 1
    labels = np.zeros(n, dtype=np.int64)
    scores = np.zeros((n, c), dtype=np.float64)
    for row, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != 2 + c:
            raise FormatError(f"{path}:{row + 2}: expected {2 + c} fields, got {len(parts)}")
        try:
            ident = int(parts[0])
            labels[row] = int(parts[1])
            scores[row] = [float(v) for v in parts[2:]]
        except ValueError:
            raise FormatError(f"{path}:{row + 2}: malformed row {line!r}")
        if ident != row:
            raise FormatError(f"{path}:{row + 2}: ids must be dense and ordered, got {ident}")
    return PredictionTable(labels=labels, scores=scores)


# ---------------------------------------------------------------------------
# graph (GNZG) -- encoding; the Graph type itself lives in gnz.graph


def encode_graph_triplets(n: int, i: np.ndarray, j: np.ndarray, w: np.ndarray) -> bytes:
    """Encode sorted symmetric triplets into GNZG bytes."""
    trip = np.empty(len(i), dtype=_TRIPLET_DTYPE)
    trip["i"] = i
    trip["j"] = j
    trip["w"] = w
    header = _HEADER.pack(_GRAPH_MAGIC, FORMAT_VERSION, n, len(i))
    return header + trip.tobytes()


def decode_graph_triplets(buf: bytes):
    """Decode and validate GNZG bytes; returns (n, i, j, w) arrays.

    Validates magic/version, exact payload size, index range, absence of
    diagonal entries, lexicographic order, non-negative finite weights, and
    bitwise symmetry of the stored pairs.
    """
    n, nnz, payload = _split_header(buf, _GRAPH_MAGIC, "graph")
    if n < 2:
        raise FormatError(f"graph: declared n={n}, need at least 2 nodes")
    expected = nnz * _TRIPLET_DTYPE.itemsize
    if len(payload) < expected:
        raise TruncatedError(f"graph: payload holds {len(payload)} bytes, header declares {expected}")
    if len(payload) > expected:
        raise FormatError(f"graph: {len(payload) - expected} trailing bytes after payload")
    if n > max(nnz, 0):
        # every node needs degree > 0, so a valid file has nnz >= n
        raise FormatError(f"graph: n={n} exceeds entry count {nnz}; some node must be isolated")
    trip = np.frombuffer(payload, dtype=_TRIPLET_DTYPE)
    i = trip["i"].astype(np.int64)
    j = trip["j"].astype(np.int64)
    w = trip["w"]
    if nnz:
        if i.max() >= n or j.max() >= n:
            raise IndexRangeError(f"graph: index {max(i.max(), j.max())} outside [0, {n})")
        if (i == j).any():
            bad = int(i[np.nonzero(i == j)[0][0]])
            raise FormatError(f"graph: diagonal entry at node {bad}")
        if not np.isfinite(w).all():
            raise NonFiniteError("graph: non-finite weight")
        if (w < 0).any():
            bad = int(np.nonzero(w < 0)[0][0])
            raise NegativeWeightError(f"graph: negative weight at entry {bad}")
        key = (i.astype(np.uint64) << np.uint64(32)) | j.astype(np.uint64)
        if not (key[1:] > key[:-1]).all():
            raise FormatError("graph: entries not strictly sorted by (row, col)")
        tkey = (j.astype(np.uint64) << np.uint64(32)) | i.astype(np.uint64)
        pos = np.searchsorted(key, tkey)
        ok = pos < len(key)
        safe = np.minimum(pos, len(key) - 1)
        wbits = w.view(np.uint32)
        ok &= key[safe] == tkey
        ok &= wbits[safe] == wbits
        if not ok.all():
            bad = int(np.nonzero(~ok)[0][0])
            raise AsymmetryError(
                f"graph: entry ({int(i[bad])}, {int(j[bad])}) has no matching mirror with equal weight"
            )
    return n, i, j, w.astype(np.float64)


# ---------------------------------------------------------------------------
# projection CSV


def export_projection(m, path) -> np.ndarray:
    """Project embeddings onto the first two principal components and save.

    Components come from an exact eigen-decomposition of the P x P sample
    covariance of the mean-centered rows. Sign convention: each component's
    entry of largest magnitude is non-negative. Returns the (n, 2) array.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ConfigError(f"projection needs an n x P matrix with P >= 1, got shape {arr.shape}")
    n, p = arr.shape
    if n < 2:
        raise ConfigError("projection needs at least 2 rows")
    centered = arr - arr.mean(axis=0)
    cov = (centered.T @ centered) / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][: min(2, p)]
    comps = []
    for idx in order:
        v = evecs[:, idx]
        jmax = int(np.argmax(np.abs(v)))
        if v[jmax] < 0:
            v = -v
        comps.append(v)
    basis = np.stack(comps, axis=1)
    proj = centered @ basis
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((n, 1))])
    lines = ["id,x,y"]
    lines.extend(f"{i},{format(proj[i, 0], '.12g')},{format(proj[i, 1], '.12g')}" for i in range(n))
    atomic_write_text(path, "\n".join(lines) + "\n")
    return proj
