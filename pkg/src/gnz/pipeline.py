"""One-Pass and Dynamic-Pass classification pipelines.

One pass: extract features (trained on labeled data only), build the kNN
graph, diffuse labels, harden. Dynamic pass repeats for J epochs, feeding
entropy-weighted pseudo-labels back to the extractor with a linearly ramped
balance weight, and returns the final epoch's hardened labels.

Feature extraction runs behind a protocol: the core writes a JSON manifest
and invokes a configured command (the manifest path is its sole argument),
which must write GNZE embeddings to the requested output path and exit 0.
A built-in mock extractor (seeded projection plus an optional
pseudo-label-driven sharpening step) keeps the pipelines self-contained.

Seeds fan out as hashes of (master seed, stage tag, epoch) so stages are
independently reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from . import synth
from .certainty import PseudoLabelSet, extract_pseudo_labels, write_pseudo_labels
from .errors import ConfigError, ExtractorError, GnzError, PipelineError
from .formats import (
    LabelSet,
    PredictionTable,
    read_embeddings,
    read_labels,
    read_truth,
    write_embeddings,
)
from .graph import build_knn_graph, normalized_operator
from .spreading import DiffusionConfig, diffuse_iterative, select_alpha
from .tvratio import L1Config, diffuse_l1


def stage_seed(master: int, tag: str, epoch: int = 0) -> int:
    """Deterministic per-stage seed derived from the master seed."""
    digest = hashlib.sha256(f"{master}:{tag}:{epoch}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def ramp_weight(t: int, t_ramp: int, alpha_max: float) -> float:
    """Linear ramp min(t / t_ramp, 1) * alpha_max for the pseudo-label weight."""
    if t < 0:
        raise ConfigError("epoch index must be >= 0")
    if t_ramp < 1:
        raise ConfigError("t_ramp must be >= 1")
    if alpha_max < 0:
        raise ConfigError("alpha_max must be >= 0")
    return min(t / t_ramp, 1.0) * alpha_max


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GraphConfig:
    k: int = 50
    metric: str = "euclidean"
    kernel: str = "gaussian-local"


@dataclass(frozen=True)
class RampConfig:
    t_ramp: int = 3
    alpha_max: float = 1.0

    def __post_init__(self):
        if self.t_ramp < 1:
            raise ConfigError("ramp.t_ramp must be >= 1")
        if self.alpha_max < 0:
            raise ConfigError("ramp.alpha_max must be >= 0")


@dataclass(frozen=True)
class MockExtractorConfig:
    """Built-in extractor: seeded projection plus centroid sharpening."""

    projection: str = "identity"  # "identity" | "random"
    out_dim: int = 32
    eta: float = 0.1

    def __post_init__(self):
        if self.projection not in ("identity", "random"):
            raise ConfigError("mock projection must be 'identity' or 'random'")
        if self.out_dim < 1:
            raise ConfigError("mock out_dim must be >= 1")
        if self.eta < 0:
            raise ConfigError("mock eta must be >= 0")


@dataclass(frozen=True)
class ExternalExtractorConfig:
    command: tuple[str, ...]
    timeout: float = 600.0

    def __post_init__(self):
        if not self.command:
            raise ConfigError("external extractor needs a command")
        if self.timeout <= 0:
            raise ConfigError("extractor timeout must be positive")


@dataclass(frozen=True)
class DiffusionSpec:
    method: str = "p2"  # "p2" | "p1"
    alpha: float = 0.99
    tol: float = 1e-8
    max_iter: int = 10000
    grid: tuple[float, ...] | None = None
    holdout_fraction: float = 0.25
    l1: L1Config = field(default_factory=L1Config)

    def __post_init__(self):
        if self.method not in ("p1", "p2"):
            raise ConfigError("diffusion method must be 'p1' or 'p2'")
        DiffusionConfig(alpha=self.alpha, tol=self.tol, max_iter=self.max_iter)


@dataclass(frozen=True)
class PipelineConfig:
    data: dict
    labels: dict
    mode: str = "one-pass"  # "one-pass" | "dynamic"
    graph: GraphConfig = field(default_factory=GraphConfig)
    diffusion: DiffusionSpec = field(default_factory=DiffusionSpec)
    epochs: int = 1
    ramp: RampConfig = field(default_factory=RampConfig)
    extractor: MockExtractorConfig | ExternalExtractorConfig = field(default_factory=MockExtractorConfig)
    balance_pseudo: bool = False
    seed: int = 0
    threads: int = 1
    out: str | None = None
    report_dir: str | None = None

    def __post_init__(self):
        if self.mode not in ("one-pass", "dynamic"):
            raise ConfigError("mode must be 'one-pass' or 'dynamic'")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


def config_from_dict(d: dict) -> PipelineConfig:
    """Build a PipelineConfig from a plain dict (e.g. parsed JSON)."""
    d = dict(d)
    known = {
        "data", "labels", "mode", "graph", "diffusion", "epochs",
        "ramp", "extractor", "balance_pseudo", "seed", "threads",
        "out", "report_dir",
    }
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "data" not in d or "labels" not in d:
        raise ConfigError("config needs 'data' and 'labels' sections")

    def sub(cls, key, **extra):
        raw = dict(d.get(key) or {})
        raw.update(extra)
        try:
            return cls(**raw)
        except TypeError as e:
            raise ConfigError(f"bad '{key}' section: {e}")

    ext_raw = dict(d.get("extractor") or {})
    ext_type = ext_raw.pop("type", "mock")
    if ext_type == "mock":
        try:
            extractor = MockExtractorConfig(**ext_raw)
        except TypeError as e:
            raise ConfigError(f"bad 'extractor' section: {e}")
    elif ext_type == "command":
        cmd = ext_raw.pop("command", None)
        if not cmd:
            raise ConfigError("external extractor needs 'command'")
        if isinstance(cmd, str):
            cmd = [cmd]
        try:
            extractor = ExternalExtractorConfig(command=tuple(cmd), **ext_raw)
        except TypeError as e:
            raise ConfigError(f"bad 'extractor' section: {e}")
    else:
        raise ConfigError(f"extractor type must be 'mock' or 'command', got {ext_type!r}")

    diff_raw = dict(d.get("diffusion") or {})
    l1_raw = diff_raw.pop("l1", None)
    if l1_raw is not None:
        try:
            diff_raw["l1"] = L1Config(**l1_raw)
        except TypeError as e:
            raise ConfigError(f"bad 'diffusion.l1' section: {e}")
    grid = diff_raw.get("grid")
    if grid is not None:
        diff_raw["grid"] = tuple(float(a) for a in grid)
    try:
        diffusion = DiffusionSpec(**diff_raw)
    except TypeError as e:
        raise ConfigError(f"bad 'diffusion' section: {e}")

    return PipelineConfig(
        data=dict(d["data"]),
        labels=dict(d["labels"]),
        mode=d.get("mode", "one-pass"),
        graph=sub(GraphConfig, "graph"),
        diffusion=diffusion,
        epochs=int(d.get("epochs", 1)),
        ramp=sub(RampConfig, "ramp"),
        extractor=extractor,
        balance_pseudo=bool(d.get("balance_pseudo", False)),
        seed=int(d.get("seed", 0)),
        threads=int(d.get("threads", 1)),
        out=d.get("out"),
        report_dir=d.get("report_dir"),
    )


def config_from_json(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# data and label sources


def load_data_source(src: dict, seed: int = 0):
    """Resolve a data section to (X-or-None, truth-or-None, data_ref-or-None).

    ``ref`` sources are opaque: the core forwards the path to the extractor
    without reading it (image directories, .npy stacks), so they declare
    ``n`` explicitly and only work with external extractors.
    """
    kind = src.get("kind")
    if kind == "gnze":
        path = src.get("path")
        if not path:
            raise ConfigError("gnze data source needs 'path'")
        x = read_embeddings(path).astype(np.float64)
        truth = None
        if src.get("truth"):
            truth = read_truth(src["truth"], x.shape[0])
        return x, truth, path
    if kind == "ref":
        path = src.get("path")
        n = src.get("n")
        if not path or not n:
            raise ConfigError("ref data source needs 'path' and 'n'")
        n = int(n)
        if n < 2:
            raise ConfigError("ref data source needs n >= 2")
        truth = read_truth(src["truth"], n) if src.get("truth") else None
        return None, truth, path
    if kind == "two-moons":
        x, y = synth.two_moons(
            n=int(src.get("n", 600)),
            noise=float(src.get("noise", 0.1)),
            seed=int(src.get("seed", seed)),
        )
        return x, y, None
    if kind == "blobs":
        x, y = synth.blobs(
            n=int(src.get("n", 400)),
            classes=int(src.get("classes", 4)),
            noise=float(src.get("noise", 1.0)),
            sep=float(src.get("sep", 6.0)),
            dim=int(src.get("dim", 2)),
            seed=int(src.get("seed", seed)),
        )
        return x, y, None
    raise ConfigError(f"data source kind must be 'gnze', 'two-moons' or 'blobs', got {kind!r}")


def load_label_source(src: dict, truth, n: int, seed: int) -> LabelSet:
    kind = src.get("kind")
    if kind == "csv":
        path = src.get("path")
        if not path:
            raise ConfigError("csv label source needs 'path'")
        return read_labels(path, n, src.get("classes"))
    if kind == "per-class":
        if truth is None:
            raise ConfigError("per-class label source needs a data source with ground truth")
        return synth.sample_labels(
            truth,
            per_class=int(src.get("count", 10)),
            seed=int(src.get("seed", stage_seed(seed, "labels"))),
        )
    raise ConfigError(f"label source kind must be 'csv' or 'per-class', got {kind!r}")


# ---------------------------------------------------------------------------
# extractor protocol


@dataclass(frozen=True)
class ExtractorRequest:
    """One extraction call: who is labeled, current pseudo-labels, ramp weight."""

    n: int
    labeled: tuple[tuple[int, int], ...]
    pseudo: PseudoLabelSet | None
    ramp_weight: float
    epoch: int
    seed: int
    data_ref: str | None = None
    output_path: str | None = None

    def __post_init__(self):
        if self.pseudo is not None and len(self.pseudo):
            labeled_ids = {i for i, _ in self.labeled}
            if labeled_ids & set(self.pseudo.ids.tolist()):
                raise ConfigError("pseudo-label ids overlap labeled ids")


def mock_extract(data, req: ExtractorRequest, cfg: MockExtractorConfig = MockExtractorConfig()) -> np.ndarray:
    """Deterministic stand-in for a trained feature extractor.

    Epoch 0 applies a seeded random projection (or the identity) to the raw
    features. The mock fine-tunes incrementally: on later epochs ``data`` is
    the previous epoch's output, already in feature space, so no projection
    is applied. When pseudo-labels are supplied, each pseudo-labeled row is
    pulled toward its class centroid (centroids over labeled plus
    pseudo-labeled rows) with per-row step ``xi * ramp_weight * eta``, so
    dynamic-pass epochs measurably reshape the graph.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != req.n:
        raise ExtractorError(f"mock data has shape {x.shape}, request expects {req.n} rows")
    if cfg.projection == "random" and req.epoch == 0:
        if cfg.out_dim > x.shape[1]:
            raise ConfigError(f"mock out_dim {cfg.out_dim} exceeds input dimension {x.shape[1]}")
        rng = np.random.default_rng(stage_seed(req.seed, "mock-projection"))
        basis = rng.standard_normal((x.shape[1], cfg.out_dim)) / np.sqrt(cfg.out_dim)
        z = x @ basis
    else:
        z = x.copy()

    if req.pseudo is not None and len(req.pseudo):
        # centroids use labeled and pseudo-labeled rows; only pseudo-labeled
        # rows move, with per-row step xi * ramp * eta
        ids = np.concatenate([np.array([i for i, _ in req.labeled], dtype=np.int64), req.pseudo.ids])
        classes = np.concatenate([np.array([c for _, c in req.labeled], dtype=np.int64), req.pseudo.labels])
        steps = req.pseudo.weights * req.ramp_weight * cfg.eta
        if (steps > 0).any():
            c = int(classes.max()) + 1
            centroids = np.zeros((c, z.shape[1]))
            counts = np.bincount(classes, minlength=c).astype(np.float64)
            np.add.at(centroids, classes, z[ids])
            nonzero = counts > 0
            centroids[nonzero] /= counts[nonzero, None]
            rows = req.pseudo.ids
            z[rows] += steps[:, None] * (centroids[req.pseudo.labels] - z[rows])
    return z


def _write_manifest(req: ExtractorRequest, pseudo_path: str | None, path: str) -> None:
    manifest = {
        "data_ref": req.data_ref,
        "labeled": [[int(i), int(c)] for i, c in req.labeled],
        "pseudo": pseudo_path,
        "ramp_weight": req.ramp_weight,
        "epoch": req.epoch,
        "seed": req.seed,
        "output_path": req.output_path,
    }
    from .formats import atomic_write_text

    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def invoke_extractor(req: ExtractorRequest, extractor, raw_features=None, run_dir=None):
    """Dispatch one extraction; returns (embeddings float64, diagnostics text).

    Mock extractors run in-process on ``raw_features``. External extractors
    get a manifest file as their sole argument and must write GNZE embeddings
    to the manifest's output path and exit 0.
    """
    if isinstance(extractor, MockExtractorConfig):
        if raw_features is None:
            raise ConfigError("mock extractor needs the raw feature matrix")
        return mock_extract(raw_features, req, extractor), ""
    if not isinstance(extractor, ExternalExtractorConfig):
        raise ConfigError(f"unknown extractor configuration {type(extractor).__name__}")

    if run_dir is None:
        raise ConfigError("external extractor needs a run directory")
    if req.data_ref is None:
        raise ConfigError("external extractor needs a data_ref path")
    epoch_dir = os.path.join(run_dir, f"epoch_{req.epoch:03d}")
    os.makedirs(epoch_dir, exist_ok=True)
    output_path = req.output_path or os.path.join(epoch_dir, "features.gnze")
    req = replace(req, output_path=output_path)
    pseudo_path = None
    if req.pseudo is not None and len(req.pseudo):
        pseudo_path = os.path.join(epoch_dir, "pseudo.csv")
        write_pseudo_labels(req.pseudo, pseudo_path)
    manifest_path = os.path.join(epoch_dir, "manifest.json")
    _write_manifest(req, pseudo_path, manifest_path)

    try:
        proc = subprocess.run(
            [*extractor.command, manifest_path],
            capture_output=True,
            timeout=extractor.timeout,
            text=True,
        )
    except subprocess.TimeoutExpired:
        raise ExtractorError(f"extractor timed out after {extractor.timeout}s")
    except OSError as e:
        raise ExtractorError(f"could not launch extractor: {e}")
    diagnostics = proc.stderr[-4000:] if proc.stderr else ""
    if proc.returncode != 0:
        raise ExtractorError(
            f"extractor exited with code {proc.returncode}",
            exit_code=proc.returncode,
            diagnostics=diagnostics,
        )
    try:
        emb = read_embeddings(output_path)
    except (OSError, GnzError) as e:
        raise ExtractorError(f"extractor output unreadable: {e}", diagnostics=diagnostics)
    if emb.shape[0] != req.n:
        raise ExtractorError(
            f"extractor returned {emb.shape[0]} rows, expected {req.n}", diagnostics=diagnostics
        )
    return emb.astype(np.float64), diagnostics


# ---------------------------------------------------------------------------
# reports


@dataclass
class EpochRecord:
    epoch: int
    ramp_weight: float
    graph_nodes: int
    graph_edges: int
    duplicate_edges: int
    diffusion: dict
    pseudo_histogram: list[int]
    mean_certainty: float
    accuracy_vs_truth: float | None
    extractor_diagnostics: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PipelineReport:
    mode: str
    seed: int
    alpha: float | None
    alpha_table: list | None
    records: list[EpochRecord]
    degraded: str | None = None
    final_embeddings: np.ndarray | None = None  # for plotting; not serialized

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "alpha": self.alpha,
            "alpha_table": self.alpha_table,
            "records": [r.to_dict() for r in self.records],
            "degraded": self.degraded,
        }


# ---------------------------------------------------------------------------
# orchestration


def _diffuse(cfg: PipelineConfig, graph, labels: LabelSet, alpha: float):
    from .spreading import seed_matrix

    if cfg.diffusion.method == "p2":
        s = normalized_operator(graph)
        dc = DiffusionConfig(alpha=alpha, tol=cfg.diffusion.tol, max_iter=cfg.diffusion.max_iter)
        h, rep = diffuse_iterative(s, seed_matrix(labels), dc)
        info = {"method": "p2", "alpha": alpha, "iterations": rep.iterations, "residual": rep.residual}
        return h, info
    h, reports = diffuse_l1(graph, labels, cfg.diffusion.l1, threads=cfg.threads)
    info = {
        "method": "p1",
        "final_ratios": [r.ratios[-1] for r in reports],
        "outer_accepted": [r.outer_accepted for r in reports],
    }
    return h, info


def _run(cfg: PipelineConfig, epochs: int, run_dir: str | None):
    x, truth, data_path = load_data_source(cfg.data, cfg.seed)
    external = isinstance(cfg.extractor, ExternalExtractorConfig)
    if x is None:
        if not external:
            raise ConfigError("'ref' data sources need an external extractor; the mock reads features")
        n = int(cfg.data["n"])
    else:
        n = x.shape[0]
    if not 1 <= cfg.graph.k < n:
        raise ConfigError(f"graph.k={cfg.graph.k} invalid for n={n}")
    labels = load_label_source(cfg.labels, truth, n, cfg.seed)

    if external and data_path is None:
        data_path = os.path.join(run_dir, "data.gnze")
        write_embeddings(x, data_path)

    alpha = cfg.diffusion.alpha
    alpha_table = None
    records: list[EpochRecord] = []
    degraded = None
    h = None
    emb = None
    working = x  # mock input: raw features at epoch 0, last embedding afterwards

    for t in range(epochs):
        rw = ramp_weight(t, cfg.ramp.t_ramp, cfg.ramp.alpha_max)
        pseudo = None
        if t > 0:
            pseudo = extract_pseudo_labels(h, labels, balance=cfg.balance_pseudo)
        req = ExtractorRequest(
            n=n,
            labeled=labels.labeled,
            pseudo=pseudo,
            ramp_weight=rw,
            epoch=t,
            seed=cfg.seed,
            data_ref=data_path,
        )
        try:
            emb_t, diag = invoke_extractor(req, cfg.extractor, raw_features=working, run_dir=run_dir)
        except ExtractorError as e:
            if t == 0:
                raise PipelineError("extract", e)
            degraded = f"epoch {t}: extractor failed ({e}); keeping epoch {t - 1} result"
            break
        try:
            g = build_knn_graph(emb_t, cfg.graph.k, cfg.graph.metric, cfg.graph.kernel)
        except GnzError as e:
            raise PipelineError("graph", e)
        if t == 0 and cfg.diffusion.method == "p2" and cfg.diffusion.grid:
            try:
                sel = select_alpha(
                    normalized_operator(g),
                    labels,
                    cfg.diffusion.grid,
                    holdout_fraction=cfg.diffusion.holdout_fraction,
                    seed=stage_seed(cfg.seed, "alpha-holdout"),
                    cfg=DiffusionConfig(tol=cfg.diffusion.tol, max_iter=cfg.diffusion.max_iter),
                )
            except GnzError as e:
                raise PipelineError("alpha-selection", e)
            alpha = sel.alpha
            alpha_table = [list(row) for row in sel.table]
        try:
            h_t, diff_info = _diffuse(cfg, g, labels, alpha)
        except GnzError as e:
            raise PipelineError("diffuse", e)

        stats = extract_pseudo_labels(h_t, labels, balance=cfg.balance_pseudo)
        hist = np.bincount(stats.labels, minlength=labels.num_classes) if len(stats) else np.zeros(
            labels.num_classes, dtype=np.int64
        )
        acc = None
        if truth is not None:
            from .certainty import harden_labels
            from .metrics import accuracy

            acc = accuracy(harden_labels(h_t), truth)
        records.append(
            EpochRecord(
                epoch=t,
                ramp_weight=rw,
                graph_nodes=g.n,
                graph_edges=g.nnz // 2,
                duplicate_edges=int(g.report.get("duplicate_edges", 0)),
                diffusion=diff_info,
                pseudo_histogram=[int(v) for v in hist],
                mean_certainty=float(stats.weights.mean()) if len(stats) else 0.0,
                accuracy_vs_truth=acc,
                extractor_diagnostics=diag,
            )
        )
        h = h_t
        emb = emb_t
        working = emb_t

    table = PredictionTable.from_scores(h)
    report = PipelineReport(
        mode=cfg.mode,
        seed=cfg.seed,
        alpha=alpha if cfg.diffusion.method == "p2" else None,
        alpha_table=alpha_table,
        records=records,
        degraded=degraded,
        final_embeddings=emb,
    )
    return table, report


def _with_run_dir(cfg: PipelineConfig, epochs: int, run_dir: str | None):
    if run_dir is None and isinstance(cfg.extractor, ExternalExtractorConfig):
        with tempfile.TemporaryDirectory(prefix="gnz-run-") as tmp:
            return _run(cfg, epochs, tmp)
    return _run(cfg, epochs, run_dir)


def one_pass(cfg: PipelineConfig, run_dir: str | None = None):
    """Extract once, build one graph, diffuse once; returns (table, report)."""
    return _with_run_dir(cfg, 1, run_dir)


def dynamic_pass(cfg: PipelineConfig, run_dir: str | None = None):
    """J-epoch loop re-extracting with ramped pseudo-label supervision."""
    if cfg.epochs < 1:
        raise ConfigError("dynamic pass needs epochs >= 1")
    return _with_run_dir(cfg, cfg.epochs, run_dir)
