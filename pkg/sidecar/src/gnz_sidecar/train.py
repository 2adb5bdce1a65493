"""Manifest-driven training and feature extraction.

Loss per batch: mean cross-entropy over labeled examples plus
ramp_weight times the mean of certainty-weighted cross-entropy over
pseudo-labeled examples. Each pseudo example's contribution is linear in its
certainty weight. Training items are the labeled and pseudo-labeled ids;
feature extraction afterwards covers every item.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .config import SidecarConfig
from .data import DataError, load_images
from .gnze import write_embeddings
from .models import build_model


class ManifestError(ValueError):
    pass


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class TrainResult:
    features: np.ndarray
    losses: list = field(default_factory=list)
    supervised: list = field(default_factory=list)
    pseudo: list = field(default_factory=list)

    def trace_dict(self) -> dict:
        return {"losses": self.losses, "supervised": self.supervised, "pseudo": self.pseudo}


def parse_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"{path}: cannot read manifest ({e})")
    if not isinstance(manifest, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    required = {"data_ref", "labeled", "pseudo", "ramp_weight", "epoch", "seed", "output_path"}
    missing = required - set(manifest)
    if missing:
        raise ManifestError(f"{path}: manifest missing keys {sorted(missing)}")
    if not manifest["labeled"]:
        raise ManifestError(f"{path}: manifest has no labeled examples")
    if not manifest["output_path"]:
        raise ManifestError(f"{path}: manifest has no output_path")
    return manifest


def read_pseudo_csv(path) -> list[tuple[int, int, float]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "label", "weight"]:
            raise ManifestError(f"{path}: expected 'id,label,weight' header")
        for row in reader:
            if len(row) != 3:
                raise ManifestError(f"{path}: malformed row {row!r}")
            rows.append((int(row[0]), int(row[1]), float(row[2])))
    return rows


def batch_loss(logits, targets, is_pseudo, xi, ramp_weight):
    """(total, supervised, pseudo) loss terms for one batch.

    ``is_pseudo`` masks pseudo examples; ``xi`` carries their certainty
    weights (ignored for labeled rows). Either side may be absent.
    """
    ce = torch.nn.functional.cross_entropy(logits, targets, reduction="none")
    sup_mask = ~is_pseudo
    zero = logits.new_zeros(())
    sup = ce[sup_mask].mean() if sup_mask.any() else zero
    if is_pseudo.any():
        pseudo = (xi[is_pseudo] * ce[is_pseudo]).mean()
    else:
        pseudo = zero
    return sup + ramp_weight * pseudo, sup, pseudo


def _state_path(cfg: SidecarConfig) -> str | None:
    if cfg.state_dir is None:
        return None
    os.makedirs(cfg.state_dir, exist_ok=True)
    return os.path.join(cfg.state_dir, f"{cfg.architecture}.pt")


def run_manifest(manifest: dict, cfg: SidecarConfig = SidecarConfig()) -> TrainResult:
    """Train/fine-tune on the manifest's supervision and extract features."""
    torch.manual_seed(int(manifest["seed"]) ^ (int(manifest["epoch"]) << 16))
    torch.set_num_threads(1)
    device = torch.device(cfg.device)

    images = load_images(manifest["data_ref"], cfg.image_root)
    n = images.shape[0]

    labeled = [(int(i), int(c)) for i, c in manifest["labeled"]]
    for i, _ in labeled:
        if not 0 <= i < n:
            raise DataError(f"labeled id {i} outside [0, {n})")
    pseudo_rows: list[tuple[int, int, float]] = []
    if manifest["pseudo"]:
        pseudo_rows = read_pseudo_csv(manifest["pseudo"])
        labeled_ids = {i for i, _ in labeled}
        for i, _, w in pseudo_rows:
            if not 0 <= i < n:
                raise DataError(f"pseudo id {i} outside [0, {n})")
            if i in labeled_ids:
                raise DataError(f"pseudo id {i} overlaps a labeled id")
            if not 0.0 <= w <= 1.0:
                raise DataError(f"pseudo weight {w} outside [0, 1]")

    num_classes = max(
        [c for _, c in labeled] + [c for _, c, _ in pseudo_rows]
    ) + 1
    num_classes = max(num_classes, 2)

    model = build_model(cfg.architecture, images.shape[1], num_classes, cfg.dropout).to(device)
    state_path = _state_path(cfg)
    if state_path and os.path.exists(state_path):
        model.load_state_dict(torch.load(state_path, map_location=device, weights_only=True))
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    ids = np.array([i for i, _ in labeled] + [i for i, _, _ in pseudo_rows], dtype=np.int64)
    targets = np.array([c for _, c in labeled] + [c for _, c, _ in pseudo_rows], dtype=np.int64)
    is_pseudo = np.array([False] * len(labeled) + [True] * len(pseudo_rows))
    xi = np.array([1.0] * len(labeled) + [w for _, _, w in pseudo_rows], dtype=np.float32)
    ramp = float(manifest["ramp_weight"])

    x_all = torch.from_numpy(images).to(device)
    result = TrainResult(features=np.zeros((0, 0)))
    gen = torch.Generator().manual_seed(int(manifest["seed"]))
    model.train()
    for _ in range(cfg.epochs):
        order = torch.randperm(len(ids), generator=gen).numpy()
        for start in range(0, len(ids), cfg.batch_size):
            sel = order[start: start + cfg.batch_size]
            logits = model(x_all[ids[sel]])
            total, sup, pseudo = batch_loss(
                logits,
                torch.from_numpy(targets[sel]).to(device),
                torch.from_numpy(is_pseudo[sel]).to(device),
                torch.from_numpy(xi[sel]).to(device),
                ramp,
            )
            if not torch.isfinite(total):
                raise DivergenceError(f"non-finite loss at step {len(result.losses)}")
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            result.losses.append(float(total.detach()))
            result.supervised.append(float(sup.detach()))
            result.pseudo.append(float(pseudo.detach()))

    if state_path:
        torch.save(model.state_dict(), state_path)

    model.eval()
    feats = []
    with torch.no_grad():
        for start in range(0, n, cfg.batch_size):
            feats.append(model.embed(x_all[start: start + cfg.batch_size]).cpu().numpy())
    result.features = np.concatenate(feats, axis=0)
    if not np.isfinite(result.features).all():
        raise DivergenceError("non-finite activations in extracted features")
    return result


def serve_manifest(manifest_path, cfg: SidecarConfig = SidecarConfig()) -> TrainResult:
    """Full protocol turn: parse, train, write GNZE plus a loss-trace JSON."""
    manifest = parse_manifest(manifest_path)
    result = run_manifest(manifest, cfg)
    write_embeddings(result.features, manifest["output_path"])
    trace_path = str(manifest["output_path"]) + ".train.json"
    with open(trace_path, "w", encoding="utf-8") as fh:
        json.dump(result.trace_dict(), fh, indent=2)
    return result
