"""Image loading for the manifest's data_ref.

Two source layouts:

* a ``.npy`` stack shaped (n, H, W) or (n, H, W, C), any numeric dtype;
* a directory containing ``index.csv`` (header ``id,filename``) plus image
  files, decoded through Pillow.

Pixels are globally standardized to mean 1 and standard deviation 1.
"""

from __future__ import annotations

import csv
import os

import numpy as np


class DataError(ValueError):
    pass


def _normalize(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.float32)
    std = float(x.std())
    if std == 0.0:
        return np.ones_like(x)
    return (x - float(x.mean())) / std + 1.0


def _to_nchw(x: np.ndarray) -> np.ndarray:
    if x.ndim == 3:
        x = x[:, :, :, None]
    if x.ndim != 4:
        raise DataError(f"image stack must be (n, H, W) or (n, H, W, C), got shape {x.shape}")
    return np.transpose(x, (0, 3, 1, 2))


def _load_directory(path: str) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as e:
        raise DataError("directory data sources need Pillow installed") from e
    index = os.path.join(path, "index.csv")
    if not os.path.exists(index):
        raise DataError(f"{path}: missing index.csv")
    rows = []
    with open(index, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["id", "filename"]:
            raise DataError(f"{index}: expected 'id,filename' header")
        for row in reader:
            if len(row) < 2:
                raise DataError(f"{index}: malformed row {row!r}")
            rows.append((int(row[0]), row[1]))
    rows.sort()
    if [i for i, _ in rows] != list(range(len(rows))):
        raise DataError(f"{index}: ids must be dense 0..n-1")
    images = []
    for _, fname in rows:
        with Image.open(os.path.join(path, fname)) as img:
            images.append(np.asarray(img))
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise DataError(f"images disagree on shape: {sorted(shapes)}")
    return np.stack(images)


def load_images(data_ref: str, image_root: str | None = None) -> np.ndarray:
    """Resolve a manifest data_ref to a normalized (n, C, H, W) float32 stack."""
    path = data_ref
    if image_root is not None and not os.path.isabs(path):
        path = os.path.join(image_root, path)
    if not os.path.exists(path):
        raise DataError(f"data_ref not found: {path}")
    if os.path.isdir(path):
        raw = _load_directory(path)
    elif path.endswith(".npy"):
        try:
            raw = np.load(path)
        except ValueError as e:
            raise DataError(f"{path}: {e}")
    else:
        raise DataError(f"data_ref must be a .npy stack or an image directory, got {path}")
    if raw.shape[0] < 1:
        raise DataError("image stack is empty")
    return _normalize(_to_nchw(raw))
