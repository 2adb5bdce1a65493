import json

import numpy as np
import pytest


def make_image_stack(n=64, side=16, classes=2, seed=0):
    """Tiny synthetic dataset: class-dependent blob location plus noise."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % classes
    images = rng.normal(60.0, 10.0, size=(n, side, side)).astype(np.float32)
    for i in range(n):
        if y[i] == 0:
            images[i, : side // 2, : side // 2] += 120.0
        else:
            images[i, side // 2 :, side // 2 :] += 120.0
    return images, y


@pytest.fixture
def golden_fixture(tmp_path):
    """64-image npy stack, manifest (no pseudo-labels), and paths."""
    images, y = make_image_stack()
    data_path = tmp_path / "images.npy"
    np.save(data_path, images)
    labeled = [[int(i), int(y[i])] for i in range(16)]  # 16 labeled, both classes
    out_path = tmp_path / "features.gnze"
    manifest = {
        "data_ref": str(data_path),
        "labeled": labeled,
        "pseudo": None,
        "ramp_weight": 0.0,
        "epoch": 0,
        "seed": 7,
        "output_path": str(out_path),
    }
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return {
        "images": images,
        "truth": y,
        "manifest": manifest,
        "manifest_path": manifest_path,
        "out_path": out_path,
        "tmp_path": tmp_path,
    }


def write_pseudo_csv(path, rows):
    lines = ["id,label,weight"]
    lines.extend(f"{i},{c},{w}" for i, c, w in rows)
    path.write_text("\n".join(lines) + "\n")
