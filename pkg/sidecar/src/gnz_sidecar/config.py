"""Sidecar configuration, its own JSON file separate from the manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass

ARCHITECTURES = ("custom-cnn", "ae", "vgg16", "resnet18", "resnet50")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SidecarConfig:
    architecture: str = "custom-cnn"
    learning_rate: float = 0.001
    dropout: float = 0.2
    epochs: int = 1
    batch_size: int = 32
    device: str = "cpu"
    image_root: str | None = None
    state_dir: str | None = None

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")


def load_config(path) -> SidecarConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    try:
        return SidecarConfig(**raw)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}")
