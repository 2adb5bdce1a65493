"""Backbones: every model exposes embed(x) -> penultimate activations and
forward(x) -> class logits computed from them.

``custom-cnn`` and ``ae`` are small torch-native nets that handle tiny
images; the torchvision backbones (random initialization, no weight
downloads) upsample small inputs to their minimum working size.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class SmallCNN(nn.Module):
    """Two conv blocks, pooled to a 64-d penultimate layer."""

    feature_dim = 64

    def __init__(self, in_channels: int, num_classes: int, dropout: float):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, 16, 3, padding=1)
        self.conv2 = nn.Conv2d(16, 32, 3, padding=1)
        self.pool = nn.AdaptiveAvgPool2d(4)
        self.dropout = nn.Dropout(dropout)
        self.fc = nn.Linear(32 * 16, self.feature_dim)
        self.head = nn.Linear(self.feature_dim, num_classes)

    def embed(self, x):
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        x = F.relu(self.conv2(x))
        x = self.pool(x).flatten(1)
        return F.relu(self.fc(self.dropout(x)))

    def forward(self, x):
        return self.head(self.embed(x))


class ConvEncoder(nn.Module):
    """Autoencoder-style conv encoder with a linear head on the latent code."""

    feature_dim = 32

    def __init__(self, in_channels: int, num_classes: int, dropout: float):
        super().__init__()
        self.encode = nn.Sequential(
            nn.Conv2d(in_channels, 8, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(8, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(2),
        )
        self.dropout = nn.Dropout(dropout)
        self.latent = nn.Linear(16 * 4, self.feature_dim)
        self.head = nn.Linear(self.feature_dim, num_classes)

    def embed(self, x):
        return self.latent(self.dropout(self.encode(x).flatten(1)))

    def forward(self, x):
        return self.head(self.embed(x))


class TorchvisionBackbone(nn.Module):
    """VGG16/ResNet wrapper: the penultimate layer feeds the final classifier."""

    def __init__(self, name: str, in_channels: int, num_classes: int, dropout: float):
        super().__init__()
        import torchvision.models as tvm

        builders = {"vgg16": tvm.vgg16, "resnet18": tvm.resnet18, "resnet50": tvm.resnet50}
        net = builders[name](weights=None)
        if name == "vgg16":
            self.feature_dim = net.classifier[-1].in_features
            net.classifier[-1] = nn.Identity()
        else:
            self.feature_dim = net.fc.in_features
            net.fc = nn.Identity()
        self.backbone = net
        self.in_channels = in_channels
        self.min_side = 64
        self.dropout = nn.Dropout(dropout)
        self.head = nn.Linear(self.feature_dim, num_classes)

    def embed(self, x):
        if self.in_channels == 1:
            x = x.repeat(1, 3, 1, 1)
        elif self.in_channels != 3:
            x = x[:, :3] if x.shape[1] > 3 else x.repeat(1, 3, 1, 1)[:, :3]
        if x.shape[-1] < self.min_side or x.shape[-2] < self.min_side:
            x = F.interpolate(x, size=(self.min_side, self.min_side), mode="bilinear", align_corners=False)
        return self.dropout(self.backbone(x))

    def forward(self, x):
        return self.head(self.embed(x))


def build_model(architecture: str, in_channels: int, num_classes: int, dropout: float) -> nn.Module:
    if architecture == "custom-cnn":
        return SmallCNN(in_channels, num_classes, dropout)
    if architecture == "ae":
        return ConvEncoder(in_channels, num_classes, dropout)
    if architecture in ("vgg16", "resnet18", "resnet50"):
        return TorchvisionBackbone(architecture, in_channels, num_classes, dropout)
    raise ValueError(f"unknown architecture {architecture!r}")
