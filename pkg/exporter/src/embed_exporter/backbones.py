"""Feature-extractor registry.

Backbones map a PIL image (already resized to the configured input size) to
a fixed-length float vector. All bundled backbones are deterministic:
exporting the same folder twice produces identical bytes.

``pixel16`` needs only numpy. ``seeded-cnn`` and the torchvision residual
networks need torch; the residual networks additionally need a local weights
file, since this tool never downloads anything.
"""
from __future__ import annotations

import numpy as np
from PIL import Image


class BackboneUnavailableError(RuntimeError):
    """The requested backbone cannot be constructed in this environment."""


class PixelBackbone:
    """16x16 RGB downsample, values scaled to [0, 1]; dimension 768."""

    name = "pixel16"
    dimension = 16 * 16 * 3

    def __call__(self, image: Image.Image) -> np.ndarray:
        small = image.resize((16, 16), Image.BILINEAR)
        return np.asarray(small, dtype=np.float64).reshape(-1) / 255.0


class SeededCnnBackbone:
    """Small convolutional stack with seed-fixed random weights; dimension 64.

    Untrained but deterministic: useful for exercising the full export
    pipeline offline. Random projections preserve enough structure that
    color/texture-separable toy classes stay separable.
    """

    name = "seeded-cnn"
    dimension = 64

    def __init__(self, seed: int = 0):
        try:
            import torch
            from torch import nn
        except ImportError as exc:
            raise BackboneUnavailableError("seeded-cnn requires torch") from exc
        self._torch = torch
        torch.manual_seed(seed)
        self._net = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
        )
        self._net.eval()

    def __call__(self, image: Image.Image) -> np.ndarray:
        torch = self._torch
        array = np.asarray(image, dtype=np.float32) / 255.0
        tensor = torch.from_numpy(array).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            features = self._net(tensor)
        return features.squeeze(0).numpy().astype(np.float64)


class ResNetBackbone:
    """Torchvision residual network with the classifier head removed.

    Weights must be supplied as a local state-dict file; this tool never
    reaches the network.
    """

    def __init__(self, arch: str, weights_path: str | None):
        try:
            import torch
            from torchvision import models
        except ImportError as exc:
            raise BackboneUnavailableError(f"{arch} requires torch and torchvision") from exc
        if weights_path is None:
            raise BackboneUnavailableError(
                f"{arch} needs --weights <state_dict.pth>; downloads are not supported"
            )
        self._torch = torch
        builder = getattr(models, arch)
        model = builder(weights=None)
        state = torch.load(weights_path, map_location="cpu")
        model.load_state_dict(state)
        model.fc = torch.nn.Identity()
        model.eval()
        self._net = model
        self.name = arch
        self.dimension = 512 if arch in ("resnet18", "resnet34") else 2048

    def __call__(self, image: Image.Image) -> np.ndarray:
        torch = self._torch
        array = np.asarray(image, dtype=np.float32) / 255.0
        mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
        std = np.array([0.229, 0.224, 0.225], dtype=np.float32)
        array = (array - mean) / std
        tensor = torch.from_numpy(array).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            features = self._net(tensor)
        return features.squeeze(0).numpy().astype(np.float64)


BACKBONE_NAMES = ("pixel16", "seeded-cnn", "resnet18", "resnet34", "resnet50")


def build_backbone(name: str, weights_path: str | None = None):
    if name == "pixel16":
        return PixelBackbone()
    if name == "seeded-cnn":
        return SeededCnnBackbone()
    if name in ("resnet18", "resnet34", "resnet50"):
        return ResNetBackbone(name, weights_path)
    raise ValueError(f"unknown backbone {name!r}; available: {', '.join(BACKBONE_NAMES)}")
