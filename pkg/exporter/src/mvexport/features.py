"""Feature backbones: deterministic color histograms, optional CNN."""

from __future__ import annotations

import numpy as np

HISTOGRAM_BINS = 8
HISTOGRAM_DIM = 3 * HISTOGRAM_BINS

BACKBONE_HISTOGRAM = "histogram"
BACKBONE_PRETRAINED = "pretrained"
BACKBONES = (BACKBONE_HISTOGRAM, BACKBONE_PRETRAINED)


class BackboneError(ValueError):
    """The requested backbone is unavailable or mismatched."""


def histogram_features(patch: np.ndarray, bins: int = HISTOGRAM_BINS) -> np.ndarray:
    """L1-normalized per-channel color histogram of an RGB patch.

    Fully deterministic: the same pixels always give the same float32
    vector, which is what makes histogram-mode sidecars reproducible.
    """
    p = np.asarray(patch, dtype=np.float64)
    if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] == 0 or p.shape[1] == 0:
        raise ValueError(f"expected a non-empty (h, w, 3) patch, got shape {p.shape}")
    edges = np.linspace(0.0, 255.0, bins + 1)
    parts = [np.histogram(p[:, :, ch].reshape(-1), bins=edges)[0] for ch in range(3)]
    hist = np.concatenate(parts).astype(np.float64)
    return (hist / hist.sum()).astype(np.float32)


class PretrainedBackbone:
    """ResNet-18 penultimate features from a local weights file.

    Weights are never downloaded; pass the path to a saved state dict.
    Output dim is 512.
    """

    dim = 512

    def __init__(self, weights_path: str):
        try:
            import torch
            from torchvision.models import resnet18
        except ImportError as exc:
            raise BackboneError(
                "pretrained mode needs torch and torchvision; install the "
                "'pretrained' extra or use the histogram backbone"
            ) from exc
        self._torch = torch
        model = resnet18()
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        model.fc = torch.nn.Identity()
        model.eval()
        self._model = model

    def __call__(self, patch: np.ndarray) -> np.ndarray:
        torch = self._torch
        x = np.asarray(patch, dtype=np.float32) / 255.0
        x = torch.from_numpy(x).permute(2, 0, 1).unsqueeze(0)
        x = torch.nn.functional.interpolate(
            x, size=(224, 224), mode="bilinear", align_corners=False
        )
        with torch.no_grad():
            out = self._model(x)
        return out.squeeze(0).numpy().astype(np.float32)


def make_backbone(name: str, weights_path: str | None = None):
    """Return (feature_fn, native_dim) for the selected backbone."""
    if name == BACKBONE_HISTOGRAM:
        return histogram_features, HISTOGRAM_DIM
    if name == BACKBONE_PRETRAINED:
        if weights_path is None:
            raise BackboneError(
                "pretrained mode needs --weights pointing to a local ResNet-18 "
                "state dict; no weights are downloaded"
            )
        backbone = PretrainedBackbone(weights_path)
        return backbone, backbone.dim
    raise BackboneError(f"unknown backbone {name!r}")
