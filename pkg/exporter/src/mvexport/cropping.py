"""Crop geometry shared with the association toolkit.

The zoom-out rule must match the consumer's rule bit for bit (a frozen
100-case fixture in the test suites of both packages pins this down):
scale the box about its center, then clamp to the image.
"""

from __future__ import annotations

import numpy as np


def crop_with_zoom_out(
    box: tuple[float, float, float, float],
    ratio: float,
    image_size: tuple[int, int],
) -> tuple[float, float, float, float]:
    """Scale ``box`` about its center by ``ratio`` and clamp to the image."""
    if ratio < 1.0:
        raise ValueError(f"zoom-out ratio must be >= 1, got {ratio}")
    x1, y1, x2, y2 = (float(v) for v in box)
    w, h = image_size
    cx, cy = (x1 + x2) / 2.0, (y1 + y2) / 2.0
    half_w = (x2 - x1) * ratio / 2.0
    half_h = (y2 - y1) * ratio / 2.0
    out = (
        max(0.0, cx - half_w),
        max(0.0, cy - half_h),
        min(float(w), cx + half_w),
        min(float(h), cy + half_h),
    )
    if not (out[0] < out[2] and out[1] < out[3]):
        raise ValueError(f"crop of box {box} at ratio {ratio} is empty after clamping")
    return out


def pixel_window(
    rect: tuple[float, float, float, float], image: np.ndarray
) -> np.ndarray:
    """Integer pixel window covering a continuous rectangle.

    Outer-rounds the bounds (floor/ceil), clamps to the image, and requires
    at least one pixel in each direction.
    """
    h, w = image.shape[0], image.shape[1]
    x1 = max(0, int(np.floor(rect[0])))
    y1 = max(0, int(np.floor(rect[1])))
    x2 = min(w, int(np.ceil(rect[2])))
    y2 = min(h, int(np.ceil(rect[3])))
    if x2 <= x1 or y2 <= y1:
        raise ValueError(f"rectangle {rect} lies outside the {w}x{h} image")
    return image[y1:y2, x1:x2]
