"""Builds a small scene JSON plus PNG images for exporter tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

WIDTH, HEIGHT = 96, 72


def identity_camera(camera_id: int, tx: float) -> dict:
    return {
        "camera_id": camera_id,
        "K": [80.0, 0.0, WIDTH / 2, 0.0, 80.0, HEIGHT / 2, 0.0, 0.0, 1.0],
        "R": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        "t": [tx, 0.0, 1.0],
        "width": WIDTH,
        "height": HEIGHT,
    }


def instance(instance_id: int, box, class_id: int = 1) -> dict:
    return {
        "bbox": list(box),
        "class_id": class_id,
        "instance_id": instance_id,
        "source": "gt",
    }


def gradient_image(path: Path, seed: int) -> None:
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 200, size=3)
    x = np.linspace(0, 55, WIDTH)[None, :, None]
    y = np.linspace(0, 55, HEIGHT)[:, None, None]
    pixels = np.clip(base[None, None, :] + x + y, 0, 255).astype(np.uint8)
    Image.fromarray(pixels, mode="RGB").save(path)


@pytest.fixture
def scene_dir(tmp_path: Path) -> Path:
    """A two-view scene with three instances and real image files."""
    images = tmp_path / "images"
    images.mkdir()
    gradient_image(images / "cam1.png", seed=1)
    gradient_image(images / "cam2.png", seed=2)
    scene = {
        "scene_id": "exporter-fixture",
        "difficulty": "synthetic",
        "cameras": [identity_camera(1, 0.0), identity_camera(2, 0.1)],
        "views": [
            {
                "camera_id": 1,
                "image_path": "images/cam1.png",
                "instances": [
                    instance(10, (8.0, 6.0, 28.0, 26.0)),
                    instance(11, (40.0, 30.0, 70.0, 60.0)),
                ],
            },
            {
                "camera_id": 2,
                "image_path": "images/cam2.png",
                "instances": [instance(10, (12.0, 6.0, 32.0, 26.0))],
            },
        ],
    }
    (tmp_path / "scene.json").write_text(json.dumps(scene, indent=2))
    return tmp_path
