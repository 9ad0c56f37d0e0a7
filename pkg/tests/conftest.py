"""Shared builders for cameras, views, and small scenes."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from mvassoc.scene import CameraModel, InstanceBox, Scene, SceneView


def make_camera(
    camera_id: int = 1,
    f: float = 700.0,
    image_size: tuple[int, int] = (800, 600),
    rotation: np.ndarray | None = None,
    translation: np.ndarray | None = None,
    principal: tuple[float, float] | None = None,
) -> CameraModel:
    w, h = image_size
    cx, cy = principal if principal is not None else (w / 2.0, h / 2.0)
    return CameraModel(
        camera_id=camera_id,
        intrinsics=np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]]),
        rotation=np.eye(3) if rotation is None else rotation,
        translation=np.zeros(3) if translation is None else np.asarray(translation, float),
        image_size=image_size,
    )


def unit_camera(camera_id: int = 1) -> CameraModel:
    """fx = fy = 1, principal point at the origin: pixels equal view-plane
    coordinates, which makes projection arithmetic readable."""
    return make_camera(camera_id, f=1.0, image_size=(100, 100), principal=(0.0, 0.0))


def random_camera(rng: np.random.Generator, camera_id: int = 1) -> CameraModel:
    """Random pose aimed at the work volume around the origin, with a random
    roll about the optical axis so all rotation degrees of freedom vary."""
    direction = rng.normal(size=3)
    center = direction / np.linalg.norm(direction) * rng.uniform(1.5, 3.0)
    target = rng.uniform(-0.2, 0.2, size=3)
    z_cam = target - center
    z_cam = z_cam / np.linalg.norm(z_cam)
    up = np.array([0.0, 0.0, 1.0])
    x_cam = np.cross(z_cam, up)
    if np.linalg.norm(x_cam) < 1e-6:
        x_cam = np.cross(z_cam, np.array([0.0, 1.0, 0.0]))
    x_cam = x_cam / np.linalg.norm(x_cam)
    y_cam = np.cross(z_cam, x_cam)
    roll = Rotation.from_euler("z", rng.uniform(0, 360), degrees=True).as_matrix()
    r = roll @ np.stack([x_cam, y_cam, z_cam])
    return make_camera(
        camera_id,
        f=float(rng.uniform(500, 900)),
        rotation=r,
        translation=-r @ center,
    )


def gt_box(instance_id: int, box=(0.0, 0.0, 10.0, 10.0), class_id: int = 0) -> InstanceBox:
    return InstanceBox(box=box, class_id=class_id, instance_id=instance_id)


def two_view_scene() -> Scene:
    cam1 = make_camera(1, translation=np.array([0.0, 0.0, 1.0]))
    cam2 = make_camera(2, translation=np.array([0.1, 0.0, 1.0]))
    return Scene(
        scene_id="fixture",
        views=(
            SceneView(camera=cam1, instances=(gt_box(1), gt_box(2, (20, 20, 30, 30)))),
            SceneView(camera=cam2, instances=(gt_box(1, (5, 0, 15, 10)),)),
        ),
        difficulty="synthetic",
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
