"""Scene data model: cameras, annotated views, embeddings, identity assignment.

Conventions used throughout the package:

- World frame: right-handed, z up, table plane at z = 0, units in meters.
- Camera extrinsics are world-to-camera: ``x_cam = R @ x_world + t``.
- Pixels: origin top-left, u right, v down.  Boxes are continuous
  ``(x1, y1, x2, y2)`` with ``x1 < x2`` and ``y1 < y2``; area is
  ``(x2 - x1) * (y2 - y1)`` with no +1 pixel convention.

All types are immutable after construction and safe to share across
parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

DIFFICULTIES = ("easy", "medium", "hard", "synthetic")
SOURCE_GT = "gt"
SOURCE_DETECTION = "det"
SOURCES = (SOURCE_GT, SOURCE_DETECTION)

_ROTATION_TOL = 1e-9


class SceneError(ValueError):
    """Base class for scene ingestion and validation failures."""


class SchemaError(SceneError):
    """A scene file is structurally malformed (missing or mistyped field)."""


class InvariantError(SceneError):
    """A structurally valid value violates a domain invariant."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsics plus a world-to-camera rigid pose.

    Attributes:
        camera_id: Integer identifier, unique within a scene.
        intrinsics: (3, 3) matrix with fx, fy on the diagonal and the
            principal point in the last column; zero skew by default.
        rotation: (3, 3) world-to-camera rotation.
        translation: (3,) world-to-camera translation, meters.
        image_size: (width, height) in pixels.
    """

    camera_id: int
    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self) -> None:
        k = np.asarray(self.intrinsics, dtype=np.float64)
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if k.shape != (3, 3) or r.shape != (3, 3) or t.shape != (3,):
            raise SchemaError(
                f"camera {self.camera_id}: expected 3x3 K, 3x3 R, 3-vector t, "
                f"got {k.shape}, {r.shape}, {t.shape}"
            )
        if not (np.isfinite(k).all() and np.isfinite(r).all() and np.isfinite(t).all()):
            raise InvariantError(f"camera {self.camera_id}: non-finite parameter")
        ortho_err = np.abs(r @ r.T - np.eye(3)).max()
        det_err = abs(np.linalg.det(r) - 1.0)
        if ortho_err > _ROTATION_TOL or det_err > _ROTATION_TOL:
            raise InvariantError(
                f"camera {self.camera_id}: rotation not orthonormal with det +1 "
                f"(orthogonality error {ortho_err:.3g}, det error {det_err:.3g})"
            )
        w, h = self.image_size
        fx, fy = k[0, 0], k[1, 1]
        cx, cy = k[0, 2], k[1, 2]
        if fx <= 0 or fy <= 0:
            raise InvariantError(f"camera {self.camera_id}: fx, fy must be positive")
        if not (0 <= cx <= w and 0 <= cy <= h):
            raise InvariantError(
                f"camera {self.camera_id}: principal point ({cx}, {cy}) outside "
                f"image {w}x{h}"
            )
        object.__setattr__(self, "intrinsics", _freeze(k))
        object.__setattr__(self, "rotation", _freeze(r))
        object.__setattr__(self, "translation", _freeze(t))
        object.__setattr__(self, "image_size", (int(w), int(h)))

    @property
    def image_diagonal(self) -> float:
        w, h = self.image_size
        return float(np.hypot(w, h))


@dataclass(frozen=True)
class InstanceBox:
    """Axis-aligned box with a class label and a cross-view identity.

    ``instance_id`` is unique within a view and shared across views for the
    same physical object.  Negative ids mark detections that matched no
    ground truth.
    """

    box: tuple[float, float, float, float]
    class_id: int
    instance_id: int
    source: str = SOURCE_GT

    def __post_init__(self) -> None:
        x1, y1, x2, y2 = (float(v) for v in self.box)
        if not all(np.isfinite(v) for v in (x1, y1, x2, y2)):
            raise InvariantError(f"box for instance {self.instance_id}: non-finite coordinate")
        if not (x1 < x2 and y1 < y2):
            raise InvariantError(
                f"box for instance {self.instance_id}: requires x1 < x2 and y1 < y2, "
                f"got ({x1}, {y1}, {x2}, {y2})"
            )
        if self.source not in SOURCES:
            raise SchemaError(
                f"box for instance {self.instance_id}: unknown source {self.source!r}"
            )
        object.__setattr__(self, "box", (x1, y1, x2, y2))

    @property
    def center(self) -> tuple[float, float]:
        x1, y1, x2, y2 = self.box
        return ((x1 + x2) / 2.0, (y1 + y2) / 2.0)

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.box
        return (x2 - x1) * (y2 - y1)


@dataclass(frozen=True)
class SceneView:
    """One camera's view of a scene with an ordered, index-addressable
    instance list (distance matrices refer to instances by list index)."""

    camera: CameraModel
    instances: tuple[InstanceBox, ...]
    image_path: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        seen: set[int] = set()
        for inst in self.instances:
            if inst.source != SOURCE_GT:
                continue
            if inst.instance_id in seen:
                raise InvariantError(
                    f"view of camera {self.camera.camera_id}: duplicate ground-truth "
                    f"instance_id {inst.instance_id}"
                )
            seen.add(inst.instance_id)

    @property
    def camera_id(self) -> int:
        return self.camera.camera_id

    def instance_ids(self) -> tuple[int, ...]:
        return tuple(inst.instance_id for inst in self.instances)


@dataclass(frozen=True)
class Scene:
    """A multi-view capture sharing one world frame."""

    scene_id: str
    views: tuple[SceneView, ...]
    difficulty: str = "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "views", tuple(self.views))
        if len(self.views) < 2:
            raise InvariantError(f"scene {self.scene_id}: needs at least 2 views")
        if self.difficulty not in DIFFICULTIES:
            raise SchemaError(
                f"scene {self.scene_id}: unknown difficulty {self.difficulty!r}"
            )
        ids = [v.camera_id for v in self.views]
        if len(set(ids)) != len(ids):
            raise InvariantError(f"scene {self.scene_id}: duplicate camera_id in views")

    def view_by_camera(self, camera_id: int) -> SceneView:
        for v in self.views:
            if v.camera_id == camera_id:
                return v
        raise KeyError(f"scene {self.scene_id}: no view for camera {camera_id}")

    def camera_ids(self) -> tuple[int, ...]:
        return tuple(sorted(v.camera_id for v in self.views))


@dataclass(frozen=True)
class EmbeddingTable:
    """Appearance and surrounding vectors keyed by (camera_id, instance_id).

    Vectors are stored as float32 so that writing and re-reading the binary
    sidecar preserves them bit-exactly.
    """

    dim: int
    entries: Mapping[tuple[int, int], tuple[np.ndarray, np.ndarray]]

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise InvariantError("embedding dim must be positive")
        frozen: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        for key, (app, sur) in self.entries.items():
            app = np.asarray(app, dtype=np.float32).reshape(-1)
            sur = np.asarray(sur, dtype=np.float32).reshape(-1)
            if app.shape != (self.dim,) or sur.shape != (self.dim,):
                raise InvariantError(
                    f"embedding {key}: expected vectors of length {self.dim}, "
                    f"got {app.shape[0]} and {sur.shape[0]}"
                )
            if not (np.isfinite(app).all() and np.isfinite(sur).all()):
                raise InvariantError(f"embedding {key}: non-finite component")
            frozen[(int(key[0]), int(key[1]))] = (_freeze(app), _freeze(sur))
        object.__setattr__(self, "entries", frozen)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: tuple[int, int]) -> bool:
        return key in self.entries

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.entries)

    def vectors(self, camera_id: int, instance_id: int) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self.entries[(camera_id, instance_id)]
        except KeyError:
            raise KeyError(
                f"no embedding for camera {camera_id}, instance {instance_id}"
            ) from None

    def appearance(self, camera_id: int, instance_id: int) -> np.ndarray:
        return self.vectors(camera_id, instance_id)[0]

    def surrounding(self, camera_id: int, instance_id: int) -> np.ndarray:
        return self.vectors(camera_id, instance_id)[1]


def _as_xyxy(box) -> tuple[float, float, float, float]:
    if isinstance(box, InstanceBox):
        return box.box
    x1, y1, x2, y2 = (float(v) for v in box)
    return x1, y1, x2, y2


def iou(a, b) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ax1, ay1, ax2, ay2 = _as_xyxy(a)
    bx1, by1, bx2, by2 = _as_xyxy(b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def assign_detections_to_gt(
    detections: list[InstanceBox],
    ground_truth: list[InstanceBox],
    iou_floor: float = 0.5,
) -> list[InstanceBox]:
    """Give detected boxes the identity of the ground-truth box they cover.

    A maximum-total-IoU bipartite assignment is computed between detections
    and ground truth (cost 1 - IoU).  A detection matched with
    IoU >= ``iou_floor`` inherits that ground-truth instance_id; every other
    detection receives a fresh unique negative id.  Detections are never
    dropped and no ground-truth id is used twice.

    Output order follows the input detection order.
    """
    from .association import DistanceMatrix, kuhn_munkres_assign

    if not 0.0 < iou_floor < 1.0:
        raise ValueError(f"iou_floor must be in (0, 1), got {iou_floor}")
    for det in detections:
        if det.source != SOURCE_DETECTION:
            raise InvariantError(
                f"instance {det.instance_id}: assign_detections_to_gt expects "
                f"source={SOURCE_DETECTION!r}"
            )

    gt_for_det: dict[int, int] = {}
    if detections and ground_truth:
        ious = np.array(
            [[iou(d, g) for g in ground_truth] for d in detections], dtype=np.float64
        )
        pairs = kuhn_munkres_assign(DistanceMatrix(1.0 - ious))
        for di, gi in pairs:
            if ious[di, gi] >= iou_floor:
                gt_for_det[di] = ground_truth[gi].instance_id

    out: list[InstanceBox] = []
    next_fresh = -1
    for di, det in enumerate(detections):
        if di in gt_for_det:
            new_id = gt_for_det[di]
        else:
            new_id = next_fresh
            next_fresh -= 1
        out.append(
            InstanceBox(
                box=det.box,
                class_id=det.class_id,
                instance_id=new_id,
                source=SOURCE_DETECTION,
            )
        )
    return out
