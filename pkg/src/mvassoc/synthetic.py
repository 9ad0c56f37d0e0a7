"""Deterministic tabletop simulator.

Generates worlds of objects on (and above) the z = 0 table plane, a
multi-camera rig aimed at the table, per-view boxes, exact ground truth, and
oracle embeddings.  Everything derives from one integer seed, so any
generated suite is reproducible bit for bit.

Boxes are built around the exact projection of a per-object anchor point so
that geometric identities hold to numerical precision:

- ``box_anchor="center"`` (default) centers the box on the projected object
  centroid; box centers of co-visible objects are then true pixel
  correspondences, which is what the epipolar soft constraint consumes.
- ``box_anchor="bottom"`` puts the bottom-edge midpoint on the projected
  base-center point; for objects resting on the table this anchor lies on
  the z = 0 plane, which is what the homography baseline consumes.

Appearance noise is a smooth function of the camera's line of sight, so two
views of the same object drift apart as the angle between the cameras grows;
this reproduces the viewpoint-difference degradation regime.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .formats import save_embeddings, save_scene
from .geometry import project_point
from .scene import (
    CameraModel,
    EmbeddingTable,
    InstanceBox,
    Scene,
    SceneView,
)

MODE_UNIQUE = "unique_instance"
MODE_CLASS_LEVEL = "class_level"
EMBEDDING_MODES = (MODE_UNIQUE, MODE_CLASS_LEVEL)

ANCHOR_CENTER = "center"
ANCHOR_BOTTOM = "bottom"
ANCHORS = (ANCHOR_CENTER, ANCHOR_BOTTOM)

IMAGE_SIZE = (800, 600)
_FOCAL_RANGE = (650.0, 750.0)
_RADIUS_RANGE = (0.5, 1.2)
_ELEVATION_RANGE_DEG = (10.0, 85.0)
_MIN_CAMERA_SEPARATION = 0.2
_MIN_CAMERA_HEIGHT = 0.35  # well above the 0.2 m object elevation cap, so
# plane-transfer error stays finite and grows with elevation
_MIN_VIEW_ANGLE_DEG = 10.0  # no two cameras share a near-identical viewpoint
_OVERHEAD_HEIGHT = 1.0
_NEIGHBOR_RADIUS = 0.25
_MIN_BOX_PX = 6.0


class InfeasibleConfigError(ValueError):
    """The configuration cannot produce a usable scene."""


@dataclass(frozen=True)
class SyntheticObject:
    """One tabletop object: base-center position, physical footprint, and an
    appearance group (objects sharing a group look identical)."""

    object_id: int
    class_id: int
    position: tuple[float, float, float]
    footprint: tuple[float, float, float]
    identical_group: int

    def __post_init__(self) -> None:
        if self.position[2] < 0:
            raise InfeasibleConfigError(
                f"object {self.object_id}: base must be at z >= 0"
            )
        if min(self.footprint) <= 0:
            raise InfeasibleConfigError(
                f"object {self.object_id}: footprint must be positive"
            )

    @property
    def centroid(self) -> tuple[float, float, float]:
        x, y, z = self.position
        return (x, y, z + self.footprint[2] / 2.0)


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_objects: tuple[int, int] = (6, 73)
    n_cameras: int = 9
    identical_fraction: float = 0.0
    elevated_fraction: float = 0.0
    full_occlusion_rate: float = 0.1
    embedding_noise_sigma: float = 0.0
    table_extent: float = 0.7
    embedding_mode: str = MODE_UNIQUE
    embedding_dim: int = 128
    box_anchor: str = ANCHOR_CENTER

    def __post_init__(self) -> None:
        lo, hi = self.n_objects
        if lo < 1 or hi < lo:
            raise InfeasibleConfigError(f"empty object-count range {self.n_objects}")
        if self.n_cameras < 2:
            raise InfeasibleConfigError("need at least 2 cameras")
        for name in ("identical_fraction", "elevated_fraction", "full_occlusion_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InfeasibleConfigError(f"{name} must be in [0, 1], got {v}")
        if self.embedding_noise_sigma < 0:
            raise InfeasibleConfigError("embedding_noise_sigma must be >= 0")
        if self.table_extent <= 0:
            raise InfeasibleConfigError("table_extent must be positive")
        if self.embedding_mode not in EMBEDDING_MODES:
            raise InfeasibleConfigError(f"unknown embedding mode {self.embedding_mode!r}")
        if self.embedding_dim < 1:
            raise InfeasibleConfigError("embedding_dim must be positive")
        if self.box_anchor not in ANCHORS:
            raise InfeasibleConfigError(f"unknown box anchor {self.box_anchor!r}")


@dataclass(frozen=True)
class GroundTruth:
    """Exact per-view visibility, per-view anchor projections, and the
    objects themselves (adjacency between views is implied: co-visible
    objects match themselves, everything else is unmatched)."""

    objects: tuple[SyntheticObject, ...]
    visibility: Mapping[int, frozenset[int]]
    anchor_pixels: Mapping[tuple[int, int], tuple[float, float]]

    def co_visible(self, cam_a: int, cam_b: int) -> frozenset[int]:
        return self.visibility[cam_a] & self.visibility[cam_b]

    def adjacency(self, cam_a: int, cam_b: int) -> dict[int, int | None]:
        """True object-to-object mapping for one view pair."""
        union = self.visibility[cam_a] | self.visibility[cam_b]
        both = self.co_visible(cam_a, cam_b)
        return {o: (o if o in both else None) for o in union}

    def object_by_id(self, object_id: int) -> SyntheticObject:
        return self.objects[object_id]


def _look_at_rotation(center: np.ndarray, target: np.ndarray) -> np.ndarray:
    z_cam = target - center
    z_cam = z_cam / np.linalg.norm(z_cam)
    up = np.array([0.0, 0.0, 1.0])
    x_cam = np.cross(z_cam, up)
    if np.linalg.norm(x_cam) < 1e-9:
        x_cam = np.cross(z_cam, np.array([0.0, 1.0, 0.0]))
    x_cam = x_cam / np.linalg.norm(x_cam)
    y_cam = np.cross(z_cam, x_cam)
    return np.stack([x_cam, y_cam, z_cam])


def _camera_from_pose(camera_id: int, center: np.ndarray, target: np.ndarray, f: float) -> CameraModel:
    w, h = IMAGE_SIZE
    r = _look_at_rotation(center, target)
    return CameraModel(
        camera_id=camera_id,
        intrinsics=np.array([[f, 0.0, w / 2.0], [0.0, f, h / 2.0], [0.0, 0.0, 1.0]]),
        rotation=r,
        translation=-r @ center,
        image_size=(w, h),
    )


def _sample_cameras(rng: np.random.Generator, config: SimConfig) -> list[CameraModel]:
    cameras = [
        _camera_from_pose(
            1,
            np.array([0.0, 0.0, _OVERHEAD_HEIGHT]),
            np.array([0.0, 0.0, 0.0]),
            float(rng.uniform(*_FOCAL_RANGE)),
        )
    ]
    centers = [np.array([0.0, 0.0, _OVERHEAD_HEIGHT])]
    sights = [np.array([0.0, 0.0, -1.0])]
    elev_lo, elev_hi = np.radians(_ELEVATION_RANGE_DEG)
    min_cos = np.cos(np.radians(_MIN_VIEW_ANGLE_DEG))
    for camera_id in range(2, config.n_cameras + 1):
        for _ in range(2000):
            radius = rng.uniform(*_RADIUS_RANGE)
            elev = rng.uniform(elev_lo, elev_hi)
            azim = rng.uniform(0.0, 2.0 * np.pi)
            center = np.array(
                [
                    radius * np.cos(elev) * np.cos(azim),
                    radius * np.cos(elev) * np.sin(azim),
                    radius * np.sin(elev),
                ]
            )
            target = np.array(
                [rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0]
            )
            sight = _unit(target - center)
            if (
                center[2] >= _MIN_CAMERA_HEIGHT
                and all(
                    np.linalg.norm(center - c) >= _MIN_CAMERA_SEPARATION
                    for c in centers
                )
                and all(float(np.dot(sight, s)) <= min_cos for s in sights)
            ):
                break
        else:
            raise InfeasibleConfigError(
                f"could not place camera {camera_id} (separation "
                f">= {_MIN_CAMERA_SEPARATION} m, viewpoints >= "
                f"{_MIN_VIEW_ANGLE_DEG} deg apart)"
            )
        cameras.append(
            _camera_from_pose(camera_id, center, target, float(rng.uniform(*_FOCAL_RANGE)))
        )
        centers.append(center)
        sights.append(sight)
    return cameras


def _sample_objects(rng: np.random.Generator, config: SimConfig) -> list[SyntheticObject]:
    lo, hi = config.n_objects
    n = int(rng.integers(lo, hi + 1))
    half = config.table_extent / 2.0

    n_identical = int(round(config.identical_fraction * n))
    if n_identical < 2:
        n_identical = 0
    identical_ids = set(rng.permutation(n)[:n_identical].tolist())
    n_elevated = int(round(config.elevated_fraction * n))
    elevated_ids = set(rng.permutation(n)[:n_elevated].tolist())

    # identical objects are grouped in twos (a trailing odd one joins the
    # last group); everyone else gets a singleton group
    group_of: dict[int, int] = {}
    next_group = 0
    pending = sorted(identical_ids)
    while len(pending) >= 2:
        a, b = pending.pop(0), pending.pop(0)
        group_of[a] = group_of[b] = next_group
        next_group += 1
    if pending:
        group_of[pending.pop()] = next_group - 1
    for oid in range(n):
        if oid not in group_of:
            group_of[oid] = next_group
            next_group += 1

    objects = []
    for oid in range(n):
        x = rng.uniform(-half, half)
        y = rng.uniform(-half, half)
        z = rng.uniform(0.02, 0.2) if oid in elevated_ids else 0.0
        footprint = (
            float(rng.uniform(0.03, 0.10)),
            float(rng.uniform(0.03, 0.10)),
            float(rng.uniform(0.02, 0.15)),
        )
        objects.append(
            SyntheticObject(
                object_id=oid,
                class_id=100 + group_of[oid],
                position=(float(x), float(y), float(z)),
                footprint=footprint,
                identical_group=group_of[oid],
            )
        )
    return objects


def _project_view(
    rng: np.random.Generator,
    camera: CameraModel,
    objects: list[SyntheticObject],
    config: SimConfig,
) -> tuple[SceneView, frozenset[int], dict[int, tuple[float, float]]]:
    w, h = camera.image_size
    boxes: dict[int, InstanceBox] = {}
    anchors: dict[int, tuple[float, float]] = {}
    for obj in objects:
        anchor_world = obj.centroid if config.box_anchor == ANCHOR_CENTER else obj.position
        pixel = project_point(camera, anchor_world)
        depth = (camera.rotation @ np.asarray(anchor_world) + camera.translation)[2]
        f = camera.intrinsics[0, 0]
        half_w = max(f * obj.footprint[0] / depth, _MIN_BOX_PX) / 2.0
        box_h = max(f * obj.footprint[2] / depth, _MIN_BOX_PX)
        u, v = float(pixel[0]), float(pixel[1])
        if config.box_anchor == ANCHOR_CENTER:
            box = (u - half_w, v - box_h / 2.0, u + half_w, v + box_h / 2.0)
            center = (u, v)
        else:
            box = (u - half_w, v - box_h, u + half_w, v)
            center = (u, v - box_h / 2.0)
        visible = 0.0 <= center[0] <= w and 0.0 <= center[1] <= h
        occluded = rng.random() < config.full_occlusion_rate
        if visible and not occluded:
            boxes[obj.object_id] = InstanceBox(
                box=box, class_id=obj.class_id, instance_id=obj.object_id
            )
            anchors[obj.object_id] = (u, v)

    order = [oid for oid in rng.permutation(len(objects)).tolist() if oid in boxes]
    view = SceneView(
        camera=camera,
        instances=tuple(boxes[oid] for oid in order),
        image_path=None,
    )
    return view, frozenset(boxes), anchors


def generate_scene(config: SimConfig) -> tuple[Scene, GroundTruth, EmbeddingTable]:
    """Generate one scene, its ground truth, and oracle embeddings.

    Deterministic for a given config: the same seed always produces
    bit-identical output.  Raises InfeasibleConfigError when the rig cannot
    be placed or nothing ends up visible anywhere.
    """
    rng = np.random.default_rng(config.seed)
    cameras = _sample_cameras(rng, config)
    objects = _sample_objects(rng, config)

    views = []
    visibility: dict[int, frozenset[int]] = {}
    anchor_pixels: dict[tuple[int, int], tuple[float, float]] = {}
    for camera in cameras:
        view, visible, anchors = _project_view(rng, camera, objects, config)
        views.append(view)
        visibility[camera.camera_id] = visible
        for oid, pix in anchors.items():
            anchor_pixels[(camera.camera_id, oid)] = pix

    if sum(len(v.instances) for v in views) == 0:
        raise InfeasibleConfigError("no object is visible in any view")

    scene = Scene(
        scene_id=f"synth-{config.seed:05d}",
        views=tuple(views),
        difficulty="synthetic",
    )
    ground_truth = GroundTruth(
        objects=tuple(objects),
        visibility=visibility,
        anchor_pixels=anchor_pixels,
    )
    embeddings = oracle_embeddings(
        scene,
        ground_truth,
        mode=config.embedding_mode,
        noise_sigma=config.embedding_noise_sigma,
        seed=config.seed + 1,
        dim=config.embedding_dim,
    )
    return scene, ground_truth, embeddings


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def oracle_embeddings(
    scene: Scene,
    ground_truth: GroundTruth,
    mode: str = MODE_UNIQUE,
    noise_sigma: float = 0.0,
    seed: int = 0,
    dim: int = 128,
) -> EmbeddingTable:
    """Stand-in feature vectors with controllable failure regimes.

    ``unique_instance`` gives every object its own random unit appearance
    vector shared across views; ``class_level`` shares one vector per
    identical group, making group members indistinguishable by appearance.
    Surrounding vectors sum a per-group signature over each object's world
    neighbors within 0.25 m.

    Both vectors receive a perturbation ``sigma * (A_obj @ line_of_sight)``
    that varies smoothly with the camera's viewing direction, so true-pair
    distances grow with the angle between the cameras while staying zero at
    sigma 0.
    """
    if mode not in EMBEDDING_MODES:
        raise ValueError(f"unknown embedding mode {mode!r}")
    rng = np.random.default_rng(seed)
    objects = ground_truth.objects
    n = len(objects)
    groups = sorted({obj.identical_group for obj in objects})

    group_base = {g: _unit(rng.normal(size=dim)) for g in groups}
    group_sig = {g: _unit(rng.normal(size=dim)) for g in groups}
    unique_base = {obj.object_id: _unit(rng.normal(size=dim)) for obj in objects}
    app_field = {obj.object_id: rng.normal(0.0, 1.0 / np.sqrt(dim), (dim, 3)) for obj in objects}
    sur_field = {obj.object_id: rng.normal(0.0, 1.0 / np.sqrt(dim), (dim, 3)) for obj in objects}

    positions = np.array([obj.position[:2] for obj in objects])
    sur_base: dict[int, np.ndarray] = {}
    for obj in objects:
        dists = np.linalg.norm(positions - positions[obj.object_id], axis=1)
        neigh = [
            objects[k].identical_group
            for k in range(n)
            if k != obj.object_id and dists[k] <= _NEIGHBOR_RADIUS
        ]
        acc = np.zeros(dim)
        for g in neigh:
            acc = acc + group_sig[g]
        sur_base[obj.object_id] = acc

    entries: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for view in scene.views:
        sight = view.camera.rotation.T @ np.array([0.0, 0.0, 1.0])
        for inst in view.instances:
            oid = inst.instance_id
            obj = ground_truth.object_by_id(oid)
            base = group_base[obj.identical_group] if mode == MODE_CLASS_LEVEL else unique_base[oid]
            app = base + noise_sigma * (app_field[oid] @ sight)
            sur = sur_base[oid] + noise_sigma * (sur_field[oid] @ sight)
            entries[(view.camera_id, oid)] = (app, sur)
    return EmbeddingTable(dim=dim, entries=entries)


def export_scene(
    scene: Scene,
    ground_truth: GroundTruth,
    embeddings: EmbeddingTable,
    out_dir: str | Path,
) -> tuple[Path, Path]:
    """Write the scene JSON and embedding sidecar; returns both paths.

    Ground truth needs no file of its own: identity is carried by the
    instance ids inside the scene JSON.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene_path = out_dir / f"{scene.scene_id}.json"
    sidecar_path = out_dir / f"{scene.scene_id}.mteb"
    save_scene(scene, scene_path)
    save_embeddings(embeddings, sidecar_path)
    return scene_path, sidecar_path
