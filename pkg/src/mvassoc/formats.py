"""On-disk formats: the canonical scene JSON and the binary embedding sidecar.

Scene JSON (UTF-8)::

    {
      "scene_id": str,
      "difficulty": "easy" | "medium" | "hard" | "synthetic",
      "cameras": [
        {"camera_id": int, "K": [9 floats row-major], "R": [9 floats row-major],
         "t": [3 floats], "width": int, "height": int}
      ],
      "views": [
        {"camera_id": int, "image_path": str | null,
         "instances": [
           {"bbox": [x1, y1, x2, y2], "class_id": int,
            "instance_id": int, "source": "gt" | "det"}
         ]}
      ]
    }

Embedding sidecar (binary, little-endian): magic ``MTEB``, u32 version = 1,
u32 dim, u64 count, then ``count`` records of
``{u32 camera_id, u32 instance_id, dim x f32 appearance, dim x f32 surrounding}``.
Records are written in sorted (camera_id, instance_id) order so identical
tables always serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .scene import (
    CameraModel,
    EmbeddingTable,
    InstanceBox,
    Scene,
    SceneView,
    SchemaError,
)

SIDECAR_MAGIC = b"MTEB"
SIDECAR_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_RECORD_KEY = struct.Struct("<II")


class SidecarError(ValueError):
    """The embedding sidecar is malformed or inconsistent with its scene."""


def _require(mapping: dict, key: str, kind, where: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"{where}: field {key!r} must be a number")
        return float(value)
    if kind is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaError(f"{where}: field {key!r} must be an integer")
        return value
    if not isinstance(value, kind):
        raise SchemaError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _float_list(mapping: dict, key: str, n: int, where: str) -> list[float]:
    raw = _require(mapping, key, list, where)
    if len(raw) != n or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
    ):
        raise SchemaError(f"{where}: field {key!r} must be a list of {n} numbers")
    return [float(v) for v in raw]


def scene_to_dict(scene: Scene) -> dict:
    """Serialize a scene to the canonical JSON structure."""
    cameras = []
    views = []
    for view in scene.views:
        cam = view.camera
        cameras.append(
            {
                "camera_id": cam.camera_id,
                "K": [float(v) for v in cam.intrinsics.reshape(-1)],
                "R": [float(v) for v in cam.rotation.reshape(-1)],
                "t": [float(v) for v in cam.translation],
                "width": cam.image_size[0],
                "height": cam.image_size[1],
            }
        )
        views.append(
            {
                "camera_id": view.camera_id,
                "image_path": view.image_path,
                "instances": [
                    {
                        "bbox": [float(v) for v in inst.box],
                        "class_id": inst.class_id,
                        "instance_id": inst.instance_id,
                        "source": inst.source,
                    }
                    for inst in view.instances
                ],
            }
        )
    return {
        "scene_id": scene.scene_id,
        "difficulty": scene.difficulty,
        "cameras": cameras,
        "views": views,
    }


def scene_from_dict(data: dict) -> Scene:
    """Build and fully validate a scene from the canonical JSON structure."""
    if not isinstance(data, dict):
        raise SchemaError("scene: top level must be an object")
    scene_id = _require(data, "scene_id", str, "scene")
    difficulty = _require(data, "difficulty", str, "scene")

    cameras: dict[int, CameraModel] = {}
    for i, cam_raw in enumerate(_require(data, "cameras", list, "scene")):
        where = f"cameras[{i}]"
        camera_id = _require(cam_raw, "camera_id", int, where)
        k = np.array(_float_list(cam_raw, "K", 9, where)).reshape(3, 3)
        r = np.array(_float_list(cam_raw, "R", 9, where)).reshape(3, 3)
        t = np.array(_float_list(cam_raw, "t", 3, where))
        width = _require(cam_raw, "width", int, where)
        height = _require(cam_raw, "height", int, where)
        if camera_id in cameras:
            raise SchemaError(f"{where}: duplicate camera_id {camera_id}")
        cameras[camera_id] = CameraModel(
            camera_id=camera_id,
            intrinsics=k,
            rotation=r,
            translation=t,
            image_size=(width, height),
        )

    views = []
    for i, view_raw in enumerate(_require(data, "views", list, "scene")):
        where = f"views[{i}]"
        camera_id = _require(view_raw, "camera_id", int, where)
        if camera_id not in cameras:
            raise SchemaError(f"{where}: camera_id {camera_id} has no camera entry")
        image_path = view_raw.get("image_path")
        if image_path is not None and not isinstance(image_path, str):
            raise SchemaError(f"{where}: field 'image_path' must be string or null")
        instances = []
        for j, inst_raw in enumerate(_require(view_raw, "instances", list, where)):
            iw = f"{where}.instances[{j}]"
            bbox = _float_list(inst_raw, "bbox", 4, iw)
            instances.append(
                InstanceBox(
                    box=tuple(bbox),
                    class_id=_require(inst_raw, "class_id", int, iw),
                    instance_id=_require(inst_raw, "instance_id", int, iw),
                    source=_require(inst_raw, "source", str, iw),
                )
            )
        views.append(
            SceneView(camera=cameras[camera_id], instances=tuple(instances), image_path=image_path)
        )

    return Scene(scene_id=scene_id, views=tuple(views), difficulty=difficulty)


def save_scene(scene: Scene, path: str | Path) -> None:
    path = Path(path)
    path.write_text(
        json.dumps(scene_to_dict(scene), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_scene(path: str | Path) -> Scene:
    """Load and validate a scene JSON file.

    Raises:
        FileNotFoundError: the path does not exist.
        SchemaError: malformed JSON or missing/mistyped fields.
        InvariantError: a domain invariant is violated (message names the
            offending camera or box).
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return scene_from_dict(data)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write the binary sidecar.  Keys must be non-negative (u32 on disk)."""
    keys = sorted(table.entries)
    for cam_id, inst_id in keys:
        if cam_id < 0 or inst_id < 0:
            raise SidecarError(
                f"sidecar keys must be non-negative, got ({cam_id}, {inst_id})"
            )
    chunks = [_HEADER.pack(SIDECAR_MAGIC, SIDECAR_VERSION, table.dim, len(keys))]
    for key in keys:
        app, sur = table.entries[key]
        chunks.append(_RECORD_KEY.pack(key[0], key[1]))
        chunks.append(app.astype("<f4").tobytes())
        chunks.append(sur.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_embeddings(path: str | Path, scene: Scene) -> EmbeddingTable:
    """Read a sidecar and cross-check every key against the scene.

    Raises:
        SidecarError: bad magic or version, zero dim, truncated or oversized
            payload, duplicate record keys, or a key that resolves to no
            instance in the scene.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SidecarError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, dim, count = _HEADER.unpack_from(raw, 0)
    if magic != SIDECAR_MAGIC:
        raise SidecarError(f"{path}: bad magic {magic!r}")
    if version != SIDECAR_VERSION:
        raise SidecarError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise SidecarError(f"{path}: dim must be positive")

    record_size = _RECORD_KEY.size + 2 * 4 * dim
    expected = _HEADER.size + count * record_size
    if len(raw) < expected:
        raise SidecarError(
            f"{path}: truncated file (expected {expected} bytes, got {len(raw)})"
        )
    if len(raw) > expected:
        raise SidecarError(
            f"{path}: {len(raw) - expected} trailing bytes after {count} records"
        )

    known = {
        (view.camera_id, inst.instance_id)
        for view in scene.views
        for inst in view.instances
    }
    entries: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    offset = _HEADER.size
    for _ in range(count):
        cam_id, inst_id = _RECORD_KEY.unpack_from(raw, offset)
        offset += _RECORD_KEY.size
        app = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        sur = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        key = (cam_id, inst_id)
        if key in entries:
            raise SidecarError(f"{path}: duplicate record for key {key}")
        if key not in known:
            raise SidecarError(
                f"{path}: record ({cam_id}, {inst_id}) matches no instance in "
                f"scene {scene.scene_id!r}"
            )
        entries[key] = (app, sur)
    return EmbeddingTable(dim=dim, entries=entries)
