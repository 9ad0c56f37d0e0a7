"""Minimal reader for the scene JSON format.

Only the fields the exporter needs are pulled out: per-view camera ids,
image paths, image sizes, and instance boxes with their ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class SceneFileError(ValueError):
    """The scene JSON is missing or malformed."""


@dataclass(frozen=True)
class InstanceRef:
    instance_id: int
    box: tuple[float, float, float, float]


@dataclass(frozen=True)
class ViewRef:
    camera_id: int
    image_path: str | None
    image_size: tuple[int, int]
    instances: tuple[InstanceRef, ...]


def read_scene_file(path: str | Path) -> tuple[str, list[ViewRef]]:
    """Return the scene id and one ViewRef per view entry."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneFileError(f"{path}: cannot parse scene JSON ({exc})") from exc

    try:
        sizes = {
            cam["camera_id"]: (int(cam["width"]), int(cam["height"]))
            for cam in data["cameras"]
        }
        views = []
        for view in data["views"]:
            camera_id = int(view["camera_id"])
            if camera_id not in sizes:
                raise SceneFileError(
                    f"{path}: view references unknown camera {camera_id}"
                )
            instances = tuple(
                InstanceRef(
                    instance_id=int(inst["instance_id"]),
                    box=tuple(float(v) for v in inst["bbox"]),
                )
                for inst in view["instances"]
            )
            views.append(
                ViewRef(
                    camera_id=camera_id,
                    image_path=view.get("image_path"),
                    image_size=sizes[camera_id],
                    instances=instances,
                )
            )
        return str(data["scene_id"]), views
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneFileError):
            raise
        raise SceneFileError(f"{path}: malformed scene JSON ({exc})") from exc
