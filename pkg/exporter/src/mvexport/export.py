"""The export job: crop every instance, embed both crops, write the sidecar."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .cropping import crop_with_zoom_out, pixel_window
from .features import BACKBONE_HISTOGRAM, BACKBONES, BackboneError, make_backbone
from .sceneio import read_scene_file


@dataclass(frozen=True)
class ExportJob:
    """One run of the exporter.

    ``dim`` is optional; when given it must equal the backbone's native
    output dim (there is no projection layer).
    """

    scene_path: str
    image_root: str
    out_path: str
    backbone: str = BACKBONE_HISTOGRAM
    zoom_out_ratio: float = 2.0
    dim: int | None = None
    weights_path: str | None = None

    def __post_init__(self) -> None:
        if self.backbone not in BACKBONES:
            raise BackboneError(f"unknown backbone {self.backbone!r}")
        if self.zoom_out_ratio < 1.0:
            raise ValueError(f"zoom-out ratio must be >= 1, got {self.zoom_out_ratio}")
        if self.dim is not None and self.dim <= 0:
            raise ValueError("dim must be positive")


def _load_image(root: Path, image_path: str | None, camera_id: int) -> np.ndarray:
    if image_path is None:
        raise FileNotFoundError(
            f"view of camera {camera_id} has no image_path; the exporter "
            f"needs source images"
        )
    full = root / image_path
    try:
        with Image.open(full) as img:
            return np.asarray(img.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise FileNotFoundError(f"cannot read image {full}: {exc}") from exc


def export_embeddings(job: ExportJob) -> Path:
    """Write one sidecar record per instance per view and return the path.

    The appearance vector comes from the tight crop, the surrounding vector
    from the zoom-out crop (instance included).  Records are sorted by
    (camera_id, instance_id), so histogram mode is fully reproducible.
    """
    feature_fn, native_dim = make_backbone(job.backbone, job.weights_path)
    if job.dim is not None and job.dim != native_dim:
        raise BackboneError(
            f"requested dim {job.dim} does not match the {job.backbone} "
            f"backbone output dim {native_dim}"
        )

    _, views = read_scene_file(job.scene_path)
    root = Path(job.image_root)
    records: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for view in views:
        if not view.instances:
            continue
        image = _load_image(root, view.image_path, view.camera_id)
        for inst in view.instances:
            if inst.instance_id < 0:
                raise ValueError(
                    f"camera {view.camera_id}: instance id {inst.instance_id} "
                    f"is negative and cannot be stored in the sidecar"
                )
            tight = crop_with_zoom_out(inst.box, 1.0, view.image_size)
            context = crop_with_zoom_out(inst.box, job.zoom_out_ratio, view.image_size)
            appearance = feature_fn(pixel_window(tight, image))
            surrounding = feature_fn(pixel_window(context, image))
            records[(view.camera_id, inst.instance_id)] = (appearance, surrounding)

    from .sidecar import write_sidecar

    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sidecar(records, native_dim, out)
    return out
