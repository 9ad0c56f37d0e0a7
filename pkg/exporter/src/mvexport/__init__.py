"""Embedding sidecar exporter.

Reads a scene JSON, crops every annotated instance from its source image
(a tight crop for appearance, an enlarged crop for surrounding context),
runs the selected backbone over both crops, and writes the binary MTEB
sidecar that the association toolkit consumes.

This package talks to the association toolkit only through its file
formats; it never imports it.
"""

__version__ = "0.1.0"

from .cropping import crop_with_zoom_out, pixel_window
from .export import ExportJob, export_embeddings
from .features import BackboneError, histogram_features
from .sceneio import SceneFileError, read_scene_file
from .sidecar import write_sidecar
