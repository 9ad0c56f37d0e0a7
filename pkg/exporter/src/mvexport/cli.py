"""Command-line entry point for the sidecar exporter."""

from __future__ import annotations

import argparse
import sys

from .export import ExportJob, export_embeddings
from .features import BACKBONE_HISTOGRAM, BACKBONES, BackboneError
from .sceneio import SceneFileError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvexport",
        description="Export instance embeddings from scene images to an MTEB sidecar",
    )
    parser.add_argument("scene", help="scene JSON file")
    parser.add_argument("--images", default=".", help="root directory for image paths")
    parser.add_argument("--out", required=True, help="sidecar output path")
    parser.add_argument("--backbone", choices=BACKBONES, default=BACKBONE_HISTOGRAM)
    parser.add_argument("--dim", type=int, default=None,
                        help="expected embedding dim (must match the backbone)")
    parser.add_argument("--zoom-out", type=float, default=2.0,
                        help="enlargement ratio for the surrounding crop")
    parser.add_argument("--weights", default=None,
                        help="local state-dict file for the pretrained backbone")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(
            scene_path=args.scene,
            image_root=args.images,
            out_path=args.out,
            backbone=args.backbone,
            zoom_out_ratio=args.zoom_out,
            dim=args.dim,
            weights_path=args.weights,
        )
        out = export_embeddings(job)
    except (BackboneError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SceneFileError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
