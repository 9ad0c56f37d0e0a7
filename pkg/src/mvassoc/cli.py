"""Command-line entry point.

Subcommands wire the pipeline into reproducible runs:

- ``synth``      generate scene files + sidecars + a manifest from a seed range
- ``associate``  run cross-view association per scene, write result JSON
- ``evaluate``   join association output with ground truth, emit metrics
- ``sweep``      grid-sweep one parameter and emit one metrics row per value
- ``validate``   check scene/sidecar files against the format contracts

All randomness flows from explicit seeds and every output is written with
sorted keys, so reruns are byte-identical regardless of ``--jobs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .association import (
    MODE_HOMOGRAPHY,
    MODES,
    DistanceMatrix,
    ScorerConfig,
    add_epipolar_penalty,
    associate_scene,
    association_from_dict,
    association_to_dict,
    build_distance_matrix,
    normalize_distances,
)
from .formats import SidecarError, load_embeddings, load_scene
from .geometry import camera_angle_difference
from .metrics import (
    IPAA_LEVELS,
    ScoredPair,
    ViewPairRecord,
    adjacency_from_matching,
    angle_binned_report,
    confidence_from_distance,
    report_csv_rows,
    report_to_dict,
)
from .scene import SceneError
from .synthetic import (
    ANCHOR_CENTER,
    ANCHORS,
    EMBEDDING_MODES,
    MODE_UNIQUE,
    InfeasibleConfigError,
    SimConfig,
    export_scene,
    generate_scene,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

SWEEP_PARAMS = ("zoom-out", "epipolar-weight", "threshold")


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        seeds = list(range(int(lo), int(hi)))
    else:
        seeds = [int(v) for v in text.split(",") if v != ""]
    if not seeds:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return seeds


def _parse_range(text: str) -> tuple[int, int]:
    lo, hi = text.split("..", 1)
    return int(lo), int(hi)


def _parse_grid(text: str) -> list[float]:
    values = [float(v) for v in text.split(",") if v != ""]
    if not values:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    return values


def _scene_paths(scenes_arg: str) -> list[Path]:
    """Resolve a manifest file or a directory into sorted scene JSON paths."""
    root = Path(scenes_arg)
    if not root.exists():
        raise FileNotFoundError(f"scene input not found: {root}")
    if root.is_file():
        if root.name == "manifest.json":
            manifest = json.loads(root.read_text(encoding="utf-8"))
            return [root.parent / entry["scene_file"] for entry in manifest["scenes"]]
        return [root]
    manifest = root / "manifest.json"
    if manifest.exists():
        return _scene_paths(str(manifest))
    paths = sorted(
        p
        for p in root.glob("*.json")
        if p.name != "manifest.json" and not p.name.endswith(".assoc.json")
    )
    if not paths:
        raise FileNotFoundError(f"no scene JSON files under {root}")
    return paths


def _sidecar_for(scene_path: Path) -> Path:
    return scene_path.with_suffix(".mteb")


def _scorer_config(args: argparse.Namespace) -> ScorerConfig:
    return ScorerConfig(
        mode=args.mode,
        use_epipolar=args.epipolar,
        epipolar_weight=args.epipolar_weight,
        threshold=args.threshold,
        zoom_out_ratio=args.zoom_out,
    )


def _load_scene_and_embeddings(scene_path: Path, config: ScorerConfig):
    scene = load_scene(scene_path)
    if config.mode == MODE_HOMOGRAPHY:
        return scene, None
    sidecar = _sidecar_for(scene_path)
    if not sidecar.exists():
        raise FileNotFoundError(f"missing embedding sidecar: {sidecar}")
    return scene, load_embeddings(sidecar, scene)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for seed in args.seeds:
        config = SimConfig(
            seed=seed,
            n_objects=args.objects,
            n_cameras=args.cameras,
            identical_fraction=args.identical_fraction,
            elevated_fraction=args.elevated_fraction,
            full_occlusion_rate=args.occlusion_rate,
            embedding_noise_sigma=args.noise_sigma,
            table_extent=args.table_extent,
            embedding_mode=args.embedding_mode,
            embedding_dim=args.embedding_dim,
            box_anchor=args.box_anchor,
        )
        scene, ground_truth, embeddings = generate_scene(config)
        scene_path, sidecar_path = export_scene(scene, ground_truth, embeddings, out_dir)
        entries.append(
            {
                "scene_id": scene.scene_id,
                "seed": seed,
                "scene_file": scene_path.name,
                "sidecar_file": sidecar_path.name,
            }
        )
    manifest = {
        "config": {
            "n_objects": list(args.objects),
            "n_cameras": args.cameras,
            "identical_fraction": args.identical_fraction,
            "elevated_fraction": args.elevated_fraction,
            "full_occlusion_rate": args.occlusion_rate,
            "embedding_noise_sigma": args.noise_sigma,
            "table_extent": args.table_extent,
            "embedding_mode": args.embedding_mode,
            "embedding_dim": args.embedding_dim,
            "box_anchor": args.box_anchor,
        },
        "scenes": entries,
    }
    _write_json(out_dir / "manifest.json", manifest)
    print(f"wrote {len(entries)} scenes to {out_dir}")
    return EXIT_OK


def _associate_one(job: tuple[str, ScorerConfig]) -> tuple[str, dict]:
    scene_path, config = Path(job[0]), job[1]
    scene, embeddings = _load_scene_and_embeddings(scene_path, config)
    results = associate_scene(scene, embeddings, config)
    return scene.scene_id, association_to_dict(scene, results)


def cmd_associate(args: argparse.Namespace) -> int:
    config = _scorer_config(args)
    scene_paths = _scene_paths(args.scenes)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(str(p), config) for p in scene_paths]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outputs = list(pool.map(_associate_one, jobs))
    else:
        outputs = [_associate_one(job) for job in jobs]

    for scene_id, payload in sorted(outputs):
        _write_json(out_dir / f"{scene_id}.assoc.json", payload)
    print(f"associated {len(outputs)} scenes into {out_dir}")
    return EXIT_OK


def _evaluate_records(
    scene_paths: list[Path],
    assoc_dir: Path | None,
    config: ScorerConfig,
    jobs: int = 1,
    normalization: str = "global",
) -> list[ViewPairRecord]:
    """Build per-pair records: truth join, angles, and scored candidates.

    Candidate scores are recomputed from the scenes with the supplied scorer
    config (the association output format carries matched pairs only).  The
    base matrices are scaled with evaluation-set extrema when
    ``normalization`` is global; with the epipolar constraint enabled the
    weighted penalty is added on top and the result rescaled, so scores
    reflect the same geometry the matcher saw.  A zero penalty weight
    reproduces the no-epipolar scores exactly.
    """
    worker_jobs = [(str(p), str(assoc_dir) if assoc_dir else None, config) for p in scene_paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_scene = list(pool.map(_evaluate_scene_payload, worker_jobs))
    else:
        per_scene = [_evaluate_scene_payload(job) for job in worker_jobs]

    flat = [item for _, items in sorted(per_scene) for item in items]

    def pooled_stats(mats) -> tuple[float, float]:
        lo = min((float(m.min()) for m in mats if m.size), default=0.0)
        hi = max((float(m.max()) for m in mats if m.size), default=1.0)
        return lo, hi

    if normalization == "global":
        stats = pooled_stats([raw for *_, raw, _ in flat])
    else:
        stats = None

    scored_values = []
    for *_, raw, penalty in flat:
        if not raw.size:
            scored_values.append(raw)
            continue
        base = normalize_distances(
            DistanceMatrix(raw), "global" if stats else "per_pair", stats
        ).values
        scored_values.append(base if penalty is None else base + penalty)

    if any(penalty is not None for *_, penalty in flat):
        if normalization == "global":
            final_stats = pooled_stats(scored_values)
            scored_values = [
                normalize_distances(DistanceMatrix(v), "global", final_stats).values
                if v.size
                else v
                for v in scored_values
            ]
        else:
            scored_values = [
                normalize_distances(DistanceMatrix(v), "per_pair").values if v.size else v
                for v in scored_values
            ]

    records = []
    for (scene_id, cameras, angle, ids_a, ids_b, matches, _, _), values in zip(
        flat, scored_values
    ):
        adjacency = adjacency_from_matching(ids_a, ids_b, matches)
        scored = []
        for i, id_a in enumerate(ids_a):
            for j, id_b in enumerate(ids_b):
                scored.append(
                    ScoredPair(
                        confidence=confidence_from_distance(float(values[i, j])),
                        is_positive=id_a == id_b,
                    )
                )
        records.append(
            ViewPairRecord(
                scene_id=scene_id,
                cameras=cameras,
                angle_deg=angle,
                adjacency=adjacency,
                scored=tuple(scored),
                n_matches=len(matches),
            )
        )
    return records


def _evaluate_scene_payload(job: tuple[str, str | None, ScorerConfig]):
    scene_path, assoc_dir, config = Path(job[0]), job[1], job[2]
    scene, embeddings = _load_scene_and_embeddings(scene_path, config)

    if assoc_dir is not None:
        assoc_path = Path(assoc_dir) / f"{scene.scene_id}.assoc.json"
        if not assoc_path.exists():
            raise FileNotFoundError(f"missing association output: {assoc_path}")
        assoc_id, results = association_from_dict(
            json.loads(assoc_path.read_text(encoding="utf-8"))
        )
        if assoc_id != scene.scene_id:
            raise SceneError(
                f"{assoc_path}: association is for scene {assoc_id!r}, "
                f"expected {scene.scene_id!r}"
            )
    else:
        results = associate_scene(scene, embeddings, config)

    views = {v.camera_id: v for v in scene.views}
    items = []
    for (cam_a, cam_b), result in sorted(results.items()):
        if cam_a not in views or cam_b not in views:
            raise SceneError(
                f"scene {scene.scene_id}: association references unknown camera "
                f"pair ({cam_a}, {cam_b})"
            )
        view_a, view_b = views[cam_a], views[cam_b]
        raw = build_distance_matrix(view_a, view_b, embeddings, config).values
        penalty = None
        if config.use_epipolar and raw.size:
            zeros = DistanceMatrix(raw * 0.0)
            penalty = add_epipolar_penalty(
                zeros, view_a, view_b, config.epipolar_weight
            ).values
        items.append(
            (
                scene.scene_id,
                (cam_a, cam_b),
                camera_angle_difference(view_a.camera, view_b.camera),
                view_a.instance_ids(),
                view_b.instance_ids(),
                result.matched_index_pairs(),
                raw,
                penalty,
            )
        )
    return scene.scene_id, items


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _scorer_config(args)
    scene_paths = _scene_paths(args.scenes)
    records = _evaluate_records(
        scene_paths,
        Path(args.assoc),
        config,
        jobs=args.jobs,
        normalization=args.normalization,
    )
    report = angle_binned_report(records, bin_width=args.bin_width)

    out = Path(args.out)
    if _output_format(args, out) == "csv":
        _write_csv(out, report_csv_rows(report))
    else:
        _write_json(out, report_to_dict(report))
    if args.csv:
        _write_csv(Path(args.csv), report_csv_rows(report))
    ip = report.ipaa
    print(
        f"pairs={report.pair_count} ap={report.ap:.4f} fpr95={report.fpr95:.4f} "
        + " ".join(f"ipaa{k}={ip[k]:.4f}" for k in IPAA_LEVELS)
    )
    return EXIT_OK


def _write_csv(path: Path, rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _output_format(args: argparse.Namespace, out: Path) -> str:
    if args.format is not None:
        return args.format
    return "csv" if out.suffix.lower() == ".csv" else "json"


def cmd_sweep(args: argparse.Namespace) -> int:
    scene_paths = _scene_paths(args.scenes)
    rows = [
        ["param", "value", "matches", "ap", "fpr95"]
        + [f"ipaa_{x}" for x in IPAA_LEVELS]
    ]
    payload = []
    for value in args.grid:
        overrides = {}
        if args.param == "zoom-out":
            overrides["zoom_out_ratio"] = value
        elif args.param == "epipolar-weight":
            overrides["use_epipolar"] = True
            overrides["epipolar_weight"] = value
        else:
            overrides["threshold"] = value
        config = ScorerConfig(
            mode=args.mode,
            use_epipolar=overrides.get("use_epipolar", args.epipolar),
            epipolar_weight=overrides.get("epipolar_weight", args.epipolar_weight),
            threshold=overrides.get("threshold", args.threshold),
            zoom_out_ratio=overrides.get("zoom_out_ratio", args.zoom_out),
        )
        records = _evaluate_records(scene_paths, None, config, jobs=args.jobs)
        report = angle_binned_report(records, bin_width=args.bin_width)
        n_matches = sum(rec.n_matches for rec in records)
        rows.append(
            [args.param, value, n_matches, report.ap, report.fpr95]
            + [report.ipaa[x] for x in IPAA_LEVELS]
        )
        payload.append(
            {
                "param": args.param,
                "value": value,
                "matches": n_matches,
                "ap": report.ap,
                "fpr95": report.fpr95,
                "ipaa": {str(x): report.ipaa[x] for x in IPAA_LEVELS},
            }
        )
    out = Path(args.out)
    if _output_format(args, out) == "json":
        _write_json(out, {"rows": payload})
    else:
        _write_csv(out, rows)
    print(f"swept {args.param} over {len(args.grid)} values into {out}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scene_paths = _scene_paths(args.scenes)
    failures = 0
    for scene_path in scene_paths:
        try:
            scene = load_scene(scene_path)
            sidecar = _sidecar_for(scene_path)
            if sidecar.exists():
                table = load_embeddings(sidecar, scene)
                detail = f"{len(table)} embeddings, dim {table.dim}"
            else:
                detail = "no sidecar"
            print(f"OK   {scene_path.name}: {len(scene.views)} views, {detail}")
        except (SceneError, SidecarError, OSError) as exc:
            failures += 1
            print(f"FAIL {scene_path.name}: {exc}")
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def _add_scorer_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--mode", choices=MODES, default="appearance_only")
    sub.add_argument("--epipolar", action="store_true", help="add the epipolar soft constraint")
    sub.add_argument("--epipolar-weight", type=float, default=1.0)
    sub.add_argument("--threshold", type=float, default=0.5)
    sub.add_argument("--zoom-out", type=float, default=2.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvassoc",
        description="Multi-camera instance association toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers over scenes")
    parser.add_argument("--seed", type=int, default=0, help="base seed for seedable steps")
    parser.add_argument(
        "--format",
        choices=("json", "csv"),
        default=None,
        help="output format (default: inferred from the --out extension)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    p.add_argument("--seeds", type=_parse_seeds, required=True, help="e.g. 0..10 or 3,7,9")
    p.add_argument("--out", required=True)
    p.add_argument("--objects", type=_parse_range, default=(6, 73), help="e.g. 6..73")
    p.add_argument("--cameras", type=int, default=9)
    p.add_argument("--identical-fraction", type=float, default=0.0)
    p.add_argument("--elevated-fraction", type=float, default=0.0)
    p.add_argument("--occlusion-rate", type=float, default=0.1)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--table-extent", type=float, default=0.7)
    p.add_argument("--embedding-mode", choices=EMBEDDING_MODES, default=MODE_UNIQUE)
    p.add_argument("--embedding-dim", type=int, default=128)
    p.add_argument("--box-anchor", choices=ANCHORS, default=ANCHOR_CENTER)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("associate", help="associate instances across views")
    p.add_argument("--scenes", required=True, help="scene dir, manifest, or single file")
    p.add_argument("--out", required=True)
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("evaluate", help="score association output against ground truth")
    p.add_argument("--scenes", required=True)
    p.add_argument("--assoc", required=True, help="directory of *.assoc.json files")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None, help="also write the flat CSV here")
    p.add_argument("--bin-width", type=float, default=15.0)
    p.add_argument("--normalization", choices=("global", "per_pair"), default="global")
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid-sweep one parameter")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p.add_argument("--grid", type=_parse_grid, required=True, help="e.g. 1.0,1.5,2.0")
    p.add_argument("--bin-width", type=float, default=15.0)
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check scene and sidecar files")
    p.add_argument("--scenes", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SceneError, SidecarError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
