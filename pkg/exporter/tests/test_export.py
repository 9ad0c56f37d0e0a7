"""Export jobs: determinism, record counts, and error modes."""

from __future__ import annotations

import json

import numpy as np
import pytest

from mvexport.export import ExportJob, export_embeddings
from mvexport.features import BackboneError, histogram_features
from mvexport.sidecar import read_sidecar_header


def job_for(scene_dir, **overrides) -> ExportJob:
    defaults = dict(
        scene_path=str(scene_dir / "scene.json"),
        image_root=str(scene_dir),
        out_path=str(scene_dir / "out.mteb"),
    )
    defaults.update(overrides)
    return ExportJob(**defaults)


class TestHistogramFeatures:
    def test_identical_crops_give_identical_vectors(self, rng=np.random.default_rng(3)):
        patch = rng.integers(0, 256, size=(12, 9, 3)).astype(np.uint8)
        np.testing.assert_array_equal(
            histogram_features(patch), histogram_features(patch.copy())
        )

    def test_normalized_float32(self):
        patch = np.full((4, 4, 3), 128, dtype=np.uint8)
        vec = histogram_features(patch)
        assert vec.dtype == np.float32
        assert vec.sum() == pytest.approx(1.0, abs=1e-6)

    def test_empty_patch_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            histogram_features(np.zeros((0, 3, 3)))


class TestExportJob:
    def test_record_count_equals_total_instances(self, scene_dir):
        out = export_embeddings(job_for(scene_dir))
        dim, count = read_sidecar_header(out)
        scene = json.loads((scene_dir / "scene.json").read_text())
        expected = sum(len(v["instances"]) for v in scene["views"])
        assert count == expected == 3
        assert dim == 24  # 3 channels x 8 bins

    def test_deterministic_bytes(self, scene_dir):
        a = export_embeddings(job_for(scene_dir, out_path=str(scene_dir / "a.mteb")))
        b = export_embeddings(job_for(scene_dir, out_path=str(scene_dir / "b.mteb")))
        assert a.read_bytes() == b.read_bytes()

    def test_dim_mismatch_rejected(self, scene_dir):
        with pytest.raises(BackboneError, match="dim"):
            export_embeddings(job_for(scene_dir, dim=128))

    def test_matching_dim_accepted(self, scene_dir):
        out = export_embeddings(job_for(scene_dir, dim=24))
        assert read_sidecar_header(out) == (24, 3)

    def test_missing_image_fails(self, scene_dir):
        (scene_dir / "images" / "cam1.png").unlink()
        with pytest.raises(FileNotFoundError, match="cam1.png"):
            export_embeddings(job_for(scene_dir))

    def test_box_outside_image_fails(self, scene_dir):
        data = json.loads((scene_dir / "scene.json").read_text())
        data["views"][0]["instances"][0]["bbox"] = [200.0, 200.0, 240.0, 240.0]
        (scene_dir / "scene.json").write_text(json.dumps(data))
        with pytest.raises(ValueError, match="empty|outside"):
            export_embeddings(job_for(scene_dir))

    def test_negative_instance_id_fails(self, scene_dir):
        data = json.loads((scene_dir / "scene.json").read_text())
        data["views"][0]["instances"][0]["instance_id"] = -4
        (scene_dir / "scene.json").write_text(json.dumps(data))
        with pytest.raises(ValueError, match="negative"):
            export_embeddings(job_for(scene_dir))

    def test_pretrained_without_weights_fails(self, scene_dir):
        with pytest.raises(BackboneError, match="weights"):
            export_embeddings(job_for(scene_dir, backbone="pretrained"))

    def test_zoom_out_changes_surrounding_only_when_context_differs(self, scene_dir):
        out1 = export_embeddings(
            job_for(scene_dir, out_path=str(scene_dir / "r15.mteb"), zoom_out_ratio=1.5)
        )
        out2 = export_embeddings(
            job_for(scene_dir, out_path=str(scene_dir / "r25.mteb"), zoom_out_ratio=2.5)
        )
        assert out1.read_bytes() != out2.read_bytes()


class TestCli:
    def test_cli_round_trip(self, scene_dir, capsys):
        from mvexport.cli import main

        out = scene_dir / "cli.mteb"
        code = main(
            [str(scene_dir / "scene.json"), "--images", str(scene_dir), "--out", str(out)]
        )
        assert code == 0
        assert out.exists()

    def test_cli_missing_scene(self, scene_dir, capsys):
        from mvexport.cli import main

        code = main([str(scene_dir / "absent.json"), "--out", str(scene_dir / "x.mteb")])
        assert code == 1

    def test_cli_bad_dim_is_usage_error(self, scene_dir):
        from mvexport.cli import main

        code = main(
            [str(scene_dir / "scene.json"), "--images", str(scene_dir),
             "--out", str(scene_dir / "x.mteb"), "--dim", "99"]
        )
        assert code == 2
