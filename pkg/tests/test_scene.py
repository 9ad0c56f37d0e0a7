"""Data model validation, IoU, and detection-to-identity assignment."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvassoc.scene import (
    CameraModel,
    EmbeddingTable,
    InstanceBox,
    InvariantError,
    Scene,
    SceneView,
    assign_detections_to_gt,
    iou,
)

from conftest import gt_box, make_camera


class TestCameraModel:
    def test_valid_camera(self):
        cam = make_camera(1)
        assert cam.image_diagonal == pytest.approx(1000.0)

    def test_rejects_non_orthonormal_rotation(self):
        r = np.eye(3)
        r[0, 0] = 1.5
        with pytest.raises(InvariantError, match="rotation"):
            make_camera(1, rotation=r)

    def test_rejects_reflection(self):
        r = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(InvariantError, match="det"):
            make_camera(1, rotation=r)

    def test_rejects_nonpositive_focal(self):
        with pytest.raises(InvariantError, match="fx"):
            make_camera(1, f=-2.0)

    def test_rejects_principal_point_outside_image(self):
        with pytest.raises(InvariantError, match="principal point"):
            make_camera(1, principal=(900.0, 300.0))

    def test_arrays_are_immutable(self):
        cam = make_camera(1)
        with pytest.raises(ValueError):
            cam.rotation[0, 0] = 2.0


class TestInstanceBox:
    def test_rejects_inverted_box_naming_instance(self):
        with pytest.raises(InvariantError, match="instance 7"):
            InstanceBox(box=(10, 0, 5, 5), class_id=0, instance_id=7)

    def test_rejects_flat_box(self):
        with pytest.raises(InvariantError):
            InstanceBox(box=(0, 5, 10, 5), class_id=0, instance_id=1)

    def test_center_and_area(self):
        b = gt_box(1, (0, 0, 10, 20))
        assert b.center == (5.0, 10.0)
        assert b.area == 200.0

    def test_unknown_source_rejected(self):
        with pytest.raises(ValueError, match="source"):
            InstanceBox(box=(0, 0, 1, 1), class_id=0, instance_id=1, source="maybe")


class TestSceneView:
    def test_duplicate_gt_instance_id_rejected(self):
        with pytest.raises(InvariantError, match="duplicate ground-truth"):
            SceneView(camera=make_camera(1), instances=(gt_box(3), gt_box(3, (20, 20, 30, 30))))

    def test_duplicate_detection_ids_allowed(self):
        dets = tuple(
            InstanceBox(box=(i, 0, i + 5, 5), class_id=0, instance_id=-1, source="det")
            for i in range(2)
        )
        view = SceneView(camera=make_camera(1), instances=dets)
        assert len(view.instances) == 2


class TestScene:
    def test_needs_two_views(self):
        with pytest.raises(InvariantError, match="at least 2"):
            Scene(scene_id="s", views=(SceneView(camera=make_camera(1), instances=()),))

    def test_duplicate_camera_rejected(self):
        views = tuple(SceneView(camera=make_camera(1), instances=()) for _ in range(2))
        with pytest.raises(InvariantError, match="duplicate camera_id"):
            Scene(scene_id="s", views=views)

    def test_unknown_difficulty_rejected(self):
        views = (
            SceneView(camera=make_camera(1), instances=()),
            SceneView(camera=make_camera(2), instances=()),
        )
        with pytest.raises(ValueError, match="difficulty"):
            Scene(scene_id="s", views=views, difficulty="brutal")


class TestEmbeddingTable:
    def test_vectors_stored_as_float32(self):
        t = EmbeddingTable(dim=3, entries={(1, 1): (np.ones(3), np.zeros(3))})
        app, sur = t.vectors(1, 1)
        assert app.dtype == np.float32 and sur.dtype == np.float32

    def test_wrong_length_rejected(self):
        with pytest.raises(InvariantError, match="length"):
            EmbeddingTable(dim=3, entries={(1, 1): (np.ones(2), np.zeros(3))})

    def test_nan_rejected(self):
        bad = np.array([1.0, np.nan, 0.0])
        with pytest.raises(InvariantError, match="finite"):
            EmbeddingTable(dim=3, entries={(1, 1): (bad, np.zeros(3))})

    def test_missing_key_reports_ids(self):
        t = EmbeddingTable(dim=2, entries={(1, 5): (np.ones(2), np.ones(2))})
        with pytest.raises(KeyError, match="camera 2, instance 5"):
            t.vectors(2, 5)


class TestIoU:
    def test_identical_boxes(self):
        assert iou((0, 0, 2, 2), (0, 0, 2, 2)) == 1.0

    def test_disjoint_boxes(self):
        assert iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0

    def test_touching_boxes_are_disjoint(self):
        assert iou((0, 0, 1, 1), (1, 0, 2, 1)) == 0.0

    def test_quarter_overlap(self):
        # intersection 1, union 4 + 4 - 1 = 7
        assert iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1.0 / 7.0, abs=1e-12)

    def test_accepts_instance_boxes(self):
        assert iou(gt_box(1, (0, 0, 2, 2)), gt_box(2, (1, 1, 3, 3))) == pytest.approx(1 / 7)

    @given(
        st.tuples(
            st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 40), st.floats(0.1, 40)
        ),
        st.tuples(
            st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 40), st.floats(0.1, 40)
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetric(self, a, b):
        box_a = (a[0], a[1], a[0] + a[2], a[1] + a[3])
        box_b = (b[0], b[1], b[0] + b[2], b[1] + b[3])
        assert iou(box_a, box_b) == pytest.approx(iou(box_b, box_a), abs=1e-12)
        assert 0.0 <= iou(box_a, box_b) <= 1.0


def _det(box, instance_id=-1, class_id=0):
    return InstanceBox(box=box, class_id=class_id, instance_id=instance_id, source="det")


class TestAssignDetectionsToGt:
    def test_identical_detections_inherit_ids(self):
        gts = [gt_box(10, (0, 0, 5, 5)), gt_box(20, (10, 10, 15, 15))]
        dets = [_det(g.box) for g in gts]
        out = assign_detections_to_gt(dets, gts)
        assert [b.instance_id for b in out] == [10, 20]
        assert all(b.source == "det" for b in out)

    def test_nonoverlapping_detection_gets_fresh_negative_id(self):
        gts = [gt_box(10, (0, 0, 5, 5))]
        dets = [_det((50, 50, 60, 60))]
        out = assign_detections_to_gt(dets, gts)
        assert out[0].instance_id < 0

    def test_fresh_ids_are_unique(self):
        dets = [_det((50 + i * 20, 50, 60 + i * 20, 60)) for i in range(3)]
        out = assign_detections_to_gt(dets, [gt_box(1, (0, 0, 5, 5))])
        ids = [b.instance_id for b in out]
        assert len(set(ids)) == 3 and all(i < 0 for i in ids)

    def test_low_iou_match_rejected_by_floor(self):
        gts = [gt_box(10, (0, 0, 10, 10))]
        dets = [_det((8, 8, 18, 18))]  # IoU = 4/196 << 0.5
        out = assign_detections_to_gt(dets, gts, iou_floor=0.5)
        assert out[0].instance_id < 0

    def test_matches_brute_force_max_total_iou(self):
        gts = [
            gt_box(1, (0, 0, 10, 10)),
            gt_box(2, (20, 0, 30, 10)),
            gt_box(3, (40, 0, 50, 10)),
        ]
        dets = [_det((g.box[0] + 1, 1, g.box[2] + 1, 11)) for g in reversed(gts)]
        out = assign_detections_to_gt(dets, gts)

        best_total, best_perm = -1.0, None
        for perm in itertools.permutations(range(3)):
            total = sum(iou(dets[d], gts[g]) for d, g in enumerate(perm))
            if total > best_total:
                best_total, best_perm = total, perm
        expected = [gts[g].instance_id for g in best_perm]
        assert [b.instance_id for b in out] == expected

    def test_never_drops_or_duplicates(self, rng):
        gts = [gt_box(i, (10 * i, 0, 10 * i + 8, 8)) for i in range(5)]
        jitter = rng.uniform(-2, 2, size=(5, 2)).round(2)
        dets = [
            _det((g.box[0] + dx, g.box[1] + dy, g.box[2] + dx, g.box[3] + dy))
            for g, (dx, dy) in zip(gts, jitter)
        ]
        out = assign_detections_to_gt(dets, gts)
        assert len(out) == len(dets)
        inherited = [b.instance_id for b in out if b.instance_id >= 0]
        assert len(set(inherited)) == len(inherited)

    def test_rejects_gt_source_in_detections(self):
        with pytest.raises(InvariantError, match="source"):
            assign_detections_to_gt([gt_box(1)], [gt_box(1)])

    def test_rejects_bad_floor(self):
        with pytest.raises(ValueError, match="iou_floor"):
            assign_detections_to_gt([], [], iou_floor=1.5)
