"""Cross-view instance association.

Distance matrices come from pluggable scorers (appearance, fused
appearance+surrounding, bag-of-words, plane homography), get scaled to
[0, 1], optionally receive the epipolar soft penalty, and are solved by
minimum-cost bipartite assignment with a final rejection threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import geometry
from .descriptors import chi_square_distance, cosine_similarity, l2_distance
from .scene import EmbeddingTable, Scene, SceneView

MODE_APPEARANCE = "appearance_only"
MODE_ASNET = "asnet_fusion"
MODE_VBOW = "vbow"
MODE_HOMOGRAPHY = "homography"
MODE_CUSTOM = "custom"
MODES = (MODE_APPEARANCE, MODE_ASNET, MODE_VBOW, MODE_HOMOGRAPHY, MODE_CUSTOM)

NORM_PER_PAIR = "per_pair"
NORM_GLOBAL = "global"

_DEGENERATE_FILL = 0.5


@dataclass(frozen=True)
class ScorerConfig:
    """Knobs for one association run.

    ``threshold`` applies to distances after scaling to [0, 1]; pairs above
    it are rejected.  ``clamp_lambda`` keeps the fusion weight in [0, 1]
    (a raw-cosine mode is available for fidelity experiments).
    """

    mode: str = MODE_APPEARANCE
    use_epipolar: bool = False
    epipolar_weight: float = 1.0
    threshold: float = 0.5
    zoom_out_ratio: float = 2.0
    clamp_lambda: bool = True
    custom_scorer: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], float] | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if not np.isfinite(self.epipolar_weight) or self.epipolar_weight < 0:
            raise ValueError("epipolar_weight must be finite and >= 0")
        if self.zoom_out_ratio < 1.0:
            raise ValueError(f"zoom_out_ratio must be >= 1, got {self.zoom_out_ratio}")
        if self.mode == MODE_CUSTOM and self.custom_scorer is None:
            raise ValueError("custom mode requires a custom_scorer callable")


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise costs between the instances of two views.

    Row i, column j is the distance between instance i of view A and
    instance j of view B.  ``scale_info`` records the (min, max) used by the
    most recent normalization, if any.
    """

    values: np.ndarray
    scale_info: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"distance matrix must be 2-d, got shape {v.shape}")
        if v.size and not np.isfinite(v).all():
            raise ValueError("distance matrix has non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AssociationResult:
    """Accepted matches plus per-side leftovers for one view pair.

    Indices refer to each view's instance list; every index appears exactly
    once across ``matches`` and its side's unmatched list.
    """

    matches: tuple[tuple[int, int, float], ...]
    unmatched_a: tuple[int, ...]
    unmatched_b: tuple[int, ...]

    def __post_init__(self) -> None:
        a_seen = [m[0] for m in self.matches] + list(self.unmatched_a)
        b_seen = [m[1] for m in self.matches] + list(self.unmatched_b)
        if len(set(a_seen)) != len(a_seen) or len(set(b_seen)) != len(b_seen):
            raise ValueError("an index appears twice in an association result")

    def matched_index_pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j, _ in self.matches]


def asnet_fusion_distance(
    v_app_a, v_sur_a, v_app_b, v_sur_b, clamp_lambda: bool = True
) -> tuple[float, float]:
    """Fuse appearance and surrounding distances for one candidate pair.

    The weight is the cosine similarity of the two appearance vectors
    (clamped to [0, 1] unless disabled): similar appearances shift weight
    onto the surroundings.  Returns ``(distance, weight)``.
    """
    lam = cosine_similarity(v_app_a, v_app_b)
    if clamp_lambda:
        lam = min(1.0, max(0.0, lam))
    d = (1.0 - lam) * l2_distance(v_app_a, v_app_b) + lam * l2_distance(v_sur_a, v_sur_b)
    return d, lam


def _stacked(view: SceneView, embeddings: EmbeddingTable) -> tuple[np.ndarray, np.ndarray]:
    apps, surs = [], []
    for inst in view.instances:
        app, sur = embeddings.vectors(view.camera_id, inst.instance_id)
        apps.append(app.astype(np.float64))
        surs.append(sur.astype(np.float64))
    d = embeddings.dim
    if not apps:
        return np.empty((0, d)), np.empty((0, d))
    return np.stack(apps), np.stack(surs)


def build_distance_matrix(
    view_a: SceneView,
    view_b: SceneView,
    embeddings: EmbeddingTable | None,
    config: ScorerConfig,
) -> DistanceMatrix:
    """Raw (unscaled) pairwise distances between two views' instances.

    Modes: ``appearance_only`` is the L2 distance of appearance vectors;
    ``asnet_fusion`` applies the appearance/surrounding fusion rule;
    ``vbow`` is the chi-square distance of histogram embeddings;
    ``homography`` transfers bottom-edge midpoints through the ground plane
    and uses pixel L2 (no embeddings needed); ``custom`` delegates to the
    configured callable.
    """
    na, nb = len(view_a.instances), len(view_b.instances)

    if config.mode == MODE_HOMOGRAPHY:
        values = np.zeros((na, nb))
        if na and nb:
            h = geometry.plane_homography(view_a.camera, view_b.camera)
            transferred = [
                h.transfer(geometry.bottom_mid_anchor(inst)) for inst in view_a.instances
            ]
            anchors_b = [geometry.bottom_mid_anchor(inst) for inst in view_b.instances]
            for i, p in enumerate(transferred):
                for j, q in enumerate(anchors_b):
                    values[i, j] = float(np.linalg.norm(p - q))
        return DistanceMatrix(values)

    if embeddings is None:
        raise KeyError(f"mode {config.mode!r} requires an embedding table")

    app_a, sur_a = _stacked(view_a, embeddings)
    app_b, sur_b = _stacked(view_b, embeddings)

    if not na or not nb:
        return DistanceMatrix(np.zeros((na, nb)))

    if config.mode == MODE_APPEARANCE:
        values = cdist(app_a, app_b)
    elif config.mode == MODE_VBOW:
        values = np.array(
            [[chi_square_distance(a, b) for b in app_b] for a in app_a]
        )
    elif config.mode == MODE_ASNET:
        norms_a = np.linalg.norm(app_a, axis=1)
        norms_b = np.linalg.norm(app_b, axis=1)
        if norms_a.min() <= 1e-12 or norms_b.min() <= 1e-12:
            raise ValueError("asnet fusion requires nonzero appearance vectors")
        lam = (app_a @ app_b.T) / np.outer(norms_a, norms_b)
        lam = np.clip(lam, -1.0, 1.0)
        if config.clamp_lambda:
            lam = np.clip(lam, 0.0, 1.0)
        values = (1.0 - lam) * cdist(app_a, app_b) + lam * cdist(sur_a, sur_b)
    else:  # MODE_CUSTOM, scorer presence enforced by ScorerConfig
        scorer = config.custom_scorer
        values = np.array(
            [
                [scorer(app_a[i], sur_a[i], app_b[j], sur_b[j]) for j in range(nb)]
                for i in range(na)
            ],
            dtype=np.float64,
        )
    return DistanceMatrix(values)


def normalize_distances(
    matrix: DistanceMatrix,
    population: str = NORM_PER_PAIR,
    stats: tuple[float, float] | None = None,
) -> DistanceMatrix:
    """Scale distances into [0, 1].

    ``per_pair`` uses this matrix's extrema; ``global`` uses supplied
    evaluation-set extrema.  A (near-)constant matrix maps to 0.5 everywhere
    so downstream thresholding stays well-defined.
    """
    if population not in (NORM_PER_PAIR, NORM_GLOBAL):
        raise ValueError(f"unknown normalization population {population!r}")
    if matrix.values.size == 0:
        return DistanceMatrix(matrix.values, scale_info=None)
    if population == NORM_GLOBAL:
        if stats is None:
            raise ValueError("global normalization requires (min, max) stats")
        lo, hi = float(stats[0]), float(stats[1])
    else:
        lo, hi = float(matrix.values.min()), float(matrix.values.max())
    if hi - lo < 1e-12:
        values = np.full_like(matrix.values, _DEGENERATE_FILL)
    else:
        values = (matrix.values - lo) / (hi - lo)
        if population == NORM_GLOBAL:
            values = np.clip(values, 0.0, 1.0)
    return DistanceMatrix(values, scale_info=(lo, hi))


def add_epipolar_penalty(
    matrix: DistanceMatrix,
    view_a: SceneView,
    view_b: SceneView,
    weight: float = 1.0,
) -> DistanceMatrix:
    """Add the epipolar soft constraint to an already-scaled matrix.

    Each candidate pair pays ``weight`` times the pixel distance from view
    B's box center to the epipolar line of view A's box center, divided by
    view B's image diagonal.  Geometrically consistent pairs pay ~0; nothing
    is ever rejected outright here.
    """
    if matrix.values.size == 0 or weight == 0.0:
        return matrix
    fmat = geometry.fundamental_matrix(view_a.camera, view_b.camera)
    diag = view_b.camera.image_diagonal
    centers_b = [geometry.box_center(inst) for inst in view_b.instances]
    penalties = np.zeros_like(matrix.values)
    for i, inst in enumerate(view_a.instances):
        line = geometry.epipolar_line(fmat, geometry.box_center(inst))
        for j, center in enumerate(centers_b):
            penalties[i, j] = geometry.point_line_distance(line, center)
    return DistanceMatrix(
        matrix.values + weight * penalties / diag, scale_info=matrix.scale_info
    )


def kuhn_munkres_assign(matrix: DistanceMatrix) -> list[tuple[int, int]]:
    """Minimum-total-cost assignment covering min(rows, cols) pairs.

    Backed by scipy's Hungarian-style solver, which handles rectangular
    matrices directly (equivalent to padding with a constant larger than any
    real cost and discarding padded pairs).  Empty sides yield an empty
    assignment.
    """
    v = matrix.values
    if v.size == 0:
        return []
    if v.min() < 0:
        raise ValueError("assignment requires non-negative costs")
    rows, cols = linear_sum_assignment(v)
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


def threshold_filter(
    assignment: list[tuple[int, int]],
    matrix: DistanceMatrix,
    threshold: float,
) -> AssociationResult:
    """Reject assigned pairs whose distance exceeds ``threshold``.

    Rejected pairs contribute both members to their unmatched lists, along
    with every index the assignment never covered.
    """
    matches = []
    matched_a, matched_b = set(), set()
    for i, j in assignment:
        d = float(matrix.values[i, j])
        if d > threshold:
            continue
        matches.append((i, j, d))
        matched_a.add(i)
        matched_b.add(j)
    return AssociationResult(
        matches=tuple(matches),
        unmatched_a=tuple(i for i in range(matrix.rows) if i not in matched_a),
        unmatched_b=tuple(j for j in range(matrix.cols) if j not in matched_b),
    )


def associate_view_pair(
    view_a: SceneView,
    view_b: SceneView,
    embeddings: EmbeddingTable | None,
    config: ScorerConfig,
) -> AssociationResult:
    """Full pipeline for one view pair: score, scale, optionally add the
    epipolar penalty (then rescale), assign, threshold."""
    matrix = build_distance_matrix(view_a, view_b, embeddings, config)
    matrix = normalize_distances(matrix, NORM_PER_PAIR)
    if config.use_epipolar:
        matrix = add_epipolar_penalty(matrix, view_a, view_b, config.epipolar_weight)
        matrix = normalize_distances(matrix, NORM_PER_PAIR)
    assignment = kuhn_munkres_assign(matrix)
    return threshold_filter(assignment, matrix, config.threshold)


def associate_scene(
    scene: Scene,
    embeddings: EmbeddingTable | None,
    config: ScorerConfig,
) -> dict[tuple[int, int], AssociationResult]:
    """Associate every unordered view pair of a scene independently.

    Results are keyed by (camera_id_low, camera_id_high) and iterate in
    sorted key order regardless of view order in the scene.
    """
    views = sorted(scene.views, key=lambda v: v.camera_id)
    results: dict[tuple[int, int], AssociationResult] = {}
    for i in range(len(views)):
        for j in range(i + 1, len(views)):
            key = (views[i].camera_id, views[j].camera_id)
            results[key] = associate_view_pair(views[i], views[j], embeddings, config)
    return results


def association_to_dict(
    scene: Scene, results: Mapping[tuple[int, int], AssociationResult]
) -> dict:
    """Serialize per-pair results to the association output JSON structure."""
    pairs = []
    for (cam_a, cam_b) in sorted(results):
        res = results[(cam_a, cam_b)]
        pairs.append(
            {
                "cameras": [cam_a, cam_b],
                "matches": [[i, j, d] for i, j, d in res.matches],
                "unmatched_a": list(res.unmatched_a),
                "unmatched_b": list(res.unmatched_b),
            }
        )
    return {"scene_id": scene.scene_id, "pairs": pairs}


def association_from_dict(data: dict) -> tuple[str, dict[tuple[int, int], AssociationResult]]:
    """Parse the association output JSON structure."""
    scene_id = data["scene_id"]
    results: dict[tuple[int, int], AssociationResult] = {}
    for pair in data["pairs"]:
        cam_a, cam_b = (int(c) for c in pair["cameras"])
        results[(cam_a, cam_b)] = AssociationResult(
            matches=tuple((int(i), int(j), float(d)) for i, j, d in pair["matches"]),
            unmatched_a=tuple(int(i) for i in pair["unmatched_a"]),
            unmatched_b=tuple(int(j) for j in pair["unmatched_b"]),
        )
    return scene_id, results
