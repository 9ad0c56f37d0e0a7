"""Multi-camera instance association toolkit.

Associates object instances across overlapping camera views: pluggable
pairwise distance scorers (appearance, appearance+surrounding fusion,
bag-of-words, ground-plane homography), an epipolar soft constraint,
globally optimal bipartite assignment with threshold rejection, evaluation
metrics (AP, FPR-95, IPAA-X, angle-binned breakdowns), and a deterministic
synthetic tabletop simulator for end-to-end verification.
"""

__version__ = "0.1.0"

from .association import (
    AssociationResult,
    DistanceMatrix,
    ScorerConfig,
    add_epipolar_penalty,
    asnet_fusion_distance,
    associate_scene,
    associate_view_pair,
    build_distance_matrix,
    kuhn_munkres_assign,
    normalize_distances,
    threshold_filter,
)
from .descriptors import (
    Codebook,
    CropRect,
    FeatureVector,
    chi_square_distance,
    color_histogram_descriptor,
    cosine_similarity,
    crop_with_zoom_out,
    kmeans_codebook,
    l2_distance,
    vbow_encode,
)
from .formats import load_embeddings, load_scene, save_embeddings, save_scene
from .geometry import (
    EpipolarLine,
    FundamentalMatrix,
    PlaneHomography,
    bottom_mid_anchor,
    box_center,
    camera_angle_difference,
    epipolar_line,
    fundamental_matrix,
    plane_homography,
    point_line_distance,
    project_point,
)
from .metrics import (
    MetricsReport,
    PairAdjacency,
    ScoredPair,
    angle_binned_report,
    average_precision,
    confidence_from_distance,
    fpr_at_recall,
    ipaa,
    pair_fraction_correct,
)
from .scene import (
    CameraModel,
    EmbeddingTable,
    InstanceBox,
    Scene,
    SceneView,
    assign_detections_to_gt,
    iou,
)
from .synthetic import (
    GroundTruth,
    SimConfig,
    SyntheticObject,
    export_scene,
    generate_scene,
    oracle_embeddings,
)
