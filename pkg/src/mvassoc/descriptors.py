"""Hand-crafted descriptors and the vector distances used by all scorers.

Learned feature extractors are out of scope; embeddings arrive through the
sidecar contract or the built-in color histograms here.  The bag-of-words
path (dense descriptors, k-means codebook, histogram encoding) gives a fully
deterministic classical baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_APPEARANCE = "appearance"
KIND_SURROUNDING = "surrounding"
KIND_VBOW = "vbow"
_KINDS = (KIND_APPEARANCE, KIND_SURROUNDING, KIND_VBOW)

CHI_SQUARE_EPS = 1e-10


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    kind: str = KIND_APPEARANCE

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise ValueError("feature vector must be non-empty")
        if not np.isfinite(v).all():
            raise ValueError("feature vector has non-finite components")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Codebook:
    """k centroids of identical length, produced by k-means clustering."""

    centroids: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("centroids must be a (k, d) array")
        if not np.isfinite(c).all():
            raise ValueError("centroids must be finite")
        diff = c[:, None, :] - c[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= 1e-12:
            raise ValueError("codebook contains duplicate centroids")
        c.flags.writeable = False
        object.__setattr__(self, "centroids", c)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class CropRect:
    """Pixel rectangle clamped to image bounds."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate crop ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def crop_with_zoom_out(box, ratio: float, image_size: tuple[int, int]) -> CropRect:
    """Scale a box about its center by ``ratio`` and clamp to the image.

    ``ratio`` 1 returns the original box (clamped).  This exact rule is the
    contract shared with any external embedding exporter; the parity fixture
    in the test suite locks it down.
    """
    if ratio < 1.0:
        raise ValueError(f"zoom-out ratio must be >= 1, got {ratio}")
    x1, y1, x2, y2 = box.box if hasattr(box, "box") else (float(v) for v in box)
    w, h = image_size
    cx, cy = (x1 + x2) / 2.0, (y1 + y2) / 2.0
    half_w = (x2 - x1) * ratio / 2.0
    half_h = (y2 - y1) * ratio / 2.0
    return CropRect(
        x1=max(0.0, cx - half_w),
        y1=max(0.0, cy - half_h),
        x2=min(float(w), cx + half_w),
        y2=min(float(h), cy + half_h),
    )


def color_histogram_descriptor(pixels: np.ndarray, bins_per_channel: int = 8) -> FeatureVector:
    """Per-channel color histogram of a patch, L1-normalized to sum 1.

    The three channel histograms (``bins_per_channel`` equal-width bins over
    [0, 255] each) are concatenated and the full vector is normalized, so a
    single-color patch concentrates mass 1/3 in one bin of each channel.

    Raises ValueError for an empty patch, a non 3-channel patch, or
    ``bins_per_channel`` outside [2, 16].
    """
    if not 2 <= bins_per_channel <= 16:
        raise ValueError(f"bins_per_channel must be in [2, 16], got {bins_per_channel}")
    p = np.asarray(pixels, dtype=np.float64)
    if p.ndim != 3 or p.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) pixels, got shape {p.shape}")
    if p.shape[0] == 0 or p.shape[1] == 0:
        raise ValueError("empty patch")
    if p.min() < 0 or p.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    edges = np.linspace(0.0, 255.0, bins_per_channel + 1)
    parts = [np.histogram(p[:, :, ch].reshape(-1), bins=edges)[0] for ch in range(3)]
    hist = np.concatenate(parts).astype(np.float64)
    return FeatureVector(values=hist / hist.sum(), kind=KIND_APPEARANCE)


def dense_patch_descriptors(
    pixels: np.ndarray, grid: int = 16, bins_per_channel: int = 8
) -> list[np.ndarray]:
    """Color histograms over a ``grid`` x ``grid`` tiling of the patch.

    The dense stand-in for keypoint descriptors; cells smaller than one pixel
    are skipped, so tiny patches yield fewer (possibly zero) descriptors.
    """
    p = np.asarray(pixels)
    h, w = p.shape[0], p.shape[1]
    out: list[np.ndarray] = []
    for gy in range(grid):
        y0, y1 = (h * gy) // grid, (h * (gy + 1)) // grid
        if y1 <= y0:
            continue
        for gx in range(grid):
            x0, x1 = (w * gx) // grid, (w * (gx + 1)) // grid
            if x1 <= x0:
                continue
            out.append(
                color_histogram_descriptor(p[y0:y1, x0:x1], bins_per_channel).values
            )
    return out


def kmeans_codebook(
    descriptors, k: int, seed: int = 0, max_iters: int = 100
) -> Codebook:
    """Lloyd's k-means from a seeded k-means++ initialization.

    Deterministic for a given seed; stops when assignments no longer change
    or after ``max_iters`` rounds.  Raises ValueError when k exceeds the
    number of distinct descriptors.
    """
    x = np.asarray(list(descriptors), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("descriptors must be a non-empty list of equal-length vectors")
    n_distinct = np.unique(x, axis=0).shape[0]
    if k < 1 or k > n_distinct:
        raise ValueError(f"k={k} exceeds the {n_distinct} distinct descriptors")

    rng = np.random.default_rng(seed)
    n = x.shape[0]

    # k-means++ seeding
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        probs = d2 / total
        centers[i] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))

    assign = np.full(n, -1)
    for _ in range(max_iters):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                # re-seed an empty cluster on the point farthest from its center
                worst = dist.min(axis=1).argmax()
                centers[c] = x[worst]
    return Codebook(centroids=centers)


def vbow_encode(descriptors, codebook: Codebook) -> FeatureVector:
    """Hard-assignment histogram over codebook centroids, L1-normalized.

    An empty descriptor list encodes to the uniform vector 1/k so that
    keypoint-less patches still get finite distances.
    """
    k = codebook.k
    descriptors = list(descriptors)
    if not descriptors:
        return FeatureVector(values=np.full(k, 1.0 / k), kind=KIND_VBOW)
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != codebook.centroids.shape[1]:
        raise ValueError(
            f"descriptor length {x.shape[-1]} does not match centroid length "
            f"{codebook.centroids.shape[1]}"
        )
    dist = ((x[:, None, :] - codebook.centroids[None, :, :]) ** 2).sum(axis=2)
    counts = np.bincount(dist.argmin(axis=1), minlength=k).astype(np.float64)
    return FeatureVector(values=counts / counts.sum(), kind=KIND_VBOW)


def _values(v) -> np.ndarray:
    if isinstance(v, FeatureVector):
        return v.values
    return np.asarray(v, dtype=np.float64).reshape(-1)


def _paired(a, b) -> tuple[np.ndarray, np.ndarray]:
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"length mismatch: {va.size} vs {vb.size}")
    return va, vb


def chi_square_distance(a, b) -> float:
    """Symmetric chi-square distance between non-negative histograms:
    0.5 * sum (a_i - b_i)^2 / (a_i + b_i + eps)."""
    va, vb = _paired(a, b)
    if va.min() < 0 or vb.min() < 0:
        raise ValueError("chi-square requires non-negative components")
    return float(0.5 * ((va - vb) ** 2 / (va + vb + CHI_SQUARE_EPS)).sum())


def l2_distance(a, b) -> float:
    """Euclidean distance between two equal-length vectors."""
    va, vb = _paired(a, b)
    return float(np.linalg.norm(va - vb))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Raises ValueError when either norm is <= 1e-12.
    """
    va, vb = _paired(a, b)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na <= 1e-12 or nb <= 1e-12:
        raise ValueError("cosine similarity is undefined for near-zero vectors")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))
