"""Calibrated two-view geometry.

Projection, fundamental matrix, epipolar line distances, ground-plane
homography transfer, and camera angle difference.  Everything here is a pure
function of camera parameters; no estimation from correspondences.

Two pixel anchors are deliberately kept separate so scorers cannot mix
them up: the epipolar soft constraint works on box centers
(:func:`box_center`) while the plane-homography baseline works on
bottom-edge midpoints (:func:`bottom_mid_anchor`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import CameraModel, InstanceBox

_RANK_TOL = 1e-9
_BASELINE_TOL = 1e-9
_DEPTH_TOL = 1e-9
_COND_LIMIT = 1e12


class GeometryError(ValueError):
    """Base class for degenerate geometric configurations."""


class BehindCameraError(GeometryError):
    """A world point has non-positive depth in the camera frame."""


class ZeroBaselineError(GeometryError):
    """Camera centers coincide; epipolar geometry is undefined."""


class EpipoleDegeneracyError(GeometryError):
    """The queried pixel is the epipole; its epipolar line is undefined."""


class DegeneratePlaneError(GeometryError):
    """A camera's plane-induced map is numerically singular."""


@dataclass(frozen=True)
class FundamentalMatrix:
    """Rank-2, Frobenius-normalized matrix mapping view-1 pixels to view-2
    epipolar lines: x2^T F x1 = 0 for true correspondences."""

    F: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.F, dtype=np.float64)
        if f.shape != (3, 3):
            raise GeometryError(f"F must be 3x3, got {f.shape}")
        s = np.linalg.svd(f, compute_uv=False)
        if s[2] > _RANK_TOL * s[0]:
            raise GeometryError(
                f"F must have rank 2 (singular values {s[0]:.3g}, {s[1]:.3g}, {s[2]:.3g})"
            )
        if abs(np.linalg.norm(f) - 1.0) > 1e-9:
            raise GeometryError("F must be Frobenius-normalized")
        f.flags.writeable = False
        object.__setattr__(self, "F", f)

    @property
    def transposed(self) -> "FundamentalMatrix":
        """F for the swapped view order (view-2 pixels to view-1 lines)."""
        return FundamentalMatrix(self.F.T.copy())


@dataclass(frozen=True)
class PlaneHomography:
    """Invertible pixel map between two views induced by the world plane z = 0,
    scaled so H[2, 2] = 1 when that entry is nonzero."""

    H: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.H, dtype=np.float64)
        if h.shape != (3, 3):
            raise GeometryError(f"H must be 3x3, got {h.shape}")
        if np.linalg.cond(h) > _COND_LIMIT:
            raise DegeneratePlaneError("homography is numerically singular")
        h.flags.writeable = False
        object.__setattr__(self, "H", h)

    def transfer(self, pixel) -> np.ndarray:
        """Map a view-1 pixel to view 2 through the z = 0 plane."""
        u, v = float(pixel[0]), float(pixel[1])
        x = self.H @ np.array([u, v, 1.0])
        if abs(x[2]) < 1e-15:
            raise DegeneratePlaneError(f"pixel ({u}, {v}) maps to the line at infinity")
        return x[:2] / x[2]

    def inverse(self) -> "PlaneHomography":
        return PlaneHomography(_scale_h(np.linalg.inv(self.H)))


@dataclass(frozen=True)
class EpipolarLine:
    """Homogeneous image line a*u + b*v + c = 0 with (a, b) unit-norm, so
    the point-line residual is directly in pixels."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        n = float(np.hypot(self.a, self.b))
        if abs(n - 1.0) > 1e-9:
            raise GeometryError("line must be normalized to unit (a, b)")


def project_point(camera: CameraModel, point) -> np.ndarray:
    """Project a world point (meters) to pixel coordinates.

    Raises BehindCameraError when the camera-frame depth is <= 1e-9 m.
    """
    x_cam = camera.rotation @ np.asarray(point, dtype=np.float64).reshape(3) + camera.translation
    if x_cam[2] <= _DEPTH_TOL:
        raise BehindCameraError(
            f"point has depth {x_cam[2]:.3g} m in camera {camera.camera_id}"
        )
    x_img = camera.intrinsics @ x_cam
    return x_img[:2] / x_img[2]


def _skew(t: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -t[2], t[1]],
            [t[2], 0.0, -t[0]],
            [-t[1], t[0], 0.0],
        ]
    )


def fundamental_matrix(cam1: CameraModel, cam2: CameraModel) -> FundamentalMatrix:
    """F relating pixels of ``cam1`` to epipolar lines in ``cam2``.

    Built from calibrated parameters as K2^-T [t_rel]x R_rel K1^-1 with
    R_rel = R2 R1^T and t_rel = t2 - R_rel t1, then Frobenius-normalized.
    Raises ZeroBaselineError when the camera centers coincide.
    """
    r_rel = cam2.rotation @ cam1.rotation.T
    t_rel = cam2.translation - r_rel @ cam1.translation
    if np.linalg.norm(t_rel) <= _BASELINE_TOL:
        raise ZeroBaselineError(
            f"cameras {cam1.camera_id} and {cam2.camera_id} share a center"
        )
    k1_inv = np.linalg.inv(cam1.intrinsics)
    k2_inv_t = np.linalg.inv(cam2.intrinsics).T
    f = k2_inv_t @ _skew(t_rel) @ r_rel @ k1_inv
    return FundamentalMatrix(f / np.linalg.norm(f))


def epipolar_line(fmat: FundamentalMatrix, pixel) -> EpipolarLine:
    """Epipolar line in view 2 for a view-1 pixel.

    Raises EpipoleDegeneracyError when the pixel is (numerically) the epipole.
    """
    u, v = float(pixel[0]), float(pixel[1])
    line = fmat.F @ np.array([u, v, 1.0])
    n = np.hypot(line[0], line[1])
    if n < 1e-12 * max(1.0, abs(line[2])) or n == 0.0:
        raise EpipoleDegeneracyError(f"pixel ({u}, {v}) is the epipole")
    return EpipolarLine(a=line[0] / n, b=line[1] / n, c=line[2] / n)


def point_line_distance(line: EpipolarLine, pixel) -> float:
    """Perpendicular pixel distance from a point to a normalized line."""
    u, v = float(pixel[0]), float(pixel[1])
    return abs(line.a * u + line.b * v + line.c)


def _scale_h(h: np.ndarray) -> np.ndarray:
    if abs(h[2, 2]) > 1e-15:
        return h / h[2, 2]
    return h


def plane_homography(cam1: CameraModel, cam2: CameraModel) -> PlaneHomography:
    """Pixel-to-pixel map from ``cam1`` to ``cam2`` through the plane z = 0.

    Each camera induces H_i = K_i [r_i1, r_i2, t_i] from the plane; the
    transfer is H2 H1^-1.  Raises DegeneratePlaneError when either induced
    map is numerically singular (optical plane contains the world plane).
    """
    maps = []
    for cam in (cam1, cam2):
        h = cam.intrinsics @ np.column_stack(
            (cam.rotation[:, 0], cam.rotation[:, 1], cam.translation)
        )
        if np.linalg.cond(h) > _COND_LIMIT:
            raise DegeneratePlaneError(
                f"camera {cam.camera_id}: plane-induced map is singular"
            )
        maps.append(h)
    h12 = maps[1] @ np.linalg.inv(maps[0])
    return PlaneHomography(_scale_h(h12))


def box_center(box: InstanceBox) -> np.ndarray:
    """Box center, the anchor used by the epipolar soft constraint."""
    cx, cy = box.center
    return np.array([cx, cy])


def bottom_mid_anchor(box: InstanceBox) -> np.ndarray:
    """Midpoint of the bottom edge, the anchor used by the homography
    baseline.  y grows downward, so the bottom edge is y2."""
    x1, _, x2, y2 = box.box
    return np.array([(x1 + x2) / 2.0, y2])


def camera_angle_difference(cam1: CameraModel, cam2: CameraModel) -> float:
    """Angle in degrees, in [0, 180], between the two cameras' lines of
    sight (world-frame optical axes R^T e_z)."""
    d1 = cam1.rotation.T @ np.array([0.0, 0.0, 1.0])
    d2 = cam2.rotation.T @ np.array([0.0, 0.0, 1.0])
    cos = float(np.clip(np.dot(d1, d2), -1.0, 1.0))
    return float(np.degrees(np.arccos(cos)))
