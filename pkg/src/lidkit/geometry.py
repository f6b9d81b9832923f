"""Eyelid angle from least-squares lid planes, plus the 2D EAR baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DegenerateGeometryError, NoSampleError
from .landmarks import EyelidIndexConfig, LandmarkFrame, RawLandmarkFrame, normalize_frame, select_eyelids

# second singular value below this fraction of the first means rank < 2
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class FittedPlane:
    normal: np.ndarray
    centroid: np.ndarray
    residual_rms: float


@dataclass(frozen=True)
class ElaSample:
    timestamp: float
    ela_left: float | None
    ela_right: float | None
    ela_combined: float
    yaw: float


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != 3:
        raise ValueError(f"points must have shape (3, n), got {pts.shape}")
    if pts.shape[1] < 3:
        raise DegenerateGeometryError(f"need at least 3 points to fit a plane, got {pts.shape[1]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


def fit_plane(points) -> FittedPlane:
    """Least-squares plane through a (3, n) point set.

    The normal is the left-singular vector of the centered matrix belonging
    to the smallest singular value. Its sign is whatever the SVD returns; use
    :func:`orient_normal` to fix it.

    Raises:
        DegenerateGeometryError: if the points are coincident or collinear.
    """
    pts = _as_points(points)
    centroid = pts.mean(axis=1)
    centered = pts - centroid[:, None]
    u, s, _ = np.linalg.svd(centered, full_matrices=True)
    if s[0] == 0 or s[1] <= _RANK_TOL * s[0]:
        raise DegenerateGeometryError("points are coincident or collinear; plane is undefined")
    smallest = s[2] if len(s) > 2 else 0.0
    normal = u[:, 2] / np.linalg.norm(u[:, 2])
    return FittedPlane(normal=normal, centroid=centroid, residual_rms=float(smallest / math.sqrt(pts.shape[1])))


def orientation_score(normal: np.ndarray, centered_points: np.ndarray) -> float:
    """Sum over consecutive columns of ``normal . (A[:, i+1] x A[:, i])``."""
    a = np.asarray(centered_points, dtype=float)
    cross = np.cross(a[:, 1:].T, a[:, :-1].T)
    return float(np.sum(cross @ normal))


def orient_normal(plane: FittedPlane, centered_points) -> FittedPlane:
    """Flip the plane normal so that the lid's inner-to-outer winding scores non-negative."""
    if orientation_score(plane.normal, centered_points) < 0:
        return FittedPlane(-plane.normal, plane.centroid, plane.residual_rms)
    return plane


def oriented_normal(points) -> np.ndarray:
    pts = _as_points(points)
    plane = fit_plane(pts)
    return orient_normal(plane, pts - plane.centroid[:, None]).normal


def eyelid_angle(upper, lower) -> float:
    """Angle in degrees between the oriented upper and lower lid planes."""
    n_u = oriented_normal(upper)
    n_l = oriented_normal(lower)
    # unit-normal dot products can leave [-1, 1] by an ulp
    return math.degrees(math.acos(min(1.0, max(-1.0, float(n_l @ n_u)))))


def visibility_weights(yaw_beta: float) -> tuple[float, float]:
    """(left, right) weights; positive yaw favours the right eye."""
    w_right = float(expit(4.0 * yaw_beta))
    return 1.0 - w_right, w_right


def combine_ela(left: float | None, right: float | None, yaw_beta: float) -> float:
    """Visibility-weighted mix of both eyes' angles.

    A missing eye (``None``) gives the other eye full weight.
    """
    if left is None and right is None:
        raise NoSampleError("no eye angle available")
    if left is None:
        return float(right)
    if right is None:
        return float(left)
    w_left, w_right = visibility_weights(yaw_beta)
    return w_left * left + w_right * right


def ear(eye_points_2d) -> float:
    """Eye aspect ratio of six 2D points ordered p1..p6.

    p1 and p4 are the corners, p2/p3 sit on the upper lid and p6/p5 below
    them on the lower lid.
    """
    p = np.asarray(eye_points_2d, dtype=float)
    if p.shape != (6, 2):
        raise ValueError(f"expected (6, 2) points, got {p.shape}")
    horizontal = np.linalg.norm(p[0] - p[3])
    if horizontal == 0:
        raise ValueError("eye has zero horizontal extent")
    return float((np.linalg.norm(p[1] - p[5]) + np.linalg.norm(p[2] - p[4])) / (2.0 * horizontal))


def ear_points(frame: LandmarkFrame, cfg: EyelidIndexConfig, eye: str) -> np.ndarray:
    """The six EAR points of one eye, taken from the lid landmarks and corners.

    p2/p3 are the upper-lid points at positions 2 and 4 (inner to outer),
    p6/p5 the lower-lid points at the same positions.
    """
    corners = cfg.left_corners if eye == "left" else cfg.right_corners
    if corners is None:
        raise ValueError(f"eyelid config has no corner indices for the {eye} eye")
    upper = cfg.left_upper if eye == "left" else cfg.right_upper
    lower = cfg.left_lower if eye == "left" else cfg.right_lower
    idx = [corners[0], upper[2], upper[4], corners[1], lower[4], lower[2]]
    return frame.landmarks[idx, :2]


def frame_ear(frame: LandmarkFrame, cfg: EyelidIndexConfig) -> float:
    """Mean EAR of both eyes on the 2D (x, y) coordinates."""
    return 0.5 * (ear(ear_points(frame, cfg, "left")) + ear(ear_points(frame, cfg, "right")))


def _eye_angle(upper, lower) -> float | None:
    try:
        return eyelid_angle(upper, lower)
    except DegenerateGeometryError:
        return None


def frame_ela(frame: LandmarkFrame, cfg: EyelidIndexConfig) -> ElaSample:
    lids = select_eyelids(frame, cfg)
    left = _eye_angle(lids.left_upper, lids.left_lower)
    right = _eye_angle(lids.right_upper, lids.right_lower)
    return ElaSample(frame.timestamp, left, right, combine_ela(left, right, frame.yaw), frame.yaw)


def ela_samples(
    frames: Sequence[RawLandmarkFrame], cfg: EyelidIndexConfig, z_scale: float = 1.7
) -> list[ElaSample | None]:
    """Per-frame ELA for a raw stream; ``None`` where no face or no eye is usable."""
    out: list[ElaSample | None] = []
    for raw in frames:
        if not raw.detected:
            out.append(None)
            continue
        try:
            out.append(frame_ela(normalize_frame(raw, z_scale), cfg))
        except NoSampleError:
            out.append(None)
    return out
