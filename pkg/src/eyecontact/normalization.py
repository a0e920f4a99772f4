"""Rotation and scaling into a fixed virtual camera looking at the face.

The normalization rotation ``R`` is stored row-wise: its rows are the
normalized camera's x, y and z axes expressed in the real camera frame.
The z row points from the camera at the face centre, and the y row is
perpendicular to the head's x-axis, which cancels head roll.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidIntrinsicsError, RollUndefinedError
from .geometry import CameraIntrinsics, GazeVector, HeadPose, rotation_to_angles


@dataclass(frozen=True)
class NormParams:
    d_n: float = 600.0
    fx_n: float = 960.0
    fy_n: float = 960.0
    cx_n: float = 112.0
    cy_n: float = 112.0

    def __post_init__(self):
        if not self.d_n > 0:
            raise DegenerateGeometryError("normalized distance must be positive")
        if not (self.fx_n > 0 and self.fy_n > 0):
            raise InvalidIntrinsicsError("normalized focal lengths must be positive")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx_n, 0.0, self.cx_n], [0.0, self.fy_n, self.cy_n], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class NormalizationTransform:
    R: np.ndarray
    s: float

    @property
    def M(self) -> np.ndarray:
        """Position transform ``diag(1, 1, s) @ R``."""
        return np.diag([1.0, 1.0, self.s]) @ self.R


def compute_normalization(pose: HeadPose, center, params: NormParams = NormParams()) -> NormalizationTransform:
    c = np.asarray(center, dtype=np.float64)
    dist = np.linalg.norm(c)
    if not dist > 1e-12:
        raise DegenerateGeometryError("face centre coincides with the camera")
    forward = c / dist
    down = np.cross(forward, pose.rotation[:, 0])
    n_down = np.linalg.norm(down)
    if n_down < 1e-9:
        raise RollUndefinedError("head x-axis is parallel to the viewing ray")
    down /= n_down
    right = np.cross(down, forward)
    right /= np.linalg.norm(right)
    R = np.vstack([right, down, forward])
    R.setflags(write=False)
    return NormalizationTransform(R, float(params.d_n / dist))


def normalize_gaze(t: NormalizationTransform, g: GazeVector) -> GazeVector:
    # directions are rotated only; the z scaling applies to positions
    return GazeVector.from_any(t.R @ g.direction)


def denormalize_gaze(t: NormalizationTransform, g_n: GazeVector) -> GazeVector:
    return GazeVector.from_any(t.R.T @ g_n.direction)


def normalize_head_pose(t: NormalizationTransform, pose: HeadPose) -> tuple[float, float]:
    """Head (pitch, yaw) in degrees, measured in normalized camera space."""
    pitch, yaw, _ = rotation_to_angles(t.R @ pose.rotation)
    return pitch, yaw


def warp_matrix(t: NormalizationTransform, intr: CameraIntrinsics, params: NormParams = NormParams()) -> np.ndarray:
    """Pixel homography ``C_n @ M @ inv(C_r)`` from the real to the normalized image.

    Computed for external consumers; nothing in this package resamples pixels.
    """
    C_r = intr.K
    if abs(np.linalg.det(C_r)) < 1e-12:
        raise InvalidIntrinsicsError("camera matrix is singular")
    return params.K @ t.M @ np.linalg.inv(C_r)
