"""Pinhole camera, generic face model, PnP head pose and gaze-plane geometry.

Conventions used throughout the package:

* camera frame: x to the image right, y to the image bottom, z forward
  (into the scene). 3D quantities are in millimetres, image points in pixels.
* angles are degrees at every public boundary.
* a head rotation maps face-model coordinates to camera coordinates. The
  face looks along its -z axis, so the identity rotation is a face looking
  straight back into the camera.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    ConvergenceError,
    DegenerateGeometryError,
    InsufficientCorrespondencesError,
    InvalidIntrinsicsError,
    NoIntersectionError,
    ProjectionDegenerateError,
)

N_LANDMARKS = 6
LANDMARK_NAMES = (
    "right_eye_outer",
    "right_eye_inner",
    "left_eye_inner",
    "left_eye_outer",
    "mouth_right",
    "mouth_left",
)
EYE_RIGHT = (0, 1)
EYE_LEFT = (2, 3)
MOUTH = (4, 5)

PNP_MAX_ITER = 100
PNP_STEP_TOL = 1e-10
ORTHO_TOL = 1e-9
GAZE_UNIT_TOL = 1e-6


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidIntrinsicsError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise InvalidIntrinsicsError("principal point must be finite")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class FaceModel3D:
    """Six 3D landmark positions (mm), centroid at the origin.

    Use :meth:`centered` to build a model from arbitrary coordinates.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.shape != (N_LANDMARKS, 3):
            raise DegenerateGeometryError(f"face model needs shape (6, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DegenerateGeometryError("face model has non-finite coordinates")
        scale = max(1.0, float(np.abs(pts).max()))
        if np.abs(pts.mean(axis=0)).max() > 1e-9 * scale:
            raise DegenerateGeometryError("face model is not centred on its centroid")
        if np.linalg.matrix_rank(pts, tol=1e-6 * scale) < 2:
            raise DegenerateGeometryError("face model points are collinear")
        object.__setattr__(self, "points", pts)

    @classmethod
    def centered(cls, points) -> "FaceModel3D":
        pts = np.asarray(points, dtype=np.float64)
        return cls(pts - pts.mean(axis=0))


# Artifact-chosen generic model (not measured data): eye corners at +-45/+-15 mm,
# mouth corners at +-25 mm. Outer eye corners sit 22 mm behind the inner ones
# and mouth corners 12 mm behind; the depth relief is what makes rotation
# observable from six points.
GENERIC_FACE_MODEL = FaceModel3D.centered(
    [
        [-45.0, -32.0, 22.0],
        [-15.0, -30.0, 0.0],
        [15.0, -30.0, 0.0],
        [45.0, -32.0, 22.0],
        [-25.0, 40.0, 12.0],
        [25.0, 40.0, 12.0],
    ]
)

# 1280x720 phone front camera, ~67 deg horizontal field of view.
PHONE_CAMERA = CameraIntrinsics(960.0, 960.0, 640.0, 360.0)


@dataclass(frozen=True, eq=False)
class HeadPose:
    rotation: np.ndarray
    translation: np.ndarray
    reprojection_error: float = 0.0

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation)
        if R.shape != (3, 3) or t.shape != (3,):
            raise DegenerateGeometryError("pose needs a 3x3 rotation and a 3-vector translation")
        if np.abs(R.T @ R - np.eye(3)).max() > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise DegenerateGeometryError("rotation is not a proper orthonormal matrix")
        if not t[2] > 0:
            raise DegenerateGeometryError(f"face must be in front of the camera (z={t[2]})")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True, eq=False)
class Landmarks2D:
    """Six optional pixel positions; invisible entries hold NaN."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.shape != (N_LANDMARKS, 2):
            raise DegenerateGeometryError(f"landmarks need shape (6, 2), got {pts.shape}")
        nan = np.isnan(pts)
        if np.any(nan[:, 0] != nan[:, 1]) or np.any(np.isinf(pts)):
            raise DegenerateGeometryError("each landmark must be fully present and finite, or absent")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_list(cls, entries) -> "Landmarks2D":
        pts = np.full((N_LANDMARKS, 2), np.nan)
        for i, e in enumerate(entries):
            if e is not None:
                pts[i] = e
        return cls(pts)

    def to_list(self) -> list:
        return [None if np.isnan(p[0]) else (float(p[0]), float(p[1])) for p in self.points]

    @property
    def visible(self) -> np.ndarray:
        return ~np.isnan(self.points[:, 0])

    @property
    def n_visible(self) -> int:
        return int(self.visible.sum())

    def drop(self, indices) -> "Landmarks2D":
        pts = self.points.copy()
        pts[list(indices)] = np.nan
        return Landmarks2D(pts)


@dataclass(frozen=True, eq=False)
class GazeVector:
    """Unit gaze direction in camera coordinates.

    The norm tolerance is loose enough that a direction written with nine
    significant digits loads back unchanged.
    """

    direction: np.ndarray

    def __post_init__(self):
        d = _frozen(self.direction)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > GAZE_UNIT_TOL:
            raise DegenerateGeometryError("gaze direction must be a unit 3-vector")
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_any(cls, v) -> "GazeVector":
        v = np.asarray(v, dtype=np.float64)
        n = np.linalg.norm(v)
        if not n > 0:
            raise DegenerateGeometryError("zero-length gaze vector")
        return cls(v / n)


@dataclass(frozen=True)
class GazePoint2D:
    x: float
    y: float

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y], dtype=dtype)


# ---------------------------------------------------------------------------
# projection and angles
# ---------------------------------------------------------------------------


def transform_points(points: np.ndarray, pose: HeadPose) -> np.ndarray:
    return points @ pose.rotation.T + pose.translation


def project_points(model: FaceModel3D, pose: HeadPose, intr: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of the six model points; returns a (6, 2) pixel array."""
    P = transform_points(model.points, pose)
    if np.any(P[:, 2] <= 0):
        raise ProjectionDegenerateError("a model point lies on or behind the camera plane")
    u = intr.fx * P[:, 0] / P[:, 2] + intr.cx
    v = intr.fy * P[:, 1] / P[:, 2] + intr.cy
    return np.column_stack([u, v])


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def angles_to_rotation(pitch: float, yaw: float, roll: float = 0.0) -> np.ndarray:
    """Rotation whose forward axis points at (pitch, yaw) degrees, rolled by ``roll``.

    Pitch is positive looking up, yaw positive looking towards the camera's
    left (-x). The composition is ``Ry(yaw) @ Rx(-pitch) @ Rz(roll)``.
    """
    p, y, r = np.radians([pitch, yaw, roll])
    return _ry(y) @ _rx(-p) @ _rz(r)


def rotation_to_angles(rotation) -> tuple[float, float, float]:
    """Decompose a rotation into (pitch, yaw, roll) degrees.

    The forward direction is ``d = -R[:, 2]``; pitch = asin(-d_y) and
    yaw = atan2(-d_x, -d_z). At the gimbal singularity (|d_y| = 1) pitch is
    +-90 and yaw is reported as 0.
    """
    R = np.asarray(rotation, dtype=np.float64)
    d = -R[:, 2]
    if abs(d[1]) >= 1.0 - 1e-15:
        pitch = -np.pi / 2 * np.sign(d[1])
        yaw = 0.0
    else:
        pitch = np.arcsin(np.clip(-d[1], -1.0, 1.0))
        yaw = np.arctan2(-d[0], -d[2])
    M = (_ry(yaw) @ _rx(-pitch)).T @ R
    roll = np.arctan2(M[1, 0], M[0, 0])
    return float(np.degrees(pitch)), float(np.degrees(yaw)), float(np.degrees(roll))


def face_center(model: FaceModel3D, pose: HeadPose) -> np.ndarray:
    """Centroid of the posed model in camera coordinates (equals the translation)."""
    return transform_points(model.points, pose).mean(axis=0)


def ray_plane_parameter(origin, gaze: GazeVector) -> float:
    """Ray length t at which ``origin + t * gaze`` reaches the z = 0 plane."""
    o = np.asarray(origin, dtype=np.float64)
    gz = gaze.direction[2]
    if not gz < 0:
        raise NoIntersectionError("gaze points away from the camera plane")
    if not o[2] > 0:
        raise DegenerateGeometryError("gaze origin must lie in front of the camera")
    return float(o[2] / -gz)


def intersect_gaze_with_camera_plane(origin, gaze: GazeVector) -> GazePoint2D:
    t = ray_plane_parameter(origin, gaze)
    p = np.asarray(origin, dtype=np.float64) + t * gaze.direction
    return GazePoint2D(float(p[0]), float(p[1]))


# ---------------------------------------------------------------------------
# PnP
# ---------------------------------------------------------------------------


def _project_to_so3(M):
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


def _dlt_pose(obj, xn):
    """Direct linear estimate from >= 6 points in normalized image coordinates."""
    n = len(obj)
    Xh = np.column_stack([obj, np.ones(n)])
    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = Xh
    A[0::2, 8:12] = -xn[:, :1] * Xh
    A[1::2, 4:8] = Xh
    A[1::2, 8:12] = -xn[:, 1:] * Xh
    P = np.linalg.svd(A)[2][-1].reshape(3, 4)
    if np.linalg.det(P[:, :3]) < 0:
        P = -P
    U, S, Vt = np.linalg.svd(P[:, :3])
    R = U @ Vt
    t = P[:, 3] / S.mean()
    return R, t


def _planar_pose(obj, xn):
    """Homography estimate on the best-fit plane of >= 4 model points."""
    c = obj.mean(axis=0)
    _, _, Vt = np.linalg.svd(obj - c)
    e1, e2 = Vt[0], Vt[1]
    B = np.column_stack([e1, e2, np.cross(e1, e2)])
    ab = (obj - c) @ B[:, :2]
    n = len(obj)
    src = np.column_stack([ab, np.ones(n)])
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = src
    A[0::2, 6:9] = -xn[:, :1] * src
    A[1::2, 3:6] = src
    A[1::2, 6:9] = -xn[:, 1:] * src
    H = np.linalg.svd(A)[2][-1].reshape(3, 3)
    lam = 2.0 / (np.linalg.norm(H[:, 0]) + np.linalg.norm(H[:, 1]))
    if H[2, 2] * lam < 0:
        lam = -lam
    r1, r2 = lam * H[:, 0], lam * H[:, 1]
    Rp = _project_to_so3(np.column_stack([r1, r2, np.cross(r1, r2)]))
    R = Rp @ B.T
    t = lam * H[:, 2] - R @ c
    return R, t


def _initial_candidates(obj, img, intr):
    xn = np.column_stack([(img[:, 0] - intr.cx) / intr.fx, (img[:, 1] - intr.cy) / intr.fy])
    cands = []
    try:
        R, t = _dlt_pose(obj, xn) if len(obj) >= 6 else _planar_pose(obj, xn)
        if np.all(np.isfinite(R)) and np.all(np.isfinite(t)) and t[2] > 0:
            cands.append((R, t))
    except np.linalg.LinAlgError:
        pass
    # frontal start: depth from the ratio of model spread to image spread
    spread_obj = np.sqrt(((obj[:, :2] - obj[:, :2].mean(axis=0)) ** 2).sum(axis=1).mean())
    spread_img = np.sqrt(((xn - xn.mean(axis=0)) ** 2).sum(axis=1).mean())
    z0 = spread_obj / max(spread_img, 1e-12)
    xm = xn.mean(axis=0)
    t0 = np.array([xm[0] * z0, xm[1] * z0, z0]) - obj.mean(axis=0)
    for yaw in (0.0, 35.0, -35.0):
        cands.append((angles_to_rotation(0.0, yaw, 0.0), t0.copy()))
    return cands


def solve_pnp(landmarks: Landmarks2D, model: FaceModel3D, intr: CameraIntrinsics) -> HeadPose:
    """Estimate the head pose minimizing pixel reprojection error.

    A direct estimate (DLT with six points, planar homography with four or
    five) and a few frontal-ish starts are each refined with
    Levenberg-Marquardt; the lowest-cost converged result wins.

    Raises
    ------
    InsufficientCorrespondencesError
        fewer than four visible landmarks.
    ConvergenceError
        no start converged to a pose in front of the camera.
    """
    vis = landmarks.visible
    n = int(vis.sum())
    if n < 4:
        raise InsufficientCorrespondencesError(f"need at least 4 visible landmarks, got {n}")
    obj = np.ascontiguousarray(model.points[vis])
    img = np.ascontiguousarray(landmarks.points[vis])

    best = None
    failed = (0, np.inf)
    for R0, t0 in _initial_candidates(obj, img, intr):
        R, t, cost, iters, ok = kernels.lm_pnp(
            obj, img, intr.fx, intr.fy, intr.cx, intr.cy,
            np.ascontiguousarray(R0), np.ascontiguousarray(t0, dtype=np.float64),
            PNP_MAX_ITER, PNP_STEP_TOL,
        )
        if not (ok and np.isfinite(cost) and t[2] > 0):
            if cost < failed[1]:
                failed = (iters, cost)
            continue
        if best is None or cost < best[2]:
            best = (R, t, cost)
    if best is None:
        raise ConvergenceError(failed[0], float(np.sqrt(failed[1] / n)))
    R, t, cost = best
    return HeadPose(_project_to_so3(R), np.array(t), float(np.sqrt(cost / n)))


def rotation_angle_between(R1, R2) -> float:
    """Geodesic angle in degrees between two rotations."""
    c = (np.trace(np.asarray(R1).T @ np.asarray(R2)) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
