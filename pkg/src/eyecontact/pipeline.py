"""Per-frame processing and unsupervised label generation.

A frame goes landmarks -> head pose -> normalization -> gaze ray -> point on
the camera plane. Gaze points from a training set are clustered; the
cluster whose centroid lies closest to the camera (the origin) is the eye
contact target, its members become positives and every other clustered
sample a negative.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import InsufficientCorrespondencesError, MissingInputError, NoClusterError, NoIntersectionError
from .geometry import (
    EYE_LEFT,
    EYE_RIGHT,
    GENERIC_FACE_MODEL,
    MOUTH,
    CameraIntrinsics,
    FaceModel3D,
    GazePoint2D,
    GazeVector,
    HeadPose,
    Landmarks2D,
    face_center,
    intersect_gaze_with_camera_plane,
    solve_pnp,
)
from .normalization import NormParams, compute_normalization, normalize_head_pose

NOISE = kernels.NOISE


class VisibilityCategory(str, Enum):
    WHOLE_ALL = "Whole face all landmarks"
    WHOLE_SOME = "Whole face some landmarks"
    PARTIAL_2EYES_MOUTH = "Partial face 2 eyes 1 mouth"
    PARTIAL_2EYES = "Partial face 2 eyes no mouth"
    PARTIAL_1EYE_MOUTH = "Partial face 1 eye 1 mouth"
    PARTIAL_1EYE = "Partial face 1 eye no mouth"
    PARTIAL_MOUTH = "Partial face no eyes 1 mouth"
    NO_FACE = "No face"

    def __str__(self):
        return self.value


CATEGORIES = tuple(VisibilityCategory)

# (max visible eye corners, max visible mouth corners, eye corners from one eye only)
_CATEGORY_LIMITS = {
    VisibilityCategory.WHOLE_ALL: (4, 2, False),
    VisibilityCategory.WHOLE_SOME: (4, 2, False),
    VisibilityCategory.PARTIAL_2EYES_MOUTH: (4, 1, False),
    VisibilityCategory.PARTIAL_2EYES: (4, 0, False),
    VisibilityCategory.PARTIAL_1EYE_MOUTH: (2, 1, True),
    VisibilityCategory.PARTIAL_1EYE: (2, 0, True),
    VisibilityCategory.PARTIAL_MOUTH: (0, 1, False),
    VisibilityCategory.NO_FACE: (0, 0, False),
}


def category_allows(category: VisibilityCategory, visible: np.ndarray) -> bool:
    """Whether a landmark visibility mask is consistent with a category."""
    max_eye, max_mouth, one_eye = _CATEGORY_LIMITS[VisibilityCategory(category)]
    right = int(visible[list(EYE_RIGHT)].sum())
    left = int(visible[list(EYE_LEFT)].sum())
    mouth = int(visible[list(MOUTH)].sum())
    if right + left > max_eye or mouth > max_mouth:
        return False
    return not (one_eye and right and left)


@dataclass(frozen=True, eq=False)
class FrameTruth:
    """Generator-side values hidden from the pipeline, kept for oracle checks."""

    gaze: GazeVector
    face_center: np.ndarray
    rotation: np.ndarray
    pitch_n: float
    yaw_n: float


@dataclass(frozen=True, eq=False)
class FrameRecord:
    person_id: str
    frame_id: str
    landmarks: Landmarks2D
    intrinsics: CameraIntrinsics
    visibility_category: VisibilityCategory = VisibilityCategory.WHOLE_ALL
    feature: np.ndarray | None = None
    gaze_estimate: GazeVector | None = None
    gt_eye_contact: bool | None = None
    truth: FrameTruth | None = None

    def __post_init__(self):
        if not self.person_id:
            raise ValueError("person_id must be non-empty")
        object.__setattr__(self, "visibility_category", VisibilityCategory(self.visibility_category))
        if self.feature is not None:
            f = np.array(self.feature, dtype=np.float64)
            f.setflags(write=False)
            object.__setattr__(self, "feature", f)


@dataclass(frozen=True, eq=False)
class GazeSample:
    head_pose: HeadPose
    pitch_n: float
    yaw_n: float
    gaze: GazeVector
    gaze_point: GazePoint2D | None
    frame: FrameRecord


def process_frame(rec: FrameRecord, model: FaceModel3D = GENERIC_FACE_MODEL,
                  norm: NormParams = NormParams()) -> GazeSample:
    """Run one frame through pose estimation, normalization and gaze intersection.

    The gaze estimate is a camera-frame direction; the ray starts at the
    estimated face centre. ``gaze_point`` is None when the ray never reaches
    the camera plane.
    """
    if rec.landmarks.n_visible < 4:
        raise InsufficientCorrespondencesError(
            f"frame {rec.frame_id}: {rec.landmarks.n_visible} visible landmarks, need 4"
        )
    if rec.gaze_estimate is None:
        raise MissingInputError(f"frame {rec.frame_id} has no gaze estimate")
    pose = solve_pnp(rec.landmarks, model, rec.intrinsics)
    center = face_center(model, pose)
    transform = compute_normalization(pose, center, norm)
    pitch_n, yaw_n = normalize_head_pose(transform, pose)
    try:
        point = intersect_gaze_with_camera_plane(center, rec.gaze_estimate)
    except NoIntersectionError:
        point = None
    return GazeSample(pose, pitch_n, yaw_n, rec.gaze_estimate, point, rec)


# ---------------------------------------------------------------------------
# clustering and labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterParams:
    eps: float = 20.0
    min_samples: int = 5
    max_points: int | None = None  # cluster a seeded subsample of this size
    seed: int = 0


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    assignments: np.ndarray
    target_cluster: int
    labels: np.ndarray  # True = eye contact; meaningless where ``included`` is False
    included: np.ndarray  # False for noise points

    @property
    def n_labeled(self) -> int:
        return int(self.included.sum())


def _as_points(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        arr = points
    else:
        arr = [np.asarray(p) for p in points]
    return np.ascontiguousarray(np.asarray(arr, dtype=np.float64).reshape(-1, 2))


def cluster_gaze_points(points, params: ClusterParams = ClusterParams()) -> np.ndarray:
    """DBSCAN assignments for 2D gaze points (mm); noise is ``NOISE`` (-1).

    With ``params.max_points`` set and more points than that, a seeded
    subsample is clustered and every other point joins the cluster of its
    nearest subsample core point within ``eps`` (noise otherwise).
    """
    pts = _as_points(points)
    if len(pts) < params.min_samples:
        raise NoClusterError(f"{len(pts)} points, fewer than min_samples={params.min_samples}")
    if params.max_points is not None and len(pts) > params.max_points:
        rng = np.random.default_rng(params.seed)
        idx = np.sort(rng.choice(len(pts), params.max_points, replace=False))
        sub = np.ascontiguousarray(pts[idx])
        sub_labels = kernels.dbscan(sub, float(params.eps), int(params.min_samples))
        d2 = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=-1)
        core = (d2 <= params.eps**2).sum(axis=1) >= params.min_samples
        labels = np.full(len(pts), NOISE, dtype=np.int64)
        labels[idx] = sub_labels
        rest = np.setdiff1d(np.arange(len(pts)), idx)
        if core.any() and len(rest):
            cores = sub[core]
            d2r = ((pts[rest][:, None, :] - cores[None, :, :]) ** 2).sum(axis=-1)
            nearest = d2r.argmin(axis=1)
            close = d2r[np.arange(len(rest)), nearest] <= params.eps**2
            labels[rest[close]] = sub_labels[core][nearest[close]]
    else:
        labels = kernels.dbscan(pts, float(params.eps), int(params.min_samples))
    if not (labels >= 0).any():
        raise NoClusterError("clustering found no dense region")
    return labels


def select_target_cluster(assignments, points) -> int:
    """Cluster whose centroid is nearest the origin; ties go to the lower id."""
    a = np.asarray(assignments)
    pts = _as_points(points)
    ids = np.unique(a[a >= 0])
    if len(ids) == 0:
        raise NoClusterError("no clusters to choose from")
    norms = np.array([np.linalg.norm(pts[a == k].mean(axis=0)) for k in ids])
    return int(ids[np.argmin(norms)])


def derive_labels(assignments, target: int) -> ClusterLabeling:
    a = np.asarray(assignments, dtype=np.int64)
    if not (a == target).any():
        raise NoClusterError(f"target cluster {target} has no members")
    included = a != NOISE
    return ClusterLabeling(a, int(target), a == target, included)


def training_labels_from_clusters(samples, params: ClusterParams = ClusterParams(), groups=None):
    """Cluster-derived training labels for a list of GazeSamples.

    Returns ``(labels, included)`` boolean arrays aligned with ``samples``.
    Samples whose gaze misses the camera plane are negatives; noise points
    are excluded. With ``groups`` (one key per sample), each group is
    clustered and labeled separately.

    Raises NoClusterError if a group has nothing to cluster.
    """
    n = len(samples)
    labels = np.zeros(n, dtype=bool)
    included = np.ones(n, dtype=bool)
    keys = np.zeros(n, dtype=np.int64) if groups is None else np.unique(groups, return_inverse=True)[1]
    has_point = np.array([s.gaze_point is not None for s in samples], dtype=bool)
    for key in np.unique(keys):
        idx = np.flatnonzero((keys == key) & has_point)
        pts = np.array([[samples[i].gaze_point.x, samples[i].gaze_point.y] for i in idx]).reshape(-1, 2)
        assignments = cluster_gaze_points(pts, params)
        lab = derive_labels(assignments, select_target_cluster(assignments, pts))
        labels[idx] = lab.labels
        included[idx] = lab.included
    return labels, included
