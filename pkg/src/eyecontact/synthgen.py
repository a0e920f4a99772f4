"""Deterministic synthetic stand-in for mobile eye-contact datasets.

Each frame draws from its own random stream, keyed by
``SeedSequence(seed, spawn_key=(FRAME_STREAM, person, frame))``, so any
subset of frames can be regenerated independently and generation order
does not matter.

Per frame: a face centre in front of the phone, a head pose sampled in
normalized camera space, and a gaze target that is either on the screen
(eye contact) or in the environment. From these come noisy landmarks, a
noisy gaze estimate, a feature vector and a visibility category with the
matching landmarks removed.
"""
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .geometry import (
    EYE_LEFT,
    EYE_RIGHT,
    GENERIC_FACE_MODEL,
    MOUTH,
    PHONE_CAMERA,
    CameraIntrinsics,
    FaceModel3D,
    GazeVector,
    HeadPose,
    Landmarks2D,
    angles_to_rotation,
    project_points,
)
from .pipeline import CATEGORIES, FrameRecord, FrameTruth, VisibilityCategory

PROFILE_STREAM = 0
FRAME_STREAM = 1
EMBEDDING_STREAM = 2
N_BASE_FEATURES = 5

# whole face about a third of the time, no face one frame in ten
DEFAULT_VISIBILITY = (0.30, 0.15, 0.15, 0.10, 0.08, 0.07, 0.05, 0.10)
# face-detector failures on partial faces that still show both eyes
DEFAULT_DETECTION_FAILURE = (0.0, 0.0, 0.3, 0.3, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class GeneratorConfig:
    n_persons: int = 10
    frames_per_person: int = 500
    p_contact: float = 0.58
    # screen rectangle on the camera plane (mm); camera sits at its top edge
    screen_x: tuple = (-35.0, 35.0)
    screen_y: tuple = (10.0, 150.0)
    face_distance: tuple = (250.0, 450.0)
    face_offset_mean: tuple = (0.0, 60.0)
    face_offset_sd: tuple = (30.0, 30.0)
    # head pose in normalized camera space (deg): central + wide component
    pitch_mean: float = 0.0
    yaw_mean: float = 0.0
    pose_sd: float = 10.0
    wide_pose_sd: float = 30.0
    wide_pose_weight: float = 0.05
    person_pose_sd: float = 3.0
    roll_sd: float = 5.0
    pose_clip: float = 80.0
    pixel_noise: float = 1.0
    gaze_noise_deg: float = 3.0
    # noise multiplier 1 + gain * (head rotation / 45 deg)^2 on gaze and features
    pose_noise_gain: float = 1.0
    # the feature extractor undoes head rotation up to about this many degrees per axis
    pose_compensation_limit: float = 25.0
    feature_dim: int = 64
    feature_noise: float = 0.5
    person_feature_scale: float = 0.1
    person_bias_scale: float = 0.1
    visibility_weights: tuple = DEFAULT_VISIBILITY
    detection_failure: tuple = DEFAULT_DETECTION_FAILURE
    # non-contact gaze: away from the device plane, or at per-person objects
    env_away_fraction: float = 0.5
    env_objects: int = 2
    env_object_radius: tuple = (400.0, 900.0)
    env_object_spread: float = 30.0
    env_min_radius: float = 400.0
    intrinsics: CameraIntrinsics = PHONE_CAMERA
    seed: int = 0
    embedding_seed: int = 0

    def __post_init__(self):
        for name in ("screen_x", "screen_y", "face_distance", "face_offset_mean", "face_offset_sd",
                     "visibility_weights", "detection_failure", "env_object_radius"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if isinstance(self.intrinsics, dict):
            object.__setattr__(self, "intrinsics", CameraIntrinsics(**self.intrinsics))
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.n_persons >= 1 and self.frames_per_person >= 1, "need at least one person and frame")
        need(0.0 < self.p_contact < 1.0, "p_contact must lie in (0, 1)")
        for name in ("screen_x", "screen_y", "face_distance", "env_object_radius"):
            lo, hi = getattr(self, name)
            need(lo < hi, f"{name} must be a non-empty range")
        need(self.face_distance[0] > 0, "faces must be in front of the camera")
        need(all(s >= 0 for s in self.face_offset_sd), "face_offset_sd must be non-negative")
        need(self.pose_sd > 0 and self.wide_pose_sd > 0, "pose spreads must be positive")
        need(0.0 <= self.wide_pose_weight <= 1.0, "wide_pose_weight must lie in [0, 1]")
        need(0.0 < self.pose_clip < 90.0, "pose_clip must lie in (0, 90)")
        for name in ("person_pose_sd", "roll_sd", "pixel_noise", "gaze_noise_deg", "pose_noise_gain",
                     "feature_noise", "person_feature_scale", "person_bias_scale", "env_object_spread"):
            need(getattr(self, name) >= 0, f"{name} must be non-negative")
        need(self.pose_compensation_limit > 0, "pose_compensation_limit must be positive")
        need(self.feature_dim >= 1, "feature_dim must be positive")
        w = np.asarray(self.visibility_weights)
        need(len(w) == len(CATEGORIES) and np.all(w >= 0), "visibility_weights needs 8 non-negative weights")
        need(abs(w.sum() - 1.0) <= 1e-9, f"visibility_weights must sum to 1 (got {w.sum()!r})")
        f = np.asarray(self.detection_failure)
        need(len(f) == len(CATEGORIES) and np.all((f >= 0) & (f <= 1)), "detection_failure needs 8 probabilities")
        need(0.0 <= self.env_away_fraction <= 1.0, "env_away_fraction must lie in [0, 1]")
        need(self.env_objects >= 1, "env_objects must be positive")
        need(self.env_min_radius > 0, "env_min_radius must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["intrinsics"] = asdict(self.intrinsics)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown generator config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("visibility_weights", "detection_failure"):
            if isinstance(d.get(key), dict):
                d[key] = [float(d[key].get(c.value, 0.0)) for c in CATEGORIES]
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "GeneratorConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return GeneratorConfig(**d)


@dataclass(frozen=True, eq=False)
class PersonProfile:
    person_id: str
    embedding: np.ndarray  # (D, 5)
    bias: np.ndarray  # (D,)
    pose_offset: tuple = (0.0, 0.0)  # (pitch, yaw) deg
    env_targets: np.ndarray = field(default_factory=lambda: np.zeros((1, 2)))


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def shared_embedding(cfg: GeneratorConfig) -> np.ndarray:
    """Feature map common to every person (the stand-in for one trained CNN)."""
    return _stream(cfg.embedding_seed, EMBEDDING_STREAM).normal(0.0, 1.0, (cfg.feature_dim, N_BASE_FEATURES))


def make_profile(cfg: GeneratorConfig, index: int, base: np.ndarray | None = None) -> PersonProfile:
    rng = _stream(cfg.seed, PROFILE_STREAM, index)
    if base is None:
        base = shared_embedding(cfg)
    emb = base + cfg.person_feature_scale * rng.normal(0.0, 1.0, base.shape)
    bias = cfg.person_bias_scale * rng.normal(0.0, 1.0, cfg.feature_dim)
    offset = tuple(float(v) for v in rng.normal(0.0, cfg.person_pose_sd, 2)) if cfg.person_pose_sd > 0 else (0.0, 0.0)
    radius = rng.uniform(*cfg.env_object_radius, cfg.env_objects)
    angle = rng.uniform(0.0, 2 * np.pi, cfg.env_objects)
    targets = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return PersonProfile(f"P{index:02d}", emb, bias, offset, targets)


def compensated_angle(angle: float, limit: float) -> float:
    """Head rotation the feature extractor removes: ``limit * tanh(angle / limit)``."""
    return float(limit * np.tanh(angle / limit))


def synth_feature(gaze_n, pitch_n: float, yaw_n: float, profile: PersonProfile, sigma: float,
                  rng: np.random.Generator, compensation_limit: float = np.inf) -> np.ndarray:
    """Affine image of [u, pitch_n / 90, yaw_n / 90] plus person bias and noise.

    ``u`` is the eye-in-head gaze rotated back by the compensated head
    angles. Near-frontal poses are undone almost exactly and ``u`` is the
    normalized gaze; beyond ``compensation_limit`` the correction saturates
    and the residual grows nonlinearly, as for an extractor trained on
    mostly frontal faces. An infinite limit gives pose-invariant features.
    """
    g = gaze_n.direction if isinstance(gaze_n, GazeVector) else np.asarray(gaze_n, dtype=np.float64)
    if np.isinf(compensation_limit):
        u = g
    else:
        h = angles_to_rotation(pitch_n, yaw_n, 0.0).T @ g
        u = angles_to_rotation(compensated_angle(pitch_n, compensation_limit),
                               compensated_angle(yaw_n, compensation_limit), 0.0) @ h
    base = np.array([u[0], u[1], u[2], pitch_n / 90.0, yaw_n / 90.0])
    f = profile.embedding @ base + profile.bias
    if sigma > 0:
        f = f + rng.normal(0.0, sigma, len(f))
    return f


def normalized_basis(center, roll_deg: float = 0.0) -> np.ndarray:
    """Rows: normalized-camera axes for a face at ``center``, rotated by ``roll_deg``."""
    z = np.asarray(center, dtype=np.float64)
    z = z / np.linalg.norm(z)
    x0 = np.array([1.0, 0.0, 0.0]) - z[0] * z
    x0 /= np.linalg.norm(x0)
    y0 = np.cross(z, x0)
    r = np.radians(roll_deg)
    x = np.cos(r) * x0 + np.sin(r) * y0
    return np.vstack([x, np.cross(z, x), z])


def perturb_direction(g, sigma_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate a unit vector by an isotropic Gaussian angular error."""
    g = np.asarray(g, dtype=np.float64)
    a, b = rng.normal(0.0, np.radians(sigma_deg), 2)
    helper = np.array([1.0, 0.0, 0.0]) if abs(g[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(g, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(g, e1)
    theta = np.hypot(a, b)
    if theta == 0.0:
        return g.copy()
    out = np.cos(theta) * g + np.sin(theta) * (a * e1 + b * e2) / theta
    return out / np.linalg.norm(out)


def pose_noise_multiplier(cfg: GeneratorConfig, pitch_n: float, yaw_n: float) -> float:
    c = np.cos(np.radians(pitch_n)) * np.cos(np.radians(yaw_n))
    theta = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
    return 1.0 + cfg.pose_noise_gain * (theta / 45.0) ** 2


def visible_after_category(category: VisibilityCategory, rng: np.random.Generator) -> list[int]:
    """Indices of the landmarks that remain visible for a category."""
    eyes = [EYE_RIGHT, EYE_LEFT]
    if category is VisibilityCategory.WHOLE_ALL:
        return list(range(6))
    if category is VisibilityCategory.WHOLE_SOME:
        k = int(rng.integers(1, 3))
        dropped = set(rng.choice(6, k, replace=False).tolist())
        return [i for i in range(6) if i not in dropped]
    if category is VisibilityCategory.PARTIAL_2EYES_MOUTH:
        return [*EYE_RIGHT, *EYE_LEFT, MOUTH[int(rng.integers(2))]]
    if category is VisibilityCategory.PARTIAL_2EYES:
        return [*EYE_RIGHT, *EYE_LEFT]
    if category is VisibilityCategory.PARTIAL_1EYE_MOUTH:
        return [*eyes[int(rng.integers(2))], MOUTH[int(rng.integers(2))]]
    if category is VisibilityCategory.PARTIAL_1EYE:
        return list(eyes[int(rng.integers(2))])
    if category is VisibilityCategory.PARTIAL_MOUTH:
        return [MOUTH[int(rng.integers(2))]]
    return []


def generate_frame(cfg: GeneratorConfig, profile: PersonProfile, person_index: int, frame_index: int,
                   model: FaceModel3D = GENERIC_FACE_MODEL) -> FrameRecord:
    rng = _stream(cfg.seed, FRAME_STREAM, person_index, frame_index)

    center = np.array([
        rng.normal(cfg.face_offset_mean[0], cfg.face_offset_sd[0]),
        rng.normal(cfg.face_offset_mean[1], cfg.face_offset_sd[1]),
        rng.uniform(*cfg.face_distance),
    ])
    sd = cfg.wide_pose_sd if rng.random() < cfg.wide_pose_weight else cfg.pose_sd
    pitch_n, yaw_n = np.clip(
        rng.normal([cfg.pitch_mean + profile.pose_offset[0], cfg.yaw_mean + profile.pose_offset[1]], sd),
        -cfg.pose_clip, cfg.pose_clip,
    )
    pitch_n, yaw_n = float(pitch_n), float(yaw_n)
    basis = normalized_basis(center, rng.normal(0.0, cfg.roll_sd))
    rotation = basis.T @ angles_to_rotation(pitch_n, yaw_n, 0.0)

    contact = bool(rng.random() < cfg.p_contact)
    if contact:
        target = np.array([rng.uniform(*cfg.screen_x), rng.uniform(*cfg.screen_y), 0.0])
        gaze = (target - center) / np.linalg.norm(target - center)
    elif rng.random() < cfg.env_away_fraction:
        v = rng.normal(0.0, 1.0, 3)
        v[2] = abs(v[2]) + 1e-3
        gaze = v / np.linalg.norm(v)
    else:
        obj = profile.env_targets[int(rng.integers(len(profile.env_targets)))]
        p = obj + rng.normal(0.0, cfg.env_object_spread, 2)
        r = np.linalg.norm(p)
        if r < cfg.env_min_radius:
            p = p * (cfg.env_min_radius / r)
        target = np.array([p[0], p[1], 0.0])
        gaze = (target - center) / np.linalg.norm(target - center)

    pose = HeadPose(rotation, center)
    uv = project_points(model, pose, cfg.intrinsics) + rng.normal(0.0, cfg.pixel_noise, (6, 2))
    m = pose_noise_multiplier(cfg, pitch_n, yaw_n)
    gaze_est = perturb_direction(gaze, cfg.gaze_noise_deg * m, rng)
    feature = synth_feature(basis @ gaze, pitch_n, yaw_n, profile, cfg.feature_noise * m, rng,
                            cfg.pose_compensation_limit)

    # visibility last: it must not influence anything drawn above
    cat_idx = int(rng.choice(len(CATEGORIES), p=np.asarray(cfg.visibility_weights)))
    category = CATEGORIES[cat_idx]
    keep = visible_after_category(category, rng)
    if rng.random() < cfg.detection_failure[cat_idx]:
        keep = []
    pts = np.full((6, 2), np.nan)
    pts[keep] = uv[keep]

    truth = FrameTruth(GazeVector(gaze), center, rotation, pitch_n, yaw_n)
    return FrameRecord(
        person_id=profile.person_id,
        frame_id=f"{profile.person_id}-{frame_index:05d}",
        landmarks=Landmarks2D(pts),
        intrinsics=cfg.intrinsics,
        visibility_category=category,
        feature=feature,
        gaze_estimate=GazeVector(gaze_est),
        gt_eye_contact=contact,
        truth=truth,
    )


def generate_dataset(cfg: GeneratorConfig) -> list[FrameRecord]:
    base = shared_embedding(cfg)
    records = []
    for p in range(cfg.n_persons):
        profile = make_profile(cfg, p, base)
        records.extend(generate_frame(cfg, profile, p, f) for f in range(cfg.frames_per_person))
    return records
