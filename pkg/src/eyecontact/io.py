"""Dataset, model and report files.

Datasets are newline-delimited JSON: a header object, then one object per
frame. Reals are written with nine significant digits and keys in a fixed
order, so reading and re-writing a file reproduces it byte for byte.
"""
import json
import os
from pathlib import Path

import numpy as np

from .classifier import EyeContactModel, model_from_dict, model_to_dict
from .errors import DatasetFormatError, EmptyDatasetError
from .geometry import N_LANDMARKS, PHONE_CAMERA, CameraIntrinsics, GazeVector, Landmarks2D
from .pipeline import FrameRecord, FrameTruth, VisibilityCategory

DATASET_FORMAT = "eyecontact-dataset"
DATASET_VERSION = 1
SIG_DIGITS = 9


def canonical_real(x: float) -> float:
    return float(f"{float(x):.{SIG_DIGITS}g}")


def _reals(values) -> list:
    return [canonical_real(v) for v in np.asarray(values, dtype=np.float64).ravel()]


def dumps_canonical(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _intrinsics_dict(intr: CameraIntrinsics) -> dict:
    return {"fx": canonical_real(intr.fx), "fy": canonical_real(intr.fy),
            "cx": canonical_real(intr.cx), "cy": canonical_real(intr.cy)}


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


def record_to_dict(rec: FrameRecord, default_intrinsics: CameraIntrinsics | None = None) -> dict:
    intr = None
    if default_intrinsics is None or _intrinsics_dict(rec.intrinsics) != _intrinsics_dict(default_intrinsics):
        intr = _intrinsics_dict(rec.intrinsics)
    truth = None
    if rec.truth is not None:
        t = rec.truth
        truth = {
            "gaze": _reals(t.gaze.direction),
            "face_center": _reals(t.face_center),
            "rotation": _reals(t.rotation),
            "pitch_n": canonical_real(t.pitch_n),
            "yaw_n": canonical_real(t.yaw_n),
        }
    return {
        "person_id": rec.person_id,
        "frame_id": rec.frame_id,
        "category": rec.visibility_category.value,
        "landmarks": [None if p is None else _reals(p) for p in rec.landmarks.to_list()],
        "intrinsics": intr,
        "feature": None if rec.feature is None else _reals(rec.feature),
        "gaze_estimate": None if rec.gaze_estimate is None else _reals(rec.gaze_estimate.direction),
        "gt_eye_contact": rec.gt_eye_contact,
        "truth": truth,
    }


def _column_of(text: str, key: str) -> int:
    i = text.find(f'"{key}"')
    return i + 1 if i >= 0 else 1


def _real_list(value, n: int | None, what: str) -> list:
    if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
        raise ValueError(f"{what} must be a list of numbers")
    if n is not None and len(value) != n:
        raise ValueError(f"{what} must have {n} entries, got {len(value)}")
    return [float(v) for v in value]


def record_from_dict(d: dict, feature_dim: int | None, default_intrinsics: CameraIntrinsics) -> FrameRecord:
    """Build a FrameRecord; raises (key, message) pairs via KeyError/ValueError."""
    missing = [k for k in ("person_id", "frame_id", "category", "landmarks") if k not in d]
    if missing:
        raise KeyError(missing[0])
    if not isinstance(d["person_id"], str) or not d["person_id"]:
        raise ValueError("person_id must be a non-empty string")
    lm = d["landmarks"]
    if not isinstance(lm, list) or len(lm) != N_LANDMARKS:
        raise ValueError(f"landmarks must list {N_LANDMARKS} entries (null when invisible)")
    landmarks = Landmarks2D.from_list([None if p is None else _real_list(p, 2, "landmark") for p in lm])
    intr = default_intrinsics
    if d.get("intrinsics") is not None:
        intr = CameraIntrinsics(**{k: float(v) for k, v in d["intrinsics"].items()})
    feature = d.get("feature")
    if feature is not None:
        feature = _real_list(feature, None, "feature")
        if feature_dim is not None and len(feature) != feature_dim:
            raise ValueError(f"feature has {len(feature)} entries, header declares feature_dim {feature_dim}")
    gaze = d.get("gaze_estimate")
    if gaze is not None:
        gaze = GazeVector(np.array(_real_list(gaze, 3, "gaze_estimate")))
    gt = d.get("gt_eye_contact")
    if gt is not None and not isinstance(gt, bool):
        raise ValueError("gt_eye_contact must be true, false or null")
    truth = None
    if d.get("truth") is not None:
        t = d["truth"]
        truth = FrameTruth(
            gaze=GazeVector(np.array(_real_list(t["gaze"], 3, "truth gaze"))),
            face_center=np.array(_real_list(t["face_center"], 3, "truth face_center")),
            rotation=np.array(_real_list(t["rotation"], 9, "truth rotation")).reshape(3, 3),
            pitch_n=float(t["pitch_n"]),
            yaw_n=float(t["yaw_n"]),
        )
    return FrameRecord(
        person_id=d["person_id"],
        frame_id=str(d["frame_id"]),
        landmarks=landmarks,
        intrinsics=intr,
        visibility_category=VisibilityCategory(d["category"]),
        feature=None if feature is None else np.array(feature),
        gaze_estimate=gaze,
        gt_eye_contact=gt,
        truth=truth,
    )


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


def _feature_dim(records) -> int | None:
    dims = {len(r.feature) for r in records if r.feature is not None}
    if len(dims) > 1:
        raise DatasetFormatError(f"records mix feature dimensions {sorted(dims)}")
    return dims.pop() if dims else None


def serialize_dataset(records) -> str:
    records = list(records)
    if not records:
        raise EmptyDatasetError("refusing to write a dataset without records")
    default = records[0].intrinsics
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "feature_dim": _feature_dim(records),
        "intrinsics": _intrinsics_dict(default),
    }
    lines = [dumps_canonical(header)]
    lines += [dumps_canonical(record_to_dict(r, default)) for r in records]
    return "\n".join(lines) + "\n"


def write_dataset(records, path) -> None:
    text = serialize_dataset(records)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _parse_line(text: str, lineno: int):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(exc.msg, lineno, exc.colno) from exc


def parse_dataset(text: str) -> list[FrameRecord]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or all(not ln.strip() for ln in lines):
        raise EmptyDatasetError("dataset file is empty")
    header = _parse_line(lines[0], 1)
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise DatasetFormatError(f"header must declare format {DATASET_FORMAT!r}", 1, 1)
    if header.get("version") != DATASET_VERSION:
        raise DatasetFormatError(
            f"unsupported dataset version {header.get('version')!r} (expected {DATASET_VERSION})",
            1, _column_of(lines[0], "version"),
        )
    feature_dim = header.get("feature_dim")
    if feature_dim is not None and (isinstance(feature_dim, bool) or not isinstance(feature_dim, int) or feature_dim < 1):
        raise DatasetFormatError("feature_dim must be a positive integer or null", 1, _column_of(lines[0], "feature_dim"))
    try:
        default = CameraIntrinsics(**header["intrinsics"]) if header.get("intrinsics") else PHONE_CAMERA
    except (TypeError, ValueError) as exc:
        raise DatasetFormatError(f"bad header intrinsics: {exc}", 1, _column_of(lines[0], "intrinsics")) from exc

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise DatasetFormatError("blank line inside dataset", lineno, 1)
        obj = _parse_line(line, lineno)
        if not isinstance(obj, dict):
            raise DatasetFormatError("record must be a JSON object", lineno, 1)
        try:
            records.append(record_from_dict(obj, feature_dim, default))
        except KeyError as exc:
            raise DatasetFormatError(f"missing field {exc.args[0]!r}", lineno, 1) from exc
        except (ValueError, TypeError) as exc:
            key = "feature" if "feature" in str(exc) else None
            col = _column_of(line, key) if key else 1
            raise DatasetFormatError(str(exc), lineno, col) from exc
    if not records:
        raise EmptyDatasetError("dataset has a header but no records")
    return records


def read_dataset(path) -> list[FrameRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh.read())


# ---------------------------------------------------------------------------
# models and reports
# ---------------------------------------------------------------------------


def save_model(model: EyeContactModel, path) -> None:
    d = model_to_dict(model)
    d["weights"] = _reals(model.weights)
    d["bias"] = canonical_real(model.bias)
    Path(path).write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")


def load_model(path) -> EyeContactModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(exc.msg, exc.lineno, exc.colno) from exc
    return model_from_dict(d)


REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"


def _round_floats(obj):
    if isinstance(obj, float):
        return canonical_real(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def report_json_text(report: dict) -> str:
    return json.dumps(_round_floats(report), indent=2, allow_nan=False) + "\n"


def write_report(report: dict, out_dir) -> tuple[Path, Path]:
    """Write report.json and report.csv into ``out_dir`` (created if needed)."""
    from .evaluation import report_dict_to_csv

    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    rounded = _round_floats(report)
    jpath, cpath = out / REPORT_JSON, out / REPORT_CSV
    jpath.write_text(report_json_text(rounded), encoding="utf-8")
    cpath.write_text(report_dict_to_csv(rounded), encoding="utf-8")
    return jpath, cpath


def read_report(in_dir) -> dict:
    path = Path(in_dir) / REPORT_JSON
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from exc
